//! Application of `(tau - A)^{-1}` on `l_{2,rho}`.
//!
//! Three independent routes are provided:
//!
//! - **causal**: for `rho > r(A)`, `u_n = sum_{k <= n-1} A^{n-1-k} f_k`,
//!   evaluated by the recursion `u_{n+1} = A u_n + f_n`;
//! - **split**: with Riesz projections `P, Q` at `gamma = rho`,
//!   `u = (tau - PAP)^{-1} P f + (tau - QAQ)^{-1} Q f` where the first term is
//!   the causal sum for `PAP` and the second is the anticausal sum
//!   `-sum_{k >= n} (QAQ)^{n-1-k} Q f_k`, evaluated backwards by
//!   `u_n = (QAQ)^{-1} (u_{n+1} - Q f_n)`;
//! - **frequency**: `u = Z^{-1}[ z -> (z - A)^{-1} Z(f)(z) ]` on sampled circles.
//!
//! Infinite tails are cut at `tail_cut` terms, chosen so that the relevant
//! scaled powers have norm at most [`SERIES_TOL`].

use crate::error::{Error, Result};
use crate::operator::{matrix_power, op_norm, riesz_split, spectral_radius, BoundedOperator, SpectralSplit};
use crate::sequence::{l2_norm, WindowedSequence};
use crate::transform::{inverse_ztransform, ztransform};
use crate::{c64, CMatrix, CVector, GAP_TOL, SERIES_TOL, SUPP_TOL};

const TAIL_LIMIT: usize = 200_000;
/// Default trapezoid node count for splits built by a plan.
pub const DEFAULT_QUAD_POINTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResolventMode {
    Causal,
    Split,
    Frequency,
}

impl std::str::FromStr for ResolventMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "causal" => Ok(Self::Causal),
            "split" => Ok(Self::Split),
            "frequency" => Ok(Self::Frequency),
            other => Err(Error::InvalidInput(format!("unknown resolvent mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResolventPlan {
    op: BoundedOperator,
    rho: f64,
    mode: ResolventMode,
    split: Option<SpectralSplit>,
    /// Forward tail length.
    tail_cut: usize,
    /// Backward (anticausal) tail length.
    back_tail_cut: usize,
    /// `A` in causal mode, `PAP` in split mode.
    forward_op: CMatrix,
    /// `(QAQ)^{-1}` on `range(Q)` in split mode.
    backward_op: Option<CMatrix>,
}

/// Smallest `K` with `|m^K| <= SERIES_TOL`, starting from the eigenvalue
/// estimate `ratio^K <= SERIES_TOL` and growing it until the norm bound holds.
fn certified_tail(m: &CMatrix, ratio: f64) -> Result<usize> {
    if op_norm(m) == 0.0 {
        return Ok(0);
    }
    if !(ratio < 1.0) {
        return Err(Error::TailTooLong {
            ratio,
            limit: TAIL_LIMIT,
        });
    }
    let d = m.nrows();
    let mut k = if ratio <= 1e-300 {
        d
    } else {
        (SERIES_TOL.ln() / ratio.ln()).ceil() as usize
    }
    .max(1);
    loop {
        if k > TAIL_LIMIT {
            return Err(Error::TailTooLong {
                ratio,
                limit: TAIL_LIMIT,
            });
        }
        if op_norm(&matrix_power(m, k)) <= SERIES_TOL {
            return Ok(k);
        }
        k += k / 4 + d;
    }
}

/// Eigenvalue-based tail length with a margin for non-normal transients.
fn estimated_tail(ratio: f64, dim: usize) -> Result<usize> {
    if ratio <= 1e-300 {
        return Ok(dim + 1);
    }
    if !(ratio < 1.0) {
        return Err(Error::TailTooLong {
            ratio,
            limit: TAIL_LIMIT,
        });
    }
    let k = (1.5 * SERIES_TOL.ln() / ratio.ln()).ceil() as usize + 2 * dim;
    if k > TAIL_LIMIT {
        return Err(Error::TailTooLong {
            ratio,
            limit: TAIL_LIMIT,
        });
    }
    Ok(k)
}

fn scale(m: &CMatrix, s: f64) -> CMatrix {
    m * c64(s, 0.0)
}

impl ResolventPlan {
    /// Causal plan; requires `rho > r(A) + GAP_TOL`.
    pub fn causal(op: BoundedOperator, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        let r = spectral_radius(&op)?;
        if !(rho > r + GAP_TOL) {
            return Err(Error::NotCausalRegime {
                rho,
                spectral_radius: r,
            });
        }
        let tail_cut = certified_tail(&scale(op.entries(), 1.0 / rho), r / rho)?;
        Ok(Self {
            forward_op: op.entries().clone(),
            op,
            rho,
            mode: ResolventMode::Causal,
            split: None,
            tail_cut,
            back_tail_cut: 0,
            backward_op: None,
        })
    }

    /// Split plan from a precomputed split at `gamma = rho`.
    pub fn split(op: BoundedOperator, rho: f64, split: SpectralSplit) -> Result<Self> {
        check_rho(rho)?;
        if split.dim() != op.dim() {
            return Err(Error::DimensionMismatch {
                expected: op.dim(),
                actual: split.dim(),
            });
        }
        if (split.gamma - rho).abs() > 1e-12 * rho {
            return Err(Error::Precondition(format!(
                "split computed at gamma = {} but plan uses rho = {rho}",
                split.gamma
            )));
        }
        op.check_circle_gap(rho)?;
        let forward_op = split.stable_part(&op);
        let backward = split.unstable_inverse(&op)?;
        let tail_cut = certified_tail(&scale(&forward_op, 1.0 / rho), split.r_inside / rho)?;
        let back_tail_cut = certified_tail(&scale(&backward, rho), rho * split.r_outside_inv)?;
        Ok(Self {
            op,
            rho,
            mode: ResolventMode::Split,
            split: Some(split),
            tail_cut,
            back_tail_cut,
            forward_op,
            backward_op: Some(backward),
        })
    }

    /// Split plan computing the Riesz projections at `rho`.
    pub fn split_auto(op: BoundedOperator, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        let split = riesz_split(&op, rho, DEFAULT_QUAD_POINTS)?;
        Self::split(op, rho, split)
    }

    /// Frequency-domain plan; requires only a spectrum-free circle.
    pub fn frequency(op: BoundedOperator, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        op.check_circle_gap(rho)?;
        let moduli: Vec<f64> = op.eigenvalues()?.iter().map(|z| z.norm()).collect();
        let d = op.dim();
        let inside = moduli.iter().copied().filter(|&m| m < rho).fold(None, |acc: Option<f64>, m| {
            Some(acc.map_or(m, |a| a.max(m)))
        });
        let outside = moduli.iter().copied().filter(|&m| m > rho).fold(None, |acc: Option<f64>, m| {
            Some(acc.map_or(m, |a| a.min(m)))
        });
        let tail_cut = match inside {
            Some(r) => estimated_tail(r / rho, d)?,
            None => 0,
        };
        let back_tail_cut = match outside {
            Some(r) => estimated_tail(rho / r, d)?,
            None => 0,
        };
        Ok(Self {
            forward_op: op.entries().clone(),
            op,
            rho,
            mode: ResolventMode::Frequency,
            split: None,
            tail_cut,
            back_tail_cut,
            backward_op: None,
        })
    }

    /// Plan for `mode`, computing whatever the mode needs.
    pub fn for_mode(op: BoundedOperator, rho: f64, mode: ResolventMode) -> Result<Self> {
        match mode {
            ResolventMode::Causal => Self::causal(op, rho),
            ResolventMode::Split => Self::split_auto(op, rho),
            ResolventMode::Frequency => Self::frequency(op, rho),
        }
    }

    pub fn op(&self) -> &BoundedOperator {
        &self.op
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn mode(&self) -> ResolventMode {
        self.mode
    }

    pub fn spectral_split(&self) -> Option<&SpectralSplit> {
        self.split.as_ref()
    }

    pub fn tail_cut(&self) -> usize {
        self.tail_cut.max(self.back_tail_cut)
    }

    pub fn forward_tail_cut(&self) -> usize {
        self.tail_cut
    }

    pub fn backward_tail_cut(&self) -> usize {
        self.back_tail_cut
    }

    fn require(&self, mode: ResolventMode) -> Result<()> {
        if self.mode != mode {
            return Err(Error::Precondition(format!(
                "plan is in {:?} mode, {mode:?} requested",
                self.mode
            )));
        }
        Ok(())
    }

    fn check_input(&self, f: &WindowedSequence) -> Result<()> {
        if f.dim() != self.op.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.op.dim(),
                actual: f.dim(),
            });
        }
        Ok(())
    }

    /// Apply with this plan's own mode.
    pub fn apply(&self, f: &WindowedSequence) -> Result<WindowedSequence> {
        match self.mode {
            ResolventMode::Causal => apply_resolvent_causal(self, f),
            ResolventMode::Split => apply_resolvent_split(self, f),
            ResolventMode::Frequency => apply_resolvent_frequency(self, f, None),
        }
    }

    /// Causal or split application evaluated exactly on `[lo, hi]`.
    ///
    /// Entries outside the window are dropped; the entries inside do not
    /// depend on where the window ends.
    pub fn apply_on_window(&self, f: &WindowedSequence, lo: i64, hi: i64) -> Result<WindowedSequence> {
        self.check_input(f)?;
        match self.mode {
            ResolventMode::Causal => Ok(forward_sum(&self.forward_op, f, hi).truncate(lo, hi)),
            ResolventMode::Split => {
                let split = self.split.as_ref().ok_or(Error::SplitMissing)?;
                let backward = self.backward_op.as_ref().ok_or(Error::SplitMissing)?;
                let pf = f.map_matrix(&split.proj_stable)?;
                let qf = f.map_matrix(&split.proj_unstable)?;
                let up = forward_sum(&self.forward_op, &pf, hi);
                let uq = backward_sum(backward, &qf, lo);
                Ok(up.add(&uq)?.truncate(lo, hi))
            }
            ResolventMode::Frequency => Err(Error::Precondition(
                "windowed application is available in causal and split modes".into(),
            )),
        }
    }

    /// `|tau u - A u - f|_{2,rho}`
    pub fn residual(&self, u: &WindowedSequence, f: &WindowedSequence) -> Result<f64> {
        let au = u.map_matrix(self.op.entries())?;
        let r = u.shift(1).sub(&au)?.sub(f)?;
        l2_norm(&r, self.rho)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidInput(format!("rho must be positive, got {rho}")));
    }
    Ok(())
}

/// `u_n = sum_{k <= n-1} B^{n-1-k} f_k` for `n` up to `hi`.
fn forward_sum(b: &CMatrix, f: &WindowedSequence, hi: i64) -> WindowedSequence {
    let d = f.dim();
    if f.is_zero() || hi <= f.lo() {
        return WindowedSequence::zeros(d);
    }
    let lo = f.lo();
    let mut values = Vec::with_capacity((hi - lo + 1) as usize);
    let mut u = CVector::zeros(d);
    values.push(u.clone());
    for n in lo..hi {
        u = b * &u;
        if let Some(fn_) = f.entry(n) {
            u += fn_;
        }
        values.push(u.clone());
    }
    WindowedSequence::from_parts(d, lo, values)
}

/// `u_n = -sum_{k >= n} C^{n-1-k} f_k` for `n` down to `lo`, where `binv`
/// plays the role of `C^{-1}`.
fn backward_sum(binv: &CMatrix, f: &WindowedSequence, lo: i64) -> WindowedSequence {
    let d = f.dim();
    if f.is_zero() || lo > f.hi() {
        return WindowedSequence::zeros(d);
    }
    let hi = f.hi();
    let mut values = Vec::with_capacity((hi - lo + 1) as usize);
    let mut next = CVector::zeros(d);
    for n in (lo..=hi).rev() {
        let mut rhs = next;
        if let Some(fn_) = f.entry(n) {
            rhs -= fn_;
        }
        next = binv * rhs;
        values.push(next.clone());
    }
    values.reverse();
    WindowedSequence::from_parts(d, lo, values)
}

/// Causal resolvent on `[lo(f), hi(f) + tail_cut]`.
pub fn apply_resolvent_causal(plan: &ResolventPlan, f: &WindowedSequence) -> Result<WindowedSequence> {
    plan.require(ResolventMode::Causal)?;
    plan.check_input(f)?;
    Ok(forward_sum(&plan.forward_op, f, f.hi() + plan.tail_cut as i64))
}

/// Split resolvent on `[lo(f) - back_tail, hi(f) + forward_tail]`.
pub fn apply_resolvent_split(plan: &ResolventPlan, f: &WindowedSequence) -> Result<WindowedSequence> {
    plan.require(ResolventMode::Split)?;
    plan.apply_on_window(
        f,
        f.lo() - plan.back_tail_cut as i64,
        f.hi() + plan.tail_cut as i64,
    )
}

/// Frequency-domain resolvent on `[lo(f) - back_tail, hi(f) + forward_tail]`
/// using `n` circle samples (default: smallest power of two at least four
/// times the output window).
pub fn apply_resolvent_frequency(
    plan: &ResolventPlan,
    f: &WindowedSequence,
    n: Option<usize>,
) -> Result<WindowedSequence> {
    plan.require(ResolventMode::Frequency)?;
    plan.check_input(f)?;
    let d = f.dim();
    if f.is_zero() {
        return Ok(WindowedSequence::zeros(d));
    }
    let lo = f.lo() - plan.back_tail_cut as i64;
    let hi = f.hi() + plan.tail_cut as i64;
    let width = (hi - lo + 1) as usize;
    let n = n.unwrap_or_else(|| (4 * width).next_power_of_two());
    if n < 2 * width {
        return Err(Error::Aliasing { n_samples: n, width });
    }
    let zf = ztransform(f, plan.rho, n)?;
    let a = plan.op.entries();
    let identity = CMatrix::identity(d, d);
    let zu = zf.map_nodes(|z, v| {
        let lu = (&identity * z - a).lu();
        lu.solve(v).ok_or(Error::SpectrumHit { z, distance: 0.0 })
    })?;
    inverse_ztransform(&zu, lo, hi)
}

/// Applies the split resolvent at `rho` to `delta_{-1} x` and reports whether
/// the result is supported in `Z_{>=0}` (up to `SUPP_TOL`).
pub fn causality_probe(a: &BoundedOperator, rho: f64, x: &CVector) -> Result<(bool, WindowedSequence)> {
    if x.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: x.len(),
        });
    }
    let plan = ResolventPlan::split_auto(a.clone(), rho)?;
    let u = apply_resolvent_split(&plan, &WindowedSequence::impulse(-1, x.clone()))?;
    Ok((u.support_subset_geq(0, SUPP_TOL), u))
}
