//! Contraction solves of `tau u = F(u)`, initial value problems by three
//! equivalent routes, and exponential-stability classification.

use crate::error::{Error, Result};
use crate::operator::{circle_sup_resolvent, spectral_radius, BoundedOperator};
use crate::random::{random_vector, seeded};
use crate::resolvent::{apply_resolvent_causal, ResolventPlan};
use crate::sequence::{l2_norm, Exponent, Weight, WindowedSequence};
use crate::stencil::StencilMap;
use crate::{CVector, GAP_TOL, SUPP_TOL};

/// Differences below this fraction of the iterate norm are roundoff and are
/// excluded from contraction-ratio estimates.
const RATIO_NOISE: f64 = 1e-11;
/// Samples used for `M_rho` when choosing an impulse weight.
const M_RHO_SAMPLES: usize = 1024;

#[derive(Debug, Clone, serde::Serialize)]
pub struct SolveReport {
    pub solution: WindowedSequence,
    pub iterations: usize,
    /// Norm of the last fixed-point increment.
    pub final_residual: f64,
    /// Largest measured `|Delta_{k+1}| / |Delta_k|`, 0 when none was measurable.
    pub contraction_estimate: f64,
    pub converged: bool,
    /// Every measured increment ratio, in iteration order.
    pub ratios: Vec<f64>,
}

/// Banach iteration `u <- map(u)` from `start`.
///
/// Stops once `accept(|Delta|, Delta, u_new)` holds; `NoConvergence` after
/// `max_iter` applications.
pub(crate) fn fixed_point_iterate(
    start: WindowedSequence,
    mut map: impl FnMut(&WindowedSequence) -> Result<WindowedSequence>,
    norm: impl Fn(&WindowedSequence) -> Result<f64>,
    accept: impl Fn(f64, &WindowedSequence, &WindowedSequence) -> bool,
    max_iter: usize,
) -> Result<SolveReport> {
    let mut u = start;
    let mut prev_delta: Option<f64> = None;
    let mut ratios = Vec::new();
    let mut last = f64::INFINITY;
    for it in 1..=max_iter {
        let next = map(&u)?;
        let delta = next.sub(&u)?;
        let dn = norm(&delta)?;
        let un = norm(&next)?;
        if !dn.is_finite() {
            return Err(Error::NonFinite("fixed-point increment"));
        }
        let noise = RATIO_NOISE * un;
        if let Some(p) = prev_delta {
            if p > noise && dn > noise {
                ratios.push(dn / p);
            }
        }
        prev_delta = Some(dn);
        last = dn;
        let done = accept(dn, &delta, &next);
        u = next;
        if done {
            return Ok(SolveReport {
                solution: u,
                iterations: it,
                final_residual: dn,
                contraction_estimate: ratios.iter().copied().fold(0.0, f64::max),
                converged: true,
                ratios,
            });
        }
    }
    Err(Error::NoConvergence(Box::new(SolveReport {
        solution: u,
        iterations: max_iter,
        final_residual: last,
        contraction_estimate: ratios.iter().copied().fold(0.0, f64::max),
        converged: false,
        ratios,
    })))
}

/// Solves `tau u = F(u)` on `[lo, hi]` by iterating `u <- tau^{-1} F(u)`
/// from `u = 0` until `|u_new - u|_{2,rho} <= fp_tol`.
///
/// Entries of `u` outside the window are held at zero.
pub fn solve_contraction(
    f: &StencilMap,
    w: Weight,
    lo: i64,
    hi: i64,
    fp_tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    if w.exponent() != Exponent::Two {
        return Err(Error::Precondition("contraction solves use the l_2 weight".into()));
    }
    if lo > hi {
        return Err(Error::InvalidInput(format!("empty window [{lo}, {hi}]")));
    }
    if !(fp_tol > 0.0) {
        return Err(Error::InvalidInput(format!("fp_tol must be positive, got {fp_tol}")));
    }
    let rho = w.rho();
    let lip = f.lip_bound(rho);
    if !(lip < rho) {
        return Err(Error::NotContractive { lip, bound: rho });
    }
    fixed_point_iterate(
        WindowedSequence::zeros(f.dim()),
        // (tau^{-1} v)_n = v_{n-1}
        |u| Ok(f.apply_on_window(u, lo - 1, hi - 1)?.shift(-1)),
        |d| l2_norm(d, rho),
        |dn, _, _| dn <= fp_tol,
        max_iter,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IvpMethod {
    Recursion,
    VariationOfConstants,
    Impulse,
}

impl IvpMethod {
    pub const ALL: [IvpMethod; 3] = [
        IvpMethod::Recursion,
        IvpMethod::VariationOfConstants,
        IvpMethod::Impulse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IvpMethod::Recursion => "recursion",
            IvpMethod::VariationOfConstants => "voc",
            IvpMethod::Impulse => "impulse",
        }
    }
}

impl std::str::FromStr for IvpMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "recursion" => Ok(Self::Recursion),
            "voc" | "variation_of_constants" => Ok(Self::VariationOfConstants),
            "impulse" => Ok(Self::Impulse),
            other => Err(Error::InvalidInput(format!("unknown ivp method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ImpulseSettings {
    /// Weight for the solution operator; chosen automatically when `None`.
    pub rho: Option<f64>,
    pub fp_tol: f64,
    pub max_iter: usize,
}

impl Default for ImpulseSettings {
    fn default() -> Self {
        Self {
            rho: None,
            fp_tol: crate::FP_TOL,
            max_iter: crate::MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ImpulseSolve {
    pub rho: f64,
    /// Sampled `sup_{|z| = rho} |(z - A)^{-1}|`.
    pub m_rho: f64,
    /// `|F|_Lip` on `l_{2,rho}`.
    pub lip: f64,
    pub report: SolveReport,
}

fn check_ivp(a: &BoundedOperator, f: &StencilMap, x: &CVector) -> Result<()> {
    let d = a.dim();
    if f.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: f.dim(),
        });
    }
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: x.len(),
        });
    }
    if !f.is_causal() {
        return Err(Error::CausalityRequired {
            lookahead: f.lookahead(),
        });
    }
    if let Some(g) = f.forcing() {
        if !g.support_subset_geq(0, 0.0) {
            return Err(Error::Precondition("forcing must vanish at negative indices".into()));
        }
    }
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("initial value"));
    }
    Ok(())
}

/// Solution of `u_{n+1} = A u_n + F(u)_n`, `u_0 = x`, on `[0, horizon]`.
pub fn solve_ivp(
    a: &BoundedOperator,
    f: &StencilMap,
    x: &CVector,
    horizon: usize,
    method: IvpMethod,
) -> Result<WindowedSequence> {
    match method {
        IvpMethod::Recursion => ivp_recursion(a, f, x, horizon),
        IvpMethod::VariationOfConstants => ivp_variation_of_constants(a, f, x, horizon),
        IvpMethod::Impulse => Ok(solve_ivp_impulse(a, f, x, horizon, &ImpulseSettings::default())?
            .report
            .solution),
    }
}

fn ivp_recursion(a: &BoundedOperator, f: &StencilMap, x: &CVector, horizon: usize) -> Result<WindowedSequence> {
    check_ivp(a, f, x)?;
    let d = a.dim();
    let mut values: Vec<CVector> = Vec::with_capacity(horizon + 1);
    values.push(x.clone());
    for n in 0..horizon {
        let fn_ = f.eval_at(n as i64, |k| history(&values, k, d));
        let next = a.entries() * &values[n] + fn_;
        values.push(next);
    }
    WindowedSequence::new(d, 0, values)
}

fn history(values: &[CVector], k: i64, d: usize) -> CVector {
    if k < 0 {
        return CVector::zeros(d);
    }
    values.get(k as usize).cloned().unwrap_or_else(|| CVector::zeros(d))
}

/// `u_n = A^n x + sum_{k<n} A^{n-1-k} F(u)_k`, filling `F(u)_k` forward.
fn ivp_variation_of_constants(
    a: &BoundedOperator,
    f: &StencilMap,
    x: &CVector,
    horizon: usize,
) -> Result<WindowedSequence> {
    check_ivp(a, f, x)?;
    let d = a.dim();
    let mut powers = Vec::with_capacity(horizon + 1);
    powers.push(crate::CMatrix::identity(d, d));
    for j in 0..horizon {
        powers.push(a.entries() * &powers[j]);
    }
    let mut values: Vec<CVector> = Vec::with_capacity(horizon + 1);
    let mut forcing: Vec<CVector> = Vec::with_capacity(horizon);
    for n in 0..=horizon {
        let mut un = &powers[n] * x;
        for (k, fk) in forcing.iter().enumerate() {
            un += &powers[n - 1 - k] * fk;
        }
        values.push(un);
        if n < horizon {
            forcing.push(f.eval_at(n as i64, |k| history(&values, k, d)));
        }
    }
    WindowedSequence::new(d, 0, values)
}

/// Smallest `rho = r(A) + delta`, `delta in {0.5, 1, 2, ..., 64}`, with
/// `|F|_Lip(rho) M_rho < 1`. Returns `(rho, M_rho)`.
pub fn choose_impulse_rho(a: &BoundedOperator, f: &StencilMap) -> Result<(f64, f64)> {
    let r = spectral_radius(a)?;
    let mut best = None;
    for j in -1..=6 {
        let rho = r + 2f64.powi(j);
        let m = circle_sup_resolvent(a, rho, M_RHO_SAMPLES)?;
        let lip = f.lip_bound(rho);
        if lip * m < 1.0 {
            return Ok((rho, m));
        }
        if best.is_none_or(|(_, q): (f64, f64)| lip * m < q) {
            best = Some((lip, lip * m));
        }
    }
    let (lip, q) = best.unwrap();
    Err(Error::NotContractive { lip, bound: lip / q })
}

/// Impulse route: fixed point of `u -> (tau - A)^{-1}(F(u) + delta_{-1} x)`
/// with the causal resolvent at `rho > r(A)`, evaluated on `[0, horizon]`.
///
/// Iteration stops once the `l_{2,rho}` increment is below `fp_tol` and every
/// entry moved by at most `fp_tol max(1, |u_n|)`.
pub fn solve_ivp_impulse(
    a: &BoundedOperator,
    f: &StencilMap,
    x: &CVector,
    horizon: usize,
    settings: &ImpulseSettings,
) -> Result<ImpulseSolve> {
    check_ivp(a, f, x)?;
    let (rho, m_rho) = match settings.rho {
        None => choose_impulse_rho(a, f)?,
        Some(rho) => {
            let r = spectral_radius(a)?;
            if !(rho > r + GAP_TOL) {
                return Err(Error::NotCausalRegime {
                    rho,
                    spectral_radius: r,
                });
            }
            let m = circle_sup_resolvent(a, rho, M_RHO_SAMPLES)?;
            let lip = f.lip_bound(rho);
            if !(lip * m < 1.0) {
                return Err(Error::NotContractive { lip, bound: 1.0 / m });
            }
            (rho, m)
        }
    };
    let plan = ResolventPlan::causal(a.clone(), rho)?;
    let hi = horizon as i64;
    let kick = WindowedSequence::impulse(-1, x.clone());
    let fp_tol = settings.fp_tol;
    let report = fixed_point_iterate(
        WindowedSequence::zeros(a.dim()),
        |u| {
            let g = f.apply_on_window(u, 0, hi)?.add(&kick)?;
            plan.apply_on_window(&g, 0, hi)
        },
        |d| l2_norm(d, rho),
        |dn, delta, next| {
            dn <= fp_tol
                && delta
                    .values()
                    .iter()
                    .enumerate()
                    .all(|(i, dv)| dv.norm() <= fp_tol * next.get(delta.lo() + i as i64).norm().max(1.0))
        },
        settings.max_iter,
    )?;
    Ok(ImpulseSolve {
        rho,
        m_rho,
        lip: f.lip_bound(rho),
        report,
    })
}

/// `max_{lo <= n <= hi} |u_n - v_n| / max(1, |u_n|, |v_n|)`
pub fn max_relative_deviation(u: &WindowedSequence, v: &WindowedSequence, lo: i64, hi: i64) -> f64 {
    (lo..=hi)
        .map(|n| {
            let (a, b) = (u.get(n), v.get(n));
            (&a - &b).norm() / a.norm().max(b.norm()).max(1.0)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityVerdict {
    ExponentiallyStable,
    NotStable,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct StabilityProbe {
    /// `|u|_{2,rho*}` of the impulse solution (stable case).
    pub weighted_norm: Option<f64>,
    /// `max_{n <= horizon} |A^n x| rho*^{-n} / |x|` (stable case).
    pub growth_constant: Option<f64>,
    /// First `n` with `|A^n x| >= 10 |x|` (unstable case).
    pub escape_index: Option<usize>,
    /// `(ln |A^H x| - ln |x|) / H`.
    pub log_growth_rate: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct StabilityReport {
    pub verdict: StabilityVerdict,
    pub spectral_radius: f64,
    pub rho_star: Option<f64>,
    pub probes: Vec<StabilityProbe>,
    /// Every probe agrees with the verdict.
    pub consistent: bool,
}

/// `(ln |A^n x|)_{n <= horizon}` by normalised power steps, free of overflow.
fn log_orbit(a: &BoundedOperator, x: &CVector, horizon: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(horizon + 1);
    let mut v = x.clone();
    let mut log_scale = 0.0;
    for n in 0..=horizon {
        let nv = v.norm();
        out.push(if nv == 0.0 { f64::NEG_INFINITY } else { log_scale + nv.ln() });
        if nv == 0.0 {
            out.resize(horizon + 1, f64::NEG_INFINITY);
            break;
        }
        if n < horizon {
            v /= crate::c64(nv, 0.0);
            log_scale += nv.ln();
            v = a.entries() * v;
        }
    }
    out
}

/// Classifies `u_{n+1} = A u_n` by `r(A) < 1` and checks the verdict on
/// `probe_count` random initial values over `[0, horizon]`.
///
/// Stable: the impulse solution at `rho* = (1 + r)/2` has finite
/// `l_{2,rho*}` norm, agrees with `A^n x`, and `|A^n x| rho*^{-n}` is no larger
/// on the second half of the horizon than on the first. Not stable: the
/// orbit leaves the ball of radius `10 |x|` within the horizon.
pub fn stability_classify(
    a: &BoundedOperator,
    horizon: usize,
    probe_count: usize,
    seed: u64,
) -> Result<StabilityReport> {
    if horizon < 2 {
        return Err(Error::InvalidInput("stability horizon must be >= 2".into()));
    }
    let r = spectral_radius(a)?;
    if (r - 1.0).abs() <= GAP_TOL {
        return Err(Error::Indeterminate { modulus: r });
    }
    let mut rng = seeded(seed);
    let stable = r < 1.0;
    let rho_star = stable.then(|| (1.0 + r) / 2.0);
    let plan = match rho_star {
        Some(rs) => Some(ResolventPlan::causal(a.clone(), rs)?),
        None => None,
    };
    let mut probes = Vec::with_capacity(probe_count);
    for _ in 0..probe_count {
        let x = random_vector(&mut rng, a.dim());
        let lx = x.norm().ln();
        let logs = log_orbit(a, &x, horizon);
        let rate = (logs[horizon] - lx) / horizon as f64;
        let probe = match (&plan, rho_star) {
            (Some(plan), Some(rs)) => {
                let u = apply_resolvent_causal(plan, &WindowedSequence::impulse(-1, x.clone()))?;
                let norm = l2_norm(&u, rs)?;
                let direct = ivp_recursion(a, &StencilMap::zero(a.dim()), &x, horizon)?;
                let agrees = max_relative_deviation(&u, &direct, 0, horizon as i64) <= 1e-8
                    && u.support_subset_geq(0, SUPP_TOL);
                let env: Vec<f64> = logs
                    .iter()
                    .enumerate()
                    .map(|(n, l)| l - lx - n as f64 * rs.ln())
                    .collect();
                let half = horizon / 2;
                let early = env[..=half].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let late = env[half..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let m = early.max(late).exp();
                StabilityProbe {
                    weighted_norm: Some(norm),
                    growth_constant: Some(m),
                    escape_index: None,
                    log_growth_rate: rate,
                    consistent: norm.is_finite() && agrees && late <= early + 1e-12,
                }
            }
            _ => {
                let escape = logs.iter().position(|&l| l - lx >= 10f64.ln());
                StabilityProbe {
                    weighted_norm: None,
                    growth_constant: None,
                    escape_index: escape,
                    log_growth_rate: rate,
                    consistent: escape.is_some(),
                }
            }
        };
        probes.push(probe);
    }
    Ok(StabilityReport {
        verdict: if stable {
            StabilityVerdict::ExponentiallyStable
        } else {
            StabilityVerdict::NotStable
        },
        spectral_radius: r,
        rho_star,
        consistent: probes.iter().all(|p| p.consistent),
        probes,
    })
}
