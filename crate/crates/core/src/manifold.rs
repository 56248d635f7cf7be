//! Lyapunov-Perron operator at `rho = 1`, its fixed point `T(xi)` and the
//! stable-manifold graph `w^s(xi) = Q T(xi)_0`.
//!
//! Orbits live on the window `[0, W]`; `W` is chosen so that the linear decay
//! rate on `range(P)`, relaxed halfway towards 1, has fallen below
//! [`SERIES_TOL`] by `W`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operator::{circle_sup_resolvent, is_hyperbolic, spectral_radius, BoundedOperator};
use crate::random::{random_sequence, seeded};
use crate::resolvent::ResolventPlan;
use crate::sequence::{l2_norm, WindowedSequence};
use crate::solver::{
    choose_impulse_rho, fixed_point_iterate, max_relative_deviation, solve_ivp_impulse, ImpulseSettings,
};
use crate::stencil::StencilMap;
use crate::{CMatrix, CVector, GAP_TOL, SERIES_TOL, SUPP_TOL};

const M_SAMPLES: usize = 1024;
const MAX_WINDOW: usize = 100_000;
/// Relative tolerance for `xi in range(P)`.
const RANGE_TOL: f64 = 1e-8;
/// Target agreement between the solution-operator orbit and `T(xi)`.
const GRAPH_AGREEMENT: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct ManifoldSettings {
    /// Weight of the outer solution operator; chosen automatically when `None`.
    pub rho: Option<f64>,
    pub fp_tol: f64,
    pub max_iter: usize,
    pub quad_points: usize,
    /// Orbit window `[0, W]`; chosen automatically when `None`.
    pub window: Option<usize>,
}

impl Default for ManifoldSettings {
    fn default() -> Self {
        Self {
            rho: None,
            fp_tol: 1e-13,
            max_iter: crate::MAX_ITER,
            quad_points: crate::resolvent::DEFAULT_QUAD_POINTS,
            window: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ManifoldProblem {
    plan: ResolventPlan,
    f: StencilMap,
    rho: f64,
    m1: f64,
    m_rho: f64,
    window: usize,
    fp_tol: f64,
    max_iter: usize,
    stable_power: CMatrix,
    unstable_inverse: CMatrix,
}

impl ManifoldProblem {
    /// Validates hyperbolicity, causality, `F(0) = 0` and both smallness
    /// conditions `|F|_Lip(l_2) M_1 < 1`, `|F|_Lip(l_{2,rho}) M_rho < 1`.
    pub fn new(a: BoundedOperator, f: StencilMap, settings: &ManifoldSettings) -> Result<Self> {
        if f.dim() != a.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                actual: f.dim(),
            });
        }
        if is_hyperbolic(&a).is_err() {
            return Err(Error::NotHyperbolic);
        }
        if !f.is_causal() {
            return Err(Error::CausalityRequired {
                lookahead: f.lookahead(),
            });
        }
        if f.forcing().is_some() {
            return Err(Error::Precondition("manifold nonlinearity must satisfy F(0) = 0".into()));
        }
        if !(settings.fp_tol > 0.0) {
            return Err(Error::InvalidInput(format!("fp_tol must be positive, got {}", settings.fp_tol)));
        }
        let r = spectral_radius(&a)?;
        let m1 = circle_sup_resolvent(&a, 1.0, M_SAMPLES)?;
        let lip1 = f.lip_bound(1.0);
        if !(lip1 * m1 < 1.0) {
            return Err(Error::NotContractive {
                lip: lip1,
                bound: 1.0 / m1,
            });
        }
        let (rho, m_rho) = match settings.rho {
            None => choose_impulse_rho(&a, &f)?,
            Some(rho) => {
                if !(rho > r + GAP_TOL) {
                    return Err(Error::NotCausalRegime {
                        rho,
                        spectral_radius: r,
                    });
                }
                let m = circle_sup_resolvent(&a, rho, M_SAMPLES)?;
                let lip = f.lip_bound(rho);
                if !(lip * m < 1.0) {
                    return Err(Error::NotContractive { lip, bound: 1.0 / m });
                }
                (rho, m)
            }
        };
        let split = crate::operator::riesz_split(&a, 1.0, settings.quad_points)?;
        let stable_power = split.stable_part(&a);
        let unstable_inverse = split.unstable_inverse(&a)?;
        let r_inside = split.r_inside;
        let plan = ResolventPlan::split(a, 1.0, split)?;
        let window = match settings.window {
            Some(w) if w >= 1 => w,
            Some(_) => return Err(Error::InvalidInput("manifold window must be >= 1".into())),
            None => {
                let q = r_inside + 0.5 * (1.0 - r_inside);
                let w0 = (SERIES_TOL.ln() / q.ln()).ceil() as usize;
                w0.max(plan.forward_tail_cut())
                    .max(plan.backward_tail_cut())
                    .clamp(16, MAX_WINDOW)
            }
        };
        Ok(Self {
            plan,
            f,
            rho,
            m1,
            m_rho,
            window,
            fp_tol: settings.fp_tol,
            max_iter: settings.max_iter,
            stable_power,
            unstable_inverse,
        })
    }

    pub fn op(&self) -> &BoundedOperator {
        self.plan.op()
    }

    pub fn nonlinearity(&self) -> &StencilMap {
        &self.f
    }

    pub fn proj_stable(&self) -> &CMatrix {
        &self.plan.spectral_split().expect("split plan").proj_stable
    }

    pub fn proj_unstable(&self) -> &CMatrix {
        &self.plan.spectral_split().expect("split plan").proj_unstable
    }

    pub fn rank_stable(&self) -> usize {
        self.plan.spectral_split().expect("split plan").rank_stable
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `sup_{|z| = 1} |(z - A)^{-1}|`
    pub fn m1(&self) -> f64 {
        self.m1
    }

    pub fn m_rho(&self) -> f64 {
        self.m_rho
    }

    /// `M_1 |F|_Lip(l_2)`: the Lyapunov-Perron contraction factor.
    pub fn contraction_factor(&self) -> f64 {
        self.m1 * self.f.lip_bound(1.0)
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn fp_tol(&self) -> f64 {
        self.fp_tol
    }

    /// A unit vector in `range(Q)`, or `None` when `Q = 0`.
    pub fn unstable_direction(&self) -> Option<CVector> {
        let basis = self.plan.spectral_split()?.unstable_basis();
        (basis.ncols() > 0).then(|| basis.column(0).normalize())
    }

    /// `|P xi - xi| <= RANGE_TOL max(1, |xi|)`
    pub fn check_stable_vector(&self, xi: &CVector) -> Result<()> {
        if xi.len() != self.op().dim() {
            return Err(Error::DimensionMismatch {
                expected: self.op().dim(),
                actual: xi.len(),
            });
        }
        if (self.proj_stable() * xi - xi).norm() > RANGE_TOL * xi.norm().max(1.0) {
            return Err(Error::RangeViolation("xi must lie in range(P)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ManifoldPoint {
    #[serde(serialize_with = "crate::io::ser_vector")]
    pub xi: CVector,
    /// `Q T(xi)_0`
    #[serde(serialize_with = "crate::io::ser_vector")]
    pub eta: CVector,
    /// `T(xi)` on `[0, W]`.
    pub orbit: WindowedSequence,
    /// `(|u_m| / |u_0|)^{1/m}` with `m = W/2`; 0 for the zero orbit.
    pub decay_rate_estimate: f64,
    pub iterations: usize,
    pub residual: f64,
    pub ratios: Vec<f64>,
    pub contraction_estimate: f64,
}

/// `chi_{[0, W]} (tau - A)^{-1} (F(u) + delta_{-1} xi)` with the split
/// resolvent at `rho = 1`.
pub fn lp_apply(prob: &ManifoldProblem, xi: &CVector, u: &WindowedSequence) -> Result<WindowedSequence> {
    prob.check_stable_vector(xi)?;
    if u.dim() != xi.len() {
        return Err(Error::DimensionMismatch {
            expected: xi.len(),
            actual: u.dim(),
        });
    }
    lp_step(prob, xi, u)
}

fn lp_step(prob: &ManifoldProblem, xi: &CVector, u: &WindowedSequence) -> Result<WindowedSequence> {
    let w = prob.window as i64;
    let g = prob
        .f
        .apply_on_window(u, 0, w)?
        .add(&WindowedSequence::impulse(-1, xi.clone()))?;
    prob.plan.apply_on_window(&g, 0, w)
}

/// Iterates [`lp_apply`] from the linear profile `A^n xi` until the `l_2`
/// increment is at most `fp_tol`.
pub fn lp_fixed_point(prob: &ManifoldProblem, xi: &CVector) -> Result<ManifoldPoint> {
    prob.check_stable_vector(xi)?;
    let d = xi.len();
    let w = prob.window as i64;
    let linear = prob
        .plan
        .apply_on_window(&WindowedSequence::impulse(-1, xi.clone()), 0, w)?;
    let report = fixed_point_iterate(
        linear,
        |u| lp_step(prob, xi, u),
        |s| l2_norm(s, 1.0),
        |dn, _, _| dn <= prob.fp_tol,
        prob.max_iter,
    )
    .map_err(|e| match e {
        Error::NoConvergence(rep) => Error::LpNoConvergence {
            iterations: rep.iterations,
            residual: rep.final_residual,
        },
        other => other,
    })?;
    let orbit = report.solution;
    let u0 = orbit.get(0);
    let eta = prob.proj_unstable() * &u0;
    let m = (prob.window / 2).max(1) as i64;
    let decay = if u0.norm() == 0.0 {
        0.0
    } else {
        (orbit.get(m).norm() / u0.norm()).powf(1.0 / m as f64)
    };
    debug_assert_eq!(orbit.dim(), d);
    Ok(ManifoldPoint {
        xi: xi.clone(),
        eta,
        orbit,
        decay_rate_estimate: decay,
        iterations: report.iterations,
        residual: report.final_residual,
        contraction_estimate: report.contraction_estimate,
        ratios: report.ratios,
    })
}

/// Right-hand sides of the fixed-point characterization on `[0, W]`:
///
/// - `(PAP)^n xi + sum_{k=0}^{n-1} (PAP)^{n-1-k} P F(u)_k`,
/// - `-sum_{k=n}^{W} (QAQ)^{n-1-k} Q F(u)_k`,
///
/// evaluated as explicit power sums.
pub fn characterization_sums(
    prob: &ManifoldProblem,
    xi: &CVector,
    u: &WindowedSequence,
) -> Result<(WindowedSequence, WindowedSequence)> {
    prob.check_stable_vector(xi)?;
    let w = prob.window;
    let d = xi.len();
    let fu = prob.f.apply_on_window(u, 0, w as i64)?;
    let pf: Vec<CVector> = (0..=w).map(|k| prob.proj_stable() * fu.get(k as i64)).collect();
    let qf: Vec<CVector> = (0..=w).map(|k| prob.proj_unstable() * fu.get(k as i64)).collect();
    let mut pap = Vec::with_capacity(w + 1);
    let mut cinv = Vec::with_capacity(w + 2);
    pap.push(CMatrix::identity(d, d));
    cinv.push(CMatrix::identity(d, d));
    for j in 0..=w {
        pap.push(&prob.stable_power * &pap[j]);
        cinv.push(&prob.unstable_inverse * &cinv[j]);
    }
    let p_side = WindowedSequence::from_fn(d, 0, w as i64, |n| {
        let n = n as usize;
        let mut s = &pap[n] * xi;
        for (k, pfk) in pf.iter().enumerate().take(n) {
            s += &pap[n - 1 - k] * pfk;
        }
        s
    });
    let q_side = WindowedSequence::from_fn(d, 0, w as i64, |n| {
        let n = n as usize;
        let mut s = CVector::zeros(d);
        for (k, qfk) in qf.iter().enumerate().skip(n) {
            s -= &cinv[k + 1 - n] * qfk;
        }
        s
    });
    Ok((p_side, q_side))
}

/// `(|P u - p_side|_{l_2}, |Q u - q_side|_{l_2})`
pub fn characterization_defects(prob: &ManifoldProblem, xi: &CVector, u: &WindowedSequence) -> Result<(f64, f64)> {
    let (ps, qs) = characterization_sums(prob, xi, u)?;
    let pu = u.map_matrix(prob.proj_stable())?;
    let qu = u.map_matrix(prob.proj_unstable())?;
    Ok((l2_norm(&pu.sub(&ps)?, 1.0)?, l2_norm(&qu.sub(&qs)?, 1.0)?))
}

/// `(eta, point)` with `eta = w^s(xi)`.
pub fn stable_manifold_point(prob: &ManifoldProblem, xi: &CVector) -> Result<(CVector, ManifoldPoint)> {
    let point = lp_fixed_point(prob, xi)?;
    Ok((point.eta.clone(), point))
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct GraphEvidence {
    /// Indices compared between `S_rho(xi + eta)` and `T(xi)`.
    pub trust_horizon: usize,
    /// Per-index relative deviation on `[0, trust_horizon]`.
    pub max_deviation: f64,
    /// `|T(xi)|_{l_2[W/2, W]} / |T(xi)|_{l_2}`; 0 for the zero orbit.
    pub tail_ratio: f64,
    pub support_ok: bool,
}

/// Compares the solution-operator orbit of `xi + eta` with `T(xi)`.
///
/// The error in `eta` (of order `fp_tol`) is amplified by up to `r(A)^n` along
/// the forward orbit, so the comparison stops where `fp_tol r(A)^n` reaches
/// the agreement level `1e-8`.
pub fn graph_evidence(prob: &ManifoldProblem, point: &ManifoldPoint) -> Result<GraphEvidence> {
    let a = prob.op();
    let r = spectral_radius(a)?;
    let budget = GRAPH_AGREEMENT / prob.fp_tol.max(f64::EPSILON);
    let trust = if r > 1.0 && budget > 1.0 {
        (budget.ln() / r.ln()).floor() as usize
    } else if r > 1.0 {
        1
    } else {
        prob.window
    }
    .clamp(1, prob.window);
    let x = &point.xi + &point.eta;
    let settings = ImpulseSettings {
        rho: Some(prob.rho),
        ..ImpulseSettings::default()
    };
    let s = solve_ivp_impulse(a, &prob.f, &x, trust, &settings)?.report.solution;
    let total = l2_norm(&point.orbit, 1.0)?;
    let w = prob.window as i64;
    let tail = l2_norm(&point.orbit.truncate(w / 2, w), 1.0)?;
    Ok(GraphEvidence {
        trust_horizon: trust,
        max_deviation: max_relative_deviation(&s, &point.orbit, 0, trust as i64),
        tail_ratio: if total == 0.0 { 0.0 } else { tail / total },
        support_ok: point.orbit.support_subset_geq(0, SUPP_TOL) && s.support_subset_geq(0, SUPP_TOL),
    })
}

/// Largest `|L(xi, u) - L(xi, v)| / |u - v|` in `l_2` over random pairs.
pub fn lp_contraction_probe(prob: &ManifoldProblem, xi: &CVector, trials: usize, seed: u64) -> Result<f64> {
    prob.check_stable_vector(xi)?;
    let mut rng = seeded(seed);
    let d = xi.len();
    let w = prob.window as i64;
    let mut best: f64 = 0.0;
    for t in 0..trials {
        let amp = 10f64.powi(-(t as i32 % 4));
        let u = random_sequence(&mut rng, d, 0, w.min(32), 1.0);
        let v = u.add(&random_sequence(&mut rng, d, 0, w.min(32), amp))?;
        let num = l2_norm(&lp_step(prob, xi, &u)?.sub(&lp_step(prob, xi, &v)?)?, 1.0)?;
        let den = l2_norm(&u.sub(&v)?, 1.0)?;
        if den > 0.0 {
            best = best.max(num / den);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ErrorInfo {
    pub code: &'static str,
    pub message: String,
}

impl From<&Error> for ErrorInfo {
    fn from(e: &Error) -> Self {
        Self {
            code: e.code(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepRow {
    #[serde(serialize_with = "crate::io::ser_vector")]
    pub xi: CVector,
    #[serde(serialize_with = "crate::io::ser_opt_vector")]
    pub eta: Option<CVector>,
    pub decay_rate: Option<f64>,
    pub iterations: Option<usize>,
    pub residual: Option<f64>,
    pub error: Option<ErrorInfo>,
}

/// One row per grid point, in grid order; failures are recorded per row.
pub fn manifold_sweep(prob: &ManifoldProblem, grid: &[CVector]) -> Vec<SweepRow> {
    grid.par_iter()
        .map(|xi| match stable_manifold_point(prob, xi) {
            Ok((eta, p)) => SweepRow {
                xi: xi.clone(),
                eta: Some(eta),
                decay_rate: Some(p.decay_rate_estimate),
                iterations: Some(p.iterations),
                residual: Some(p.residual),
                error: None,
            },
            Err(e) => SweepRow {
                xi: xi.clone(),
                eta: None,
                decay_rate: None,
                iterations: None,
                residual: None,
                error: Some(ErrorInfo::from(&e)),
            },
        })
        .collect()
}

/// For `A` with every eigenvalue modulus above 1: `true` iff `x` is zero (to
/// `SUPP_TOL`) or `|A^n x| >= 10 |x|` for some `n <= horizon`.
pub fn spectrum_escape_check(a: &BoundedOperator, x: &CVector, horizon: usize) -> Result<bool> {
    if x.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: x.len(),
        });
    }
    let min_modulus = a.eigenvalues()?.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if !(min_modulus > 1.0 + GAP_TOL) {
        return Err(Error::Precondition(format!(
            "escape check needs every eigenvalue modulus above 1, smallest is {min_modulus}"
        )));
    }
    if x.norm() <= SUPP_TOL {
        return Ok(true);
    }
    Ok(escape_index(a, x, horizon, 10.0).is_some())
}

/// First `n <= horizon` with `|A^n x| >= factor |x|`.
pub fn escape_index(a: &BoundedOperator, x: &CVector, horizon: usize, factor: f64) -> Option<usize> {
    let limit = factor * x.norm();
    let mut v = x.clone();
    for n in 0..=horizon {
        let nv = v.norm();
        if nv >= limit {
            return Some(n);
        }
        if !nv.is_finite() {
            return Some(n);
        }
        v = a.entries() * v;
    }
    None
}
