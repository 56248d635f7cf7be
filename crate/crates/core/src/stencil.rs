//! Closed registry of nonlinearities `F(u)_n = f(u_{n-m}, ..., u_{n+r}) + g_n`.
//!
//! Every kernel vanishes at zero and ships an analytic Lipschitz bound on
//! `l_{2,rho}`; affine parts enter only through the optional forcing `g`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::operator::op_norm;
use crate::random::{random_sequence, seeded};
use crate::sequence::{l2_norm, Exponent, Weight, WindowedSequence};
use crate::{c64, CMatrix, CVector, Complex64};

/// Componentwise scalar function used inside implicit Euler stencils.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ScalarFn {
    /// `z -> lambda z`
    Linear { lambda: f64 },
    /// `z -> coef (tanh(Re z) + i tanh(Im z))`
    Tanh { coef: f64 },
}

impl ScalarFn {
    fn eval(&self, z: Complex64) -> Complex64 {
        match *self {
            ScalarFn::Linear { lambda } => z * lambda,
            ScalarFn::Tanh { coef } => saturate(z) * coef,
        }
    }

    fn lipschitz(&self) -> f64 {
        match *self {
            ScalarFn::Linear { lambda } => lambda.abs(),
            ScalarFn::Tanh { coef } => coef.abs(),
        }
    }

    fn is_odd(&self) -> bool {
        true
    }
}

/// `tanh(Re z) + i tanh(Im z)`; 1-Lipschitz and odd.
fn saturate(z: Complex64) -> Complex64 {
    c64(z.re.tanh(), z.im.tanh())
}

/// Radial projection onto the closed disk of radius `r`.
fn clip(z: Complex64, r: f64) -> Complex64 {
    let m = z.norm();
    if m <= r {
        z
    } else {
        z * (r / m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Zero,
    /// `F_n = B u_{n-lag}`
    Linear { b: CMatrix, lag: usize },
    /// `F_n = eps C sat(u_n)` with `sat` the componentwise saturation.
    Saturation { eps: f64, coupling: CMatrix },
    /// `F_n = p(clip(u_n))` componentwise, `p(z) = sum_j coeffs[j] z^j`,
    /// `coeffs[0] = 0`.
    PolynomialClipped { coeffs: Vec<f64>, clip_radius: f64 },
    /// `F_n = u_n + h f(u_{n+1})` componentwise.
    ImplicitEuler { h: f64, f: ScalarFn },
}

impl Kernel {
    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Zero => "zero",
            Kernel::Linear { .. } => "linear",
            Kernel::Saturation { .. } => "saturation",
            Kernel::PolynomialClipped { .. } => "polynomial_clipped",
            Kernel::ImplicitEuler { .. } => "implicit_euler",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StencilMap {
    dim: usize,
    kernel: Kernel,
    forcing: Option<WindowedSequence>,
}

fn check_square(m: &CMatrix, dim: usize) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: m.nrows().max(m.ncols()),
        });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("stencil matrix"));
    }
    Ok(())
}

fn check_finite_param(x: f64, what: &'static str) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

impl StencilMap {
    pub fn new(dim: usize, kernel: Kernel) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("stencil dim must be >= 1".into()));
        }
        match &kernel {
            Kernel::Zero => {}
            Kernel::Linear { b, .. } => check_square(b, dim)?,
            Kernel::Saturation { eps, coupling } => {
                check_finite_param(*eps, "saturation eps")?;
                check_square(coupling, dim)?;
            }
            Kernel::PolynomialClipped { coeffs, clip_radius } => {
                if coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::NonFinite("polynomial coefficient"));
                }
                if coeffs.first().is_some_and(|&c| c != 0.0) {
                    return Err(Error::InvalidInput(
                        "polynomial constant term must be 0; use forcing for affine parts".into(),
                    ));
                }
                if !(*clip_radius > 0.0) || !clip_radius.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "clip radius must be positive, got {clip_radius}"
                    )));
                }
            }
            Kernel::ImplicitEuler { h, f } => {
                check_finite_param(*h, "implicit euler step")?;
                if *h < 0.0 {
                    return Err(Error::InvalidInput(format!("step h must be >= 0, got {h}")));
                }
                match f {
                    ScalarFn::Linear { lambda } => check_finite_param(*lambda, "lambda")?,
                    ScalarFn::Tanh { coef } => check_finite_param(*coef, "tanh coefficient")?,
                }
            }
        }
        Ok(Self {
            dim,
            kernel,
            forcing: None,
        })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            kernel: Kernel::Zero,
            forcing: None,
        }
    }

    pub fn linear(b: CMatrix) -> Result<Self> {
        Self::new(b.nrows(), Kernel::Linear { b, lag: 0 })
    }

    /// Saturation with all-ones coupling, so every component feeds every other.
    pub fn saturation(dim: usize, eps: f64) -> Result<Self> {
        Self::new(
            dim,
            Kernel::Saturation {
                eps,
                coupling: CMatrix::from_element(dim, dim, c64(1.0, 0.0)),
            },
        )
    }

    /// Adds the forcing `g` to `F`.
    pub fn with_forcing(mut self, g: WindowedSequence) -> Result<Self> {
        if g.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: g.dim(),
            });
        }
        self.forcing = if g.is_zero() { None } else { Some(g) };
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn forcing(&self) -> Option<&WindowedSequence> {
        self.forcing.as_ref()
    }

    /// Number of past indices the stencil reads.
    pub fn memory(&self) -> usize {
        match &self.kernel {
            Kernel::Linear { lag, .. } => *lag,
            _ => 0,
        }
    }

    /// Number of future indices the stencil reads.
    pub fn lookahead(&self) -> usize {
        match &self.kernel {
            Kernel::ImplicitEuler { .. } => 1,
            _ => 0,
        }
    }

    pub fn is_causal(&self) -> bool {
        self.lookahead() == 0
    }

    /// `F(-u) = -F(u)` for the kernel part.
    pub fn is_odd(&self) -> bool {
        match &self.kernel {
            Kernel::PolynomialClipped { coeffs, .. } => {
                coeffs.iter().step_by(2).all(|&c| c == 0.0)
            }
            Kernel::ImplicitEuler { f, .. } => f.is_odd(),
            _ => true,
        }
    }

    /// Analytic Lipschitz constant of `F` on `l_{2,rho}`.
    pub fn lip_bound(&self, rho: f64) -> f64 {
        match &self.kernel {
            Kernel::Zero => 0.0,
            Kernel::Linear { b, lag } => op_norm(b) * rho.powi(-(*lag as i32)),
            Kernel::Saturation { eps, coupling } => eps.abs() * op_norm(coupling),
            Kernel::PolynomialClipped { coeffs, clip_radius } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, c)| j as f64 * c.abs() * clip_radius.powi(j as i32 - 1))
                .sum(),
            Kernel::ImplicitEuler { h, f } => 1.0 + h * f.lipschitz() * rho,
        }
    }

    /// Kernel value at index `n`, reading neighbours through `get`.
    pub fn kernel_at(&self, n: i64, get: impl Fn(i64) -> CVector) -> CVector {
        match &self.kernel {
            Kernel::Zero => CVector::zeros(self.dim),
            Kernel::Linear { b, lag } => b * get(n - *lag as i64),
            Kernel::Saturation { eps, coupling } => {
                coupling * get(n).map(saturate) * c64(*eps, 0.0)
            }
            Kernel::PolynomialClipped { coeffs, clip_radius } => get(n).map(|z| {
                let c = clip(z, *clip_radius);
                // Horner
                coeffs.iter().rev().fold(c64(0.0, 0.0), |acc, &a| acc * c + a)
            }),
            Kernel::ImplicitEuler { h, f } => {
                let next = get(n + 1).map(|z| f.eval(z) * *h);
                get(n) + next
            }
        }
    }

    /// `F(u)_n` including forcing.
    pub fn eval_at(&self, n: i64, get: impl Fn(i64) -> CVector) -> CVector {
        let mut out = self.kernel_at(n, get);
        if let Some(g) = &self.forcing {
            if let Some(gn) = g.entry(n) {
                out += gn;
            }
        }
        out
    }

    fn check_input(&self, u: &WindowedSequence) -> Result<()> {
        if u.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: u.dim(),
            });
        }
        Ok(())
    }

    /// `F(u)` on its exact support window.
    pub fn apply(&self, u: &WindowedSequence) -> Result<WindowedSequence> {
        self.check_input(u)?;
        let kernel_part = if u.is_zero() {
            WindowedSequence::zeros(self.dim)
        } else {
            let lo = u.lo() - self.lookahead() as i64;
            let hi = u.hi() + self.memory() as i64;
            WindowedSequence::from_fn(self.dim, lo, hi, |n| self.kernel_at(n, |k| u.get(k)))
        };
        match &self.forcing {
            Some(g) => kernel_part.add(g),
            None => Ok(kernel_part),
        }
    }

    /// `F(u)` restricted to `[lo, hi]`.
    pub fn apply_on_window(&self, u: &WindowedSequence, lo: i64, hi: i64) -> Result<WindowedSequence> {
        self.check_input(u)?;
        Ok(WindowedSequence::from_fn(self.dim, lo, hi, |n| self.eval_at(n, |k| u.get(k))))
    }
}

/// Largest observed `|F(u) - F(v)| / |u - v|` in `l_{p,rho}` over random
/// pairs on `[-8, 8]`; a lower bound for the Lipschitz constant.
pub fn lipschitz_probe(f: &StencilMap, w: Weight, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::Precondition("lipschitz probe needs at least one trial".into()));
    }
    let mut rng = seeded(seed);
    let d = f.dim();
    let mut best: f64 = 0.0;
    for t in 0..trials {
        // amplitudes from 1e-4 to 10 so saturating kernels are probed near
        // their maximal slope as well as in their flat region
        let amp = 10f64.powf(rng.gen_range(-4.0..1.0));
        let u = random_sequence(&mut rng, d, -8, 8, 1.0 + amp * (t % 3) as f64);
        let du = if t % 2 == 0 {
            random_sequence(&mut rng, d, -8, 8, amp)
        } else {
            // single-site perturbation
            let k = rng.gen_range(-8..=8);
            WindowedSequence::impulse(k, crate::random::random_vector(&mut rng, d) * c64(amp, 0.0))
        };
        let v = u.add(&du)?;
        let num = crate::sequence::weighted_norm(&f.apply(&u)?.sub(&f.apply(&v)?)?, w)?;
        let den = crate::sequence::weighted_norm(&du, w)?;
        if den > 0.0 {
            best = best.max(num / den);
        }
    }
    Ok(best)
}

/// Convenience wrapper on `l_{2,rho}`.
pub fn lipschitz_probe_l2(f: &StencilMap, rho: f64, trials: usize, seed: u64) -> Result<f64> {
    lipschitz_probe(f, Weight::new(rho, Exponent::Two)?, trials, seed)
}

/// `|F(u)|_{2,rho}`
pub fn image_norm(f: &StencilMap, u: &WindowedSequence, rho: f64) -> Result<f64> {
    l2_norm(&f.apply(u)?, rho)
}
