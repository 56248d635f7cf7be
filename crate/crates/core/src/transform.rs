//! Sampled Z-transform on the circle `S_rho`.
//!
//! For a finitely supported `u`, `Z_rho(u)(z) = sum_k u_k z^{-k}`. Sampling at
//! `z_j = rho e^{2 pi i j / N}` turns this into a length-`N` DFT of the
//! coefficients `u_k rho^{-k}` placed at index `k mod N`, and the normalised
//! circle integral into the mean over the samples. Both are exact for windows
//! of width at most `N`; construction from a sequence insists on `N >= 2 width`
//! so that shifted copies also fit.
//!
//! For sequences in `l_2` but not `l_1` the series need not converge pointwise;
//! that case cannot arise here since every sequence has finite support.

use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::sequence::{l2_norm, WindowedSequence};
use crate::{CVector, Complex64};

/// Samples `f(rho e^{2 pi i j / N})`, `j = 0..N`, of a `C^d`-valued function.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleFunction {
    rho: f64,
    dim: usize,
    samples: Vec<CVector>,
}

impl CircleFunction {
    pub fn new(rho: f64, dim: usize, samples: Vec<CVector>) -> Result<Self> {
        check_rho(rho)?;
        check_sample_count(samples.len())?;
        if dim == 0 {
            return Err(Error::InvalidInput("circle function dim must be >= 1".into()));
        }
        for s in &samples {
            if s.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: s.len(),
                });
            }
            if s.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite("circle sample"));
            }
        }
        Ok(Self { rho, dim, samples })
    }

    /// Samples of `f` at the `n` nodes of `S_rho`.
    pub fn from_fn(rho: f64, n: usize, dim: usize, f: impl Fn(Complex64) -> CVector) -> Result<Self> {
        check_rho(rho)?;
        check_sample_count(n)?;
        let samples = (0..n).map(|j| f(node(rho, j, n))).collect();
        Self::new(rho, dim, samples)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[CVector] {
        &self.samples
    }

    pub fn node(&self, j: usize) -> Complex64 {
        node(self.rho, j, self.samples.len())
    }

    /// Discrete `L_2(S_rho)` norm squared: mean of `|f(z_j)|^2`.
    pub fn norm_squared(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_squared()).sum::<f64>() / self.samples.len() as f64
    }

    /// `(theta_j, |f(z_j)|)` pairs for plotting.
    pub fn magnitude_profile(&self) -> Vec<(f64, f64)> {
        let n = self.samples.len();
        self.samples
            .iter()
            .enumerate()
            .map(|(j, s)| (2.0 * PI * j as f64 / n as f64, s.norm()))
            .collect()
    }

    /// Pointwise `z -> g(z) f(z)` for a matrix-valued `g`.
    pub fn map_nodes(&self, g: impl Fn(Complex64, &CVector) -> Result<CVector>) -> Result<Self> {
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(j, s)| g(self.node(j), s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.rho, self.dim, samples)
    }
}

fn node(rho: f64, j: usize, n: usize) -> Complex64 {
    Complex64::from_polar(rho, 2.0 * PI * j as f64 / n as f64)
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidInput(format!("rho must be positive, got {rho}")));
    }
    Ok(())
}

fn check_sample_count(n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::InvalidInput(format!(
            "sample count must be a power of two, got {n}"
        )));
    }
    Ok(())
}

/// Smallest power of two at least `4 * width`.
pub fn default_samples(width: usize) -> usize {
    (4 * width.max(1)).next_power_of_two()
}

fn wrap(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// `Z_rho(u)` sampled at `n` nodes.
pub fn ztransform(u: &WindowedSequence, rho: f64, n: usize) -> Result<CircleFunction> {
    check_rho(rho)?;
    check_sample_count(n)?;
    let width = u.window_len();
    if n < 2 * width {
        return Err(Error::Aliasing { n_samples: n, width });
    }
    let dim = u.dim();
    let ln_rho = rho.ln();
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut samples = vec![CVector::zeros(dim); n];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..dim {
        buf.fill(Complex64::new(0.0, 0.0));
        for (i, v) in u.values().iter().enumerate() {
            let k = u.lo() + i as i64;
            buf[wrap(k, n)] = v[c] * (-(k as f64) * ln_rho).exp();
        }
        fft.process(&mut buf);
        for (s, b) in samples.iter_mut().zip(&buf) {
            s[c] = *b;
        }
    }
    if samples.iter().flat_map(|s| s.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Overflow { lo: u.lo(), hi: u.hi() });
    }
    Ok(CircleFunction {
        rho,
        dim,
        samples,
    })
}

/// Coefficients `x_k`, `k in [lo, hi]`, of a band-limited circle function:
/// inverse DFT followed by `rho^k` rescaling.
pub fn inverse_ztransform(f: &CircleFunction, lo: i64, hi: i64) -> Result<WindowedSequence> {
    if hi < lo {
        return Err(Error::InvalidInput(format!("empty window [{lo}, {hi}]")));
    }
    let n = f.n_samples();
    let width = (hi - lo + 1) as usize;
    if width > n {
        return Err(Error::WindowTooWide { n_samples: n, width });
    }
    let dim = f.dim();
    let ln_rho = f.rho.ln();
    let ifft = FftPlanner::new().plan_fft_inverse(n);
    let mut values = vec![CVector::zeros(dim); width];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..dim {
        for (b, s) in buf.iter_mut().zip(&f.samples) {
            *b = s[c];
        }
        ifft.process(&mut buf);
        for (i, v) in values.iter_mut().enumerate() {
            let k = lo + i as i64;
            v[c] = buf[wrap(k, n)] * ((k as f64) * ln_rho).exp() / n as f64;
        }
    }
    WindowedSequence::new(dim, lo, values).map_err(|e| match e {
        Error::NonFinite(_) => Error::Overflow { lo, hi },
        other => other,
    })
}

/// Both sides of the Parseval identity: the discrete circle norm of `Z_rho u`
/// and `|u|_{2,rho}^2`.
pub fn parseval_check(u: &WindowedSequence, rho: f64, n: usize) -> Result<(f64, f64)> {
    let lhs = ztransform(u, rho, n)?.norm_squared();
    let rhs = l2_norm(u, rho)?.powi(2);
    Ok((lhs, rhs))
}

/// Relative defect `|Z(tau u) - m Z(u)| / |m Z(u)|` of the intertwining
/// between the shift and multiplication by `z`; zero for `u = 0`.
pub fn multiplication_equiv_check(u: &WindowedSequence, rho: f64, n: usize) -> Result<f64> {
    let zu = ztransform(u, rho, n)?;
    let ztu = ztransform(&u.shift(1), rho, n)?;
    let mut defect = 0.0;
    let mut scale = 0.0;
    for (j, (a, b)) in ztu.samples.iter().zip(&zu.samples).enumerate() {
        let mzu = b * zu.node(j);
        defect += (a - &mzu).norm_squared();
        scale += mzu.norm_squared();
    }
    if scale == 0.0 {
        return Ok(defect.sqrt());
    }
    Ok((defect / scale).sqrt())
}

/// Evidence for `spt u ⊆ Z_{>=0}` from the profile `mu -> |Z_mu u|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct HardyEvidence {
    /// Discrete circle norm squared for each grid radius.
    pub profile: Vec<f64>,
    pub sup_norm: f64,
    /// Whether the profile is nonincreasing in `mu`; a grid can only give
    /// evidence, never a proof.
    pub is_bounded_evidence: bool,
}

pub fn positive_support_hardy_check(
    u: &WindowedSequence,
    rho: f64,
    mu_grid: &[f64],
) -> Result<HardyEvidence> {
    check_rho(rho)?;
    if mu_grid.iter().any(|&mu| !(mu > rho)) {
        return Err(Error::Precondition("mu grid must lie above rho".into()));
    }
    if mu_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Precondition("mu grid must be sorted ascending".into()));
    }
    let n = default_samples(u.window_len());
    let profile = mu_grid
        .iter()
        .map(|&mu| Ok(ztransform(u, mu, n)?.norm_squared()))
        .collect::<Result<Vec<f64>>>()?;
    let sup_norm = profile.iter().copied().fold(0.0, f64::max);
    let is_bounded_evidence = profile
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-10) + f64::MIN_POSITIVE);
    Ok(HardyEvidence {
        profile,
        sup_norm,
        is_bounded_evidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use approx::assert_relative_eq;

    fn x() -> CVector {
        CVector::from_vec(vec![c64(1.0, -0.5), c64(0.25, 2.0)])
    }

    /// Direct double loop `sum_k u_k z_j^{-k}`.
    fn naive(u: &WindowedSequence, rho: f64, n: usize) -> Vec<CVector> {
        (0..n)
            .map(|j| {
                let z = Complex64::from_polar(rho, 2.0 * PI * j as f64 / n as f64);
                let mut acc = CVector::zeros(u.dim());
                for (i, v) in u.values().iter().enumerate() {
                    let k = u.lo() + i as i64;
                    acc += v * z.powi(-(k as i32));
                }
                acc
            })
            .collect()
    }

    fn sample_sequence() -> WindowedSequence {
        WindowedSequence::from_fn(2, -4, 5, |k| {
            let k = k as f64;
            CVector::from_vec(vec![c64(k.sin(), 0.3 * k), c64(1.0 / (1.0 + k * k), k.cos())])
        })
    }

    #[test]
    fn impulse_at_zero_is_constant() {
        let f = ztransform(&WindowedSequence::impulse(0, x()), 1.7, 8).unwrap();
        for s in f.samples() {
            assert!((s - x()).norm() < 1e-15);
        }
    }

    #[test]
    fn impulse_at_one_is_inverse_argument() {
        let n = 16;
        let f = ztransform(&WindowedSequence::impulse(1, x()), 1.0, n).unwrap();
        for (j, s) in f.samples().iter().enumerate() {
            let expected = x() * Complex64::from_polar(1.0, -2.0 * PI * j as f64 / n as f64);
            assert!((s - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn fft_matches_naive_evaluation() {
        let u = sample_sequence();
        for &rho in &[0.5, 1.0, 2.0] {
            let f = ztransform(&u, rho, 32).unwrap();
            for (a, b) in f.samples().iter().zip(naive(&u, rho, 32)) {
                assert!((a - &b).norm() <= 1e-10 * b.norm().max(1.0));
            }
        }
    }

    #[test]
    fn aliasing_is_rejected() {
        let u = sample_sequence();
        assert!(matches!(ztransform(&u, 1.0, 16), Err(Error::Aliasing { .. })));
        assert!(ztransform(&u, 1.0, 24).is_err());
    }

    #[test]
    fn inverse_examples() {
        let f = CircleFunction::from_fn(1.3, 16, 2, |_| x()).unwrap();
        let u = inverse_ztransform(&f, -3, 3).unwrap();
        assert!(u.sub(&WindowedSequence::impulse(0, x())).unwrap().sup_norm() < 1e-14);

        let f = CircleFunction::from_fn(0.8, 16, 2, |z| x() / z).unwrap();
        let u = inverse_ztransform(&f, -3, 3).unwrap();
        assert!(u.sub(&WindowedSequence::impulse(1, x())).unwrap().sup_norm() < 1e-14);

        assert!(matches!(
            inverse_ztransform(&f, 0, 16),
            Err(Error::WindowTooWide { .. })
        ));
    }

    #[test]
    fn round_trip() {
        let u = sample_sequence();
        for &rho in &[0.5, 1.0, 2.0] {
            let f = ztransform(&u, rho, 32).unwrap();
            let back = inverse_ztransform(&f, u.lo(), u.hi()).unwrap();
            let err = back.sub(&u).unwrap();
            assert!(l2_norm(&err, rho).unwrap() <= 1e-10 * l2_norm(&u, rho).unwrap());
        }
    }

    #[test]
    fn parseval_examples() {
        let (l, r) = parseval_check(&WindowedSequence::impulse(3, x()), 2.0, 8).unwrap();
        let expected = x().norm_squared() * 2f64.powi(-6);
        assert_relative_eq!(l, expected, max_relative = 1e-14);
        assert_relative_eq!(r, expected, max_relative = 1e-14);
        assert_eq!(parseval_check(&WindowedSequence::zeros(2), 1.0, 8).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn multiplication_defect_examples() {
        let d = multiplication_equiv_check(&WindowedSequence::impulse(0, x()), 1.0, 8).unwrap();
        assert!(d <= 1e-12);
        assert_eq!(multiplication_equiv_check(&WindowedSequence::zeros(2), 1.0, 8).unwrap(), 0.0);
        assert!(multiplication_equiv_check(&sample_sequence(), 0.5, 32).unwrap() <= 1e-10);
    }

    #[test]
    fn discrete_basis_is_orthonormal() {
        // p_k(z) = rho^k z^{-k}: pairwise discrete inner products are Kronecker
        // deltas for |k| <= N/4.
        let n = 32;
        let rho: f64 = 1.7;
        let basis: Vec<Vec<Complex64>> = (-8..=8)
            .map(|k: i32| {
                (0..n)
                    .map(|j| {
                        let z = Complex64::from_polar(rho, 2.0 * PI * j as f64 / n as f64);
                        rho.powi(k) * z.powi(-k)
                    })
                    .collect()
            })
            .collect();
        for (a, pa) in basis.iter().enumerate() {
            for (b, pb) in basis.iter().enumerate() {
                let ip: Complex64 =
                    pa.iter().zip(pb).map(|(x, y)| x.conj() * y).sum::<Complex64>() / n as f64;
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((ip - expected).norm() < 1e-10, "{a} {b} {ip}");
            }
        }
    }

    #[test]
    fn hardy_evidence() {
        let grid = [1.1, 1.5, 2.0, 4.0];
        let causal = WindowedSequence::from_fn(2, 0, 4, |k| x() * c64(1.0 / (k + 1) as f64, 0.0));
        let ev = positive_support_hardy_check(&causal, 1.0, &grid).unwrap();
        assert!(ev.is_bounded_evidence);
        assert!(ev.profile.windows(2).all(|w| w[1] <= w[0]));

        let anti = WindowedSequence::impulse(-1, x());
        let ev = positive_support_hardy_check(&anti, 1.0, &grid).unwrap();
        assert!(!ev.is_bounded_evidence);
        assert_relative_eq!(ev.sup_norm, x().norm_squared() * 16.0, max_relative = 1e-12);

        let ev = positive_support_hardy_check(&WindowedSequence::zeros(2), 1.0, &grid).unwrap();
        assert_eq!(ev.sup_norm, 0.0);
        assert!(ev.is_bounded_evidence);

        assert!(positive_support_hardy_check(&anti, 1.0, &[2.0, 1.5]).is_err());
        assert!(positive_support_hardy_check(&anti, 1.0, &[0.9]).is_err());
    }
}
