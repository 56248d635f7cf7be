//! Finitely supported two-sided sequences `Z -> C^d` and the exponentially
//! weighted norms
//!
//! ```text
//! |u|_{p,rho} = ( sum_k |u_k|^p rho^{-p k} )^{1/p},   |u|_{inf,rho} = sup_k |u_k| rho^{-k}.
//! ```
//!
//! For such sequences `tau^n` scales every weighted norm by exactly `rho^n`.
//! Infinite-support sequences are out of scope: solvers truncate explicitly.

use crate::error::{Error, Result};
use crate::{c64, CMatrix, CVector, Complex64};

/// Exponent of a weighted sequence norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Exponent {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "inf")]
    Inf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weight {
    rho: f64,
    p: Exponent,
}

impl Weight {
    pub fn new(rho: f64, p: Exponent) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::InvalidInput(format!("weight rho must be positive, got {rho}")));
        }
        Ok(Self { rho, p })
    }

    pub fn l2(rho: f64) -> Result<Self> {
        Self::new(rho, Exponent::Two)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn exponent(&self) -> Exponent {
        self.p
    }
}

/// `delta_k x`: the sequence equal to `x` at `position` and zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Impulse {
    pub position: i64,
    pub vector: CVector,
}

impl Impulse {
    pub fn new(position: i64, vector: CVector) -> Result<Self> {
        check_finite(&vector)?;
        Ok(Self { position, vector })
    }

    pub fn to_sequence(&self) -> WindowedSequence {
        WindowedSequence::impulse(self.position, self.vector.clone())
    }
}

/// Two-sided sequence `u` with `u_n = values[n - lo]` on `[lo, hi]` and zero
/// elsewhere.
///
/// Always kept in canonical form: the first and last stored entries are
/// nonzero, except for the zero sequence which is stored as `lo = 0` with a
/// single zero entry.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSequence {
    dim: usize,
    lo: i64,
    values: Vec<CVector>,
}

fn check_finite(v: &CVector) -> Result<()> {
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("sequence entry"));
    }
    Ok(())
}

impl WindowedSequence {
    pub fn new(dim: usize, lo: i64, values: Vec<CVector>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("sequence dim must be >= 1".into()));
        }
        for v in &values {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
            check_finite(v)?;
        }
        Ok(Self::from_parts(dim, lo, values))
    }

    /// Trusted constructor: entries already have length `dim`.
    pub(crate) fn from_parts(dim: usize, lo: i64, values: Vec<CVector>) -> Self {
        let mut seq = Self { dim, lo, values };
        seq.canonicalize_in_place();
        seq
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            lo: 0,
            values: vec![CVector::zeros(dim)],
        }
    }

    pub fn impulse(position: i64, x: CVector) -> Self {
        let dim = x.len();
        Self::from_parts(dim, position, vec![x])
    }

    /// Sequence with `u_n = f(n)` on `[lo, hi]`.
    pub fn from_fn(dim: usize, lo: i64, hi: i64, mut f: impl FnMut(i64) -> CVector) -> Self {
        let values = (lo..=hi).map(&mut f).collect();
        Self::from_parts(dim, lo, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64 - 1
    }

    pub fn window_len(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[CVector] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|z| *z == Complex64::new(0.0, 0.0)))
    }

    /// Entry at `n`, or `None` outside the stored window.
    pub fn entry(&self, n: i64) -> Option<&CVector> {
        if n < self.lo {
            return None;
        }
        self.values.get((n - self.lo) as usize)
    }

    /// `u_n` (zero outside the window).
    pub fn get(&self, n: i64) -> CVector {
        self.entry(n).cloned().unwrap_or_else(|| CVector::zeros(self.dim))
    }

    fn canonicalize_in_place(&mut self) {
        let nonzero = |v: &CVector| v.iter().any(|z| z.re != 0.0 || z.im != 0.0);
        let Some(first) = self.values.iter().position(nonzero) else {
            *self = Self::zeros(self.dim);
            return;
        };
        let last = self.values.iter().rposition(nonzero).unwrap();
        self.values.truncate(last + 1);
        self.values.drain(..first);
        self.lo += first as i64;
    }

    pub fn canonicalize(&self) -> Self {
        let mut out = self.clone();
        out.canonicalize_in_place();
        out
    }

    /// `tau^n u`: `(tau^n u)_k = u_{k+n}`.
    pub fn shift(&self, n: i64) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        Self {
            dim: self.dim,
            lo: self.lo - n,
            values: self.values.clone(),
        }
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: other.dim,
            });
        }
        Ok(())
    }

    fn combine(&self, other: &Self, f: impl Fn(&CVector, &CVector) -> CVector) -> Result<Self> {
        self.check_dim(other)?;
        let lo = self.lo.min(other.lo);
        let hi = self.hi().max(other.hi());
        let zero = CVector::zeros(self.dim);
        let values = (lo..=hi)
            .map(|n| f(self.entry(n).unwrap_or(&zero), other.entry(n).unwrap_or(&zero)))
            .collect();
        Ok(Self::from_parts(self.dim, lo, values))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a - b)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let values = self.values.iter().map(|v| v * c).collect();
        Self::from_parts(self.dim, self.lo, values)
    }

    /// `(M u_n)_n` for a `k x d` matrix `M`.
    pub fn map_matrix(&self, m: &CMatrix) -> Result<Self> {
        if m.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: m.ncols(),
            });
        }
        let values = self.values.iter().map(|v| m * v).collect();
        Ok(Self::from_parts(m.nrows(), self.lo, values))
    }

    /// Restriction to `[lo, hi]` (zero outside).
    pub fn truncate(&self, lo: i64, hi: i64) -> Self {
        let lo = lo.max(self.lo);
        let hi = hi.min(self.hi());
        if lo > hi {
            return Self::zeros(self.dim);
        }
        let start = (lo - self.lo) as usize;
        let end = (hi - self.lo) as usize;
        Self::from_parts(self.dim, lo, self.values[start..=end].to_vec())
    }

    /// `chi_{Z >= a} u`
    pub fn restrict_from(&self, a: i64) -> Self {
        self.truncate(a, i64::MAX)
    }

    /// `max_n |u_n - v_n|`
    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.values.iter().map(|v| v.norm()).fold(0.0, f64::max))
    }

    /// `max_n |u_n|`
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Minimal window holding every entry with `|u_k| > tol`, or `None`.
    pub fn support(&self, tol: f64) -> Option<(i64, i64)> {
        let first = self.values.iter().position(|v| v.norm() > tol)?;
        let last = self.values.iter().rposition(|v| v.norm() > tol)?;
        Some((self.lo + first as i64, self.lo + last as i64))
    }

    /// Whether every entry with index below `a` is at most `tol` in norm.
    pub fn support_subset_geq(&self, a: i64, tol: f64) -> bool {
        match self.support(tol) {
            None => true,
            Some((lo, _)) => lo >= a,
        }
    }
}

/// Zero extension of a one-sided sequence `(x_a, x_{a+1}, ...)` to `Z`.
pub fn embed_one_sided(dim: usize, start: i64, values: &[CVector]) -> Result<WindowedSequence> {
    if values.is_empty() {
        if dim == 0 {
            return Err(Error::InvalidInput("sequence dim must be >= 1".into()));
        }
        return Ok(WindowedSequence::zeros(dim));
    }
    WindowedSequence::new(dim, start, values.to_vec())
}

/// Euclidean norm without squaring overflow.
pub(crate) fn hypot_norm(v: &CVector) -> f64 {
    v.iter().fold(0.0, |acc: f64, z| acc.hypot(z.norm()))
}

/// `|u_k| rho^{-k}`, or `None` on overflow. Evaluated in log space so that the
/// weight itself never overflows when the product is representable.
fn weighted_magnitude(v: &CVector, k: i64, ln_rho: f64) -> Option<f64> {
    let m = hypot_norm(v);
    if m == 0.0 {
        return Some(0.0);
    }
    let out = (m.ln() - k as f64 * ln_rho).exp();
    out.is_finite().then_some(out)
}

pub fn weighted_norm(u: &WindowedSequence, w: Weight) -> Result<f64> {
    let ln_rho = w.rho.ln();
    let overflow = || Error::Overflow {
        lo: u.lo(),
        hi: u.hi(),
    };
    let mags = u
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| weighted_magnitude(v, u.lo + i as i64, ln_rho))
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(overflow)?;
    let norm = match w.p {
        Exponent::Inf => mags.iter().copied().fold(0.0, f64::max),
        Exponent::One => mags.iter().sum(),
        Exponent::Two => {
            let scale = mags.iter().copied().fold(0.0, f64::max);
            if scale == 0.0 {
                0.0
            } else {
                scale * mags.iter().map(|m| (m / scale).powi(2)).sum::<f64>().sqrt()
            }
        }
    };
    if norm.is_finite() {
        Ok(norm)
    } else {
        Err(overflow())
    }
}

/// `l_{2,rho}` norm; shorthand used throughout the solvers.
pub fn l2_norm(u: &WindowedSequence, rho: f64) -> Result<f64> {
    weighted_norm(u, Weight::l2(rho)?)
}

/// `<u, v>_{2,rho} = sum_k <u_k, v_k> rho^{-2k}`, conjugate-linear in `u`.
pub fn inner_product(u: &WindowedSequence, v: &WindowedSequence, rho: f64) -> Result<Complex64> {
    u.check_dim(v)?;
    if !(rho > 0.0) {
        return Err(Error::InvalidInput(format!("rho must be positive, got {rho}")));
    }
    let lo = u.lo.max(v.lo);
    let hi = u.hi().min(v.hi());
    let ln_rho = rho.ln();
    let mut acc = c64(0.0, 0.0);
    for k in lo..=hi {
        let (Some(a), Some(b)) = (u.entry(k), v.entry(k)) else {
            continue;
        };
        let weight = (-2.0 * k as f64 * ln_rho).exp();
        acc += a.dotc(b) * weight;
    }
    if !acc.re.is_finite() || !acc.im.is_finite() {
        return Err(Error::Overflow { lo, hi });
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn vec2(a: f64, b: f64) -> CVector {
        CVector::from_vec(vec![c64(a, 0.0), c64(b, 0.0)])
    }

    #[test]
    fn canonical_form_trims_zero_ends() {
        let z = CVector::zeros(2);
        let u = WindowedSequence::new(2, -3, vec![z.clone(), vec2(1.0, 0.0), z.clone(), vec2(0.0, 2.0), z.clone()])
            .unwrap();
        assert_eq!((u.lo(), u.hi()), (-2, 0));
        assert_eq!(u.get(-1), z);
        let zero = WindowedSequence::new(2, 7, vec![z.clone(), z.clone()]).unwrap();
        assert_eq!(zero, WindowedSequence::zeros(2));
        assert_eq!(zero.lo(), 0);
        assert_eq!(u.canonicalize(), u);
    }

    #[test]
    fn rejects_non_finite_and_mismatched() {
        let bad = CVector::from_vec(vec![c64(f64::INFINITY, 0.0)]);
        assert!(WindowedSequence::new(1, 0, vec![bad]).is_err());
        assert!(matches!(
            WindowedSequence::new(2, 0, vec![CVector::zeros(3)]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn impulse_norm_is_single_term() {
        let x = vec2(3.0, 4.0);
        for &rho in &[0.5, 1.0, 2.0] {
            for p in [Exponent::One, Exponent::Two, Exponent::Inf] {
                let u = WindowedSequence::impulse(3, x.clone());
                let n = weighted_norm(&u, Weight::new(rho, p).unwrap()).unwrap();
                assert_relative_eq!(n, 5.0 * rho.powi(-3), max_relative = 1e-14);
            }
        }
        let zero = WindowedSequence::zeros(2);
        assert_eq!(weighted_norm(&zero, Weight::l2(1.3).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn weighted_norm_matches_direct_loop() {
        let u = WindowedSequence::from_fn(2, -5, 5, |k| {
            CVector::from_vec(vec![c64(k as f64 * 0.3, 1.0), c64(-0.7, (k * k) as f64 * 0.1)])
        });
        let rho: f64 = 1.3;
        let mut direct = 0.0;
        for k in -5..=5i64 {
            let kf = k as f64;
            let a = (kf * 0.3).powi(2) + 1.0 + 0.49 + (kf * kf * 0.1).powi(2);
            direct += a * rho.powi(-2 * k as i32);
        }
        assert_relative_eq!(
            weighted_norm(&u, Weight::l2(rho).unwrap()).unwrap(),
            direct.sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn overflow_is_reported() {
        let u = WindowedSequence::impulse(-2000, vec2(1.0, 0.0));
        assert!(matches!(
            weighted_norm(&u, Weight::l2(2.0).unwrap()),
            Err(Error::Overflow { .. })
        ));
    }

    #[test]
    fn shift_examples() {
        let x = vec2(1.0, -1.0);
        let u = WindowedSequence::impulse(0, x.clone());
        assert_eq!(u.shift(1), WindowedSequence::impulse(-1, x));
        let v = WindowedSequence::from_fn(2, -2, 3, |k| vec2(k as f64, 1.0));
        assert_eq!(v.shift(4).shift(-4), v);
        let n = l2_norm(&v, 1.7).unwrap();
        assert_relative_eq!(l2_norm(&v.shift(3), 1.7).unwrap(), 1.7f64.powi(3) * n, max_relative = 1e-13);
    }

    #[test]
    fn inner_product_examples() {
        let e1 = WindowedSequence::impulse(0, vec2(1.0, 0.0));
        let e2 = WindowedSequence::impulse(0, vec2(0.0, 1.0));
        assert_eq!(inner_product(&e1, &e2, 1.0).unwrap(), c64(0.0, 0.0));
        let x = CVector::from_vec(vec![c64(1.0, 2.0), c64(-0.5, 0.25)]);
        let u = WindowedSequence::impulse(-2, x.clone());
        let ip = inner_product(&u, &u, 1.5).unwrap();
        assert_relative_eq!(ip.re, x.norm_squared() * 1.5f64.powi(4), max_relative = 1e-14);
        assert!(ip.im.abs() < 1e-15);
        assert!(inner_product(&e1, &WindowedSequence::zeros(3), 1.0).is_err());
    }

    #[test]
    fn inner_product_is_conjugate_linear_in_first() {
        let u = WindowedSequence::from_fn(2, -1, 2, |k| {
            CVector::from_vec(vec![c64(k as f64, 0.5), c64(0.1, -(k as f64))])
        });
        let v = WindowedSequence::from_fn(2, 0, 3, |k| CVector::from_vec(vec![c64(1.0, k as f64), c64(0.0, 1.0)]));
        let c = c64(0.3, 0.8);
        let lhs = inner_product(&u.scale(c), &v, 0.9).unwrap();
        let rhs = c.conj() * inner_product(&u, &v, 0.9).unwrap();
        assert!((lhs - rhs).norm() < 1e-13);
    }

    #[test]
    fn support_queries() {
        let x = vec2(1.0, 0.0);
        let u = WindowedSequence::impulse(-1, x.clone());
        assert_eq!(u.support(SUPP), Some((-1, -1)));
        assert_eq!(WindowedSequence::zeros(2).support(SUPP), None);
        let mut values = vec![vec2(1e-15, 0.0), CVector::zeros(2), CVector::zeros(2), x.clone(), x];
        values[0] = vec2(1e-15, 0.0);
        let stray = WindowedSequence::new(2, -3, values).unwrap();
        assert_eq!(stray.support(SUPP), Some((0, 1)));
        assert!(stray.support_subset_geq(0, SUPP));
        assert!(!stray.support_subset_geq(0, 0.0));
    }

    const SUPP: f64 = crate::SUPP_TOL;

    #[test]
    fn one_sided_embedding() {
        let x0 = vec2(2.0, 1.0);
        assert_eq!(
            embed_one_sided(2, 0, std::slice::from_ref(&x0)).unwrap(),
            WindowedSequence::impulse(0, x0)
        );
        assert_eq!(embed_one_sided(2, 4, &[]).unwrap(), WindowedSequence::zeros(2));
    }

    #[test]
    fn truncate_and_restrict() {
        let u = WindowedSequence::from_fn(1, -3, 3, |k| CVector::from_vec(vec![c64(k as f64 + 10.0, 0.0)]));
        let t = u.truncate(-1, 1);
        assert_eq!((t.lo(), t.hi()), (-1, 1));
        assert_eq!(u.restrict_from(2).lo(), 2);
        assert!(u.truncate(5, 9).is_zero());
    }
}
