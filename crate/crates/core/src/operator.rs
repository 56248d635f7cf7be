//! Finite-dimensional operator algebra on `C^d`.
//!
//! Operator norms are spectral 2-norms (largest singular value). Eigenvalues
//! come from a dense complex Schur decomposition and are cached on first use.
//! Riesz projections are computed from the contour integral of the resolvent,
//! so defective matrices need no Jordan form.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::linalg::Schur;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::{c64, CMatrix, CVector, Complex64, EIG_TOL, GAP_TOL, QUAD_CAP};

const SCHUR_EPS: f64 = 1e-15;
const SCHUR_MAX_ITER: usize = 10_000;
const EIG_RESIDUAL_TOL: f64 = 1e-8;
/// Idempotence target for the adaptive contour quadrature, relative to
/// `max(1, |P|^2)`.
const RIESZ_TOL: f64 = 1e-12;

/// Dense complex `d x d` matrix with lazily cached eigenvalues.
#[derive(Debug, Clone)]
pub struct BoundedOperator {
    entries: CMatrix,
    eigenvalues: OnceLock<Option<Vec<Complex64>>>,
}

impl PartialEq for BoundedOperator {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl BoundedOperator {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::InvalidInput(format!(
                "operator must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.nrows() == 0 {
            return Err(Error::InvalidInput("operator must have dim >= 1".into()));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("operator entries"));
        }
        Ok(Self {
            entries,
            eigenvalues: OnceLock::new(),
        })
    }

    /// Real matrix given row by row.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput("rows must form a square matrix".into()));
        }
        Self::new(CMatrix::from_fn(d, d, |i, j| c64(rows[i][j], 0.0)))
    }

    pub fn diagonal(diag: &[Complex64]) -> Result<Self> {
        Self::new(CMatrix::from_diagonal(&CVector::from_column_slice(diag)))
    }

    pub fn real_diagonal(diag: &[f64]) -> Result<Self> {
        let diag: Vec<_> = diag.iter().map(|&x| c64(x, 0.0)).collect();
        Self::diagonal(&diag)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn norm(&self) -> f64 {
        op_norm(&self.entries)
    }

    /// Eigenvalues with multiplicity, in Schur order.
    pub fn eigenvalues(&self) -> Result<&[Complex64]> {
        self.eigenvalues
            .get_or_init(|| compute_eigenvalues(&self.entries))
            .as_deref()
            .ok_or(Error::EigenFailure { dim: self.dim() })
    }

    pub fn apply(&self, x: &CVector) -> CVector {
        &self.entries * x
    }

    /// Fails with `SpectrumOnCircle` if an eigenvalue modulus is within
    /// `GAP_TOL` of `radius`.
    pub fn check_circle_gap(&self, radius: f64) -> Result<()> {
        for lambda in self.eigenvalues()? {
            let modulus = lambda.norm();
            if (modulus - radius).abs() <= GAP_TOL {
                return Err(Error::SpectrumOnCircle { radius, modulus });
            }
        }
        Ok(())
    }
}

fn compute_eigenvalues(m: &CMatrix) -> Option<Vec<Complex64>> {
    let d = m.nrows();
    let eig: Vec<Complex64> = if d == 1 {
        vec![m[(0, 0)]]
    } else {
        let schur = Schur::try_new(m.clone(), SCHUR_EPS, SCHUR_MAX_ITER)?;
        schur.eigenvalues()?.iter().copied().collect()
    };
    if eig.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    // Every eigenvalue must make `A - lambda I` numerically singular.
    let scale = op_norm(m).max(1.0);
    let identity = CMatrix::identity(d, d);
    for &lambda in &eig {
        let shifted = m - &identity * lambda;
        if min_singular_value(&shifted) > EIG_RESIDUAL_TOL * scale {
            return None;
        }
    }
    Some(eig)
}

/// Spectral 2-norm.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn min_singular_value(m: &CMatrix) -> f64 {
    m.singular_values().min()
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(a: &BoundedOperator) -> Result<f64> {
    Ok(a.eigenvalues()?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Distance from `z` to the spectrum of `a`.
pub fn spectrum_distance(a: &BoundedOperator, z: Complex64) -> Result<f64> {
    Ok(a.eigenvalues()?
        .iter()
        .map(|lambda| (z - lambda).norm())
        .fold(f64::INFINITY, f64::min))
}

/// `(zI - A)^{-1}`, with one step of iterative refinement.
pub fn resolvent_at(a: &BoundedOperator, z: Complex64) -> Result<CMatrix> {
    let distance = spectrum_distance(a, z)?;
    if distance <= EIG_TOL {
        return Err(Error::SpectrumHit { z, distance });
    }
    shifted_inverse(a.entries(), z).ok_or(Error::SpectrumHit { z, distance })
}

/// `(zI - m)^{-1}` without spectral checks.
pub(crate) fn shifted_inverse(m: &CMatrix, z: Complex64) -> Option<CMatrix> {
    let d = m.nrows();
    let identity = CMatrix::identity(d, d);
    let shifted = &identity * z - m;
    let lu = shifted.clone().lu();
    let mut inv = lu.try_inverse()?;
    let correction = &identity - &shifted * &inv;
    inv += &inv * correction;
    Some(inv)
}

fn circle_point(radius: f64, theta: f64) -> Complex64 {
    Complex64::from_polar(radius, theta)
}

/// `max_j |(z_j - A)^{-1}|` over `samples` equispaced points of the circle of
/// radius `rho`; a lower estimate of `M_rho`.
pub fn circle_sup_resolvent(a: &BoundedOperator, rho: f64, samples: usize) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::InvalidInput(format!("rho must be positive, got {rho}")));
    }
    if samples < 16 {
        return Err(Error::Precondition(format!(
            "circle sampling needs at least 16 points, got {samples}"
        )));
    }
    a.check_circle_gap(rho)?;
    let d = a.dim();
    let identity = CMatrix::identity(d, d);
    let sup = (0..samples)
        .into_par_iter()
        .map(|j| {
            let z = circle_point(rho, 2.0 * PI * j as f64 / samples as f64);
            1.0 / min_singular_value(&(&identity * z - a.entries()))
        })
        .reduce(|| 0.0, f64::max);
    Ok(sup)
}

/// Riesz projection pair at radius `gamma`.
///
/// `proj_stable` projects onto the spectral subspace of eigenvalues inside the
/// circle, `proj_unstable = I - proj_stable` onto the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSplit {
    pub gamma: f64,
    pub proj_stable: CMatrix,
    pub proj_unstable: CMatrix,
    /// Largest eigenvalue modulus inside the circle (0 if none).
    pub r_inside: f64,
    /// Largest `1/|lambda|` over eigenvalues outside the circle (0 if none).
    pub r_outside_inv: f64,
    /// Number of eigenvalues inside the circle, with multiplicity.
    pub rank_stable: usize,
    pub quad_points: usize,
    pub idempotence_defect: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SplitDefects {
    /// `|P^2 - P|`
    pub idempotence: f64,
    /// `|P + Q - I|`
    pub complementarity: f64,
    /// `|PA - AP|`
    pub commutation: f64,
}

impl SpectralSplit {
    pub fn dim(&self) -> usize {
        self.proj_stable.nrows()
    }

    pub fn defects(&self, a: &BoundedOperator) -> SplitDefects {
        let p = &self.proj_stable;
        let q = &self.proj_unstable;
        let d = self.dim();
        SplitDefects {
            idempotence: op_norm(&(p * p - p)),
            complementarity: op_norm(&(p + q - CMatrix::identity(d, d))),
            commutation: op_norm(&(p * a.entries() - a.entries() * p)),
        }
    }

    /// `PAP`
    pub fn stable_part(&self, a: &BoundedOperator) -> CMatrix {
        &self.proj_stable * a.entries() * &self.proj_stable
    }

    /// `QAQ`
    pub fn unstable_part(&self, a: &BoundedOperator) -> CMatrix {
        &self.proj_unstable * a.entries() * &self.proj_unstable
    }

    /// Orthonormal basis (as columns) of `range(Q)`.
    pub fn unstable_basis(&self) -> CMatrix {
        range_basis(&self.proj_unstable)
    }

    /// Inverse of `QAQ` restricted to `range(Q)`, extended by zero on
    /// `range(P)`: the returned `B` satisfies `B (QAQ) = Q` and `(QAQ) B = Q`.
    pub fn unstable_inverse(&self, a: &BoundedOperator) -> Result<CMatrix> {
        let d = self.dim();
        let basis = self.unstable_basis();
        let k = basis.ncols();
        if k == 0 {
            return Ok(CMatrix::zeros(d, d));
        }
        let compressed = basis.adjoint() * a.entries() * &basis;
        let inv = compressed.clone().try_inverse().ok_or_else(|| {
            Error::InternalInconsistency("QAQ is singular on range(Q)".into())
        })?;
        let residual = op_norm(&(&compressed * &inv - CMatrix::identity(k, k)));
        if !(residual < 1e-6) {
            return Err(Error::InternalInconsistency(format!(
                "QAQ is numerically singular on range(Q) (inverse residual {residual:e})"
            )));
        }
        Ok(&basis * inv * basis.adjoint() * &self.proj_unstable)
    }
}

/// Orthonormal basis of the range of a projection. A projection has singular
/// values 0 or at least 1, so the cut at 1/2 is rank-revealing.
pub(crate) fn range_basis(proj: &CMatrix) -> CMatrix {
    let d = proj.nrows();
    let svd = proj.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let cols: Vec<CVector> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > 0.5)
        .map(|(i, _)| u.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        return CMatrix::zeros(d, 0);
    }
    // SVD vectors of near-degenerate singular values can sit off the range;
    // pushing them through the projection and re-orthonormalizing fixes that.
    let mut basis = CMatrix::from_columns(&cols);
    for _ in 0..3 {
        basis = (proj * &basis).qr().q();
    }
    basis
}

fn trapezoid_sum(a: &CMatrix, gamma: f64, thetas: Vec<f64>) -> Option<CMatrix> {
    let d = a.nrows();
    let terms: Vec<Option<CMatrix>> = thetas
        .into_par_iter()
        .map(|theta| {
            let z = circle_point(gamma, theta);
            shifted_inverse(a, z).map(|r| r * z)
        })
        .collect();
    // Ordered reduction keeps the result independent of the thread count.
    let mut sum = CMatrix::zeros(d, d);
    for t in terms {
        sum += t?;
    }
    Some(sum)
}

/// Riesz projections at radius `gamma` by the trapezoid rule on the circle,
/// doubling the number of nodes until the idempotence defect is below
/// tolerance. The node count is capped at `max(QUAD_CAP, 4 * quad_points)`.
pub fn riesz_split(a: &BoundedOperator, gamma: f64, quad_points: usize) -> Result<SpectralSplit> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    a.check_circle_gap(gamma)?;
    let d = a.dim();
    let eig = a.eigenvalues()?;
    let rank_stable = eig.iter().filter(|z| z.norm() < gamma).count();
    let r_inside = eig
        .iter()
        .map(|z| z.norm())
        .filter(|&m| m < gamma)
        .fold(0.0, f64::max);
    let r_outside_inv = eig
        .iter()
        .map(|z| z.norm())
        .filter(|&m| m > gamma)
        .map(|m| 1.0 / m)
        .fold(0.0, f64::max);

    let cap = QUAD_CAP.max(4 * quad_points);
    let mut n = quad_points.max(16);
    let nodes = |n: usize, offset: f64| -> Vec<f64> {
        (0..n)
            .map(|j| 2.0 * PI * (j as f64 + offset) / n as f64)
            .collect()
    };
    let singular = || Error::InternalInconsistency("quadrature node hit the spectrum".into());
    let mut sum = trapezoid_sum(a.entries(), gamma, nodes(n, 0.0)).ok_or_else(singular)?;
    loop {
        let p = &sum / c64(n as f64, 0.0);
        let defect = op_norm(&(&p * &p - &p));
        let scale = op_norm(&p).powi(2).max(1.0);
        if defect <= RIESZ_TOL * scale {
            let trace = p.trace();
            if (trace.re - rank_stable as f64).abs() > 1e-6 * scale || trace.im.abs() > 1e-6 * scale {
                return Err(Error::InternalInconsistency(format!(
                    "Riesz projection has trace {trace}, expected rank {rank_stable}"
                )));
            }
            let q = CMatrix::identity(d, d) - &p;
            return Ok(SpectralSplit {
                gamma,
                proj_stable: p,
                proj_unstable: q,
                r_inside,
                r_outside_inv,
                rank_stable,
                quad_points: n,
                idempotence_defect: defect,
            });
        }
        if 2 * n > cap {
            return Err(Error::QuadratureNonConvergence { points: n, defect });
        }
        // Midpoints of the current nodes complete the doubled rule.
        sum += trapezoid_sum(a.entries(), gamma, nodes(n, 0.5)).ok_or_else(singular)?;
        n *= 2;
    }
}

/// `Ok(true)` when no eigenvalue modulus is within `GAP_TOL` of 1; an
/// `Indeterminate` error otherwise.
pub fn is_hyperbolic(a: &BoundedOperator) -> Result<bool> {
    for lambda in a.eigenvalues()? {
        let modulus = lambda.norm();
        if (modulus - 1.0).abs() <= GAP_TOL {
            return Err(Error::Indeterminate { modulus });
        }
    }
    Ok(true)
}

/// `m^k` by repeated squaring.
pub fn matrix_power(m: &CMatrix, mut k: usize) -> CMatrix {
    let d = m.nrows();
    let mut result = CMatrix::identity(d, d);
    let mut base = m.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        base = &base * &base;
        k >>= 1;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn real(rows: &[&[f64]]) -> BoundedOperator {
        BoundedOperator::from_real_rows(rows).unwrap()
    }

    #[test]
    fn spectral_radius_examples() {
        assert_abs_diff_eq!(spectral_radius(&real(&[&[0.5]])).unwrap(), 0.5);
        assert_abs_diff_eq!(
            spectral_radius(&real(&[&[0.0, 1.0], &[0.0, 0.0]])).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            spectral_radius(&real(&[&[0.5, 1.0], &[0.0, 2.0]])).unwrap(),
            2.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(BoundedOperator::new(CMatrix::zeros(2, 3)).is_err());
        assert!(BoundedOperator::new(CMatrix::zeros(0, 0)).is_err());
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = c64(f64::NAN, 0.0);
        assert!(matches!(BoundedOperator::new(m), Err(Error::NonFinite(_))));
    }

    #[test]
    fn resolvent_examples() {
        let r = resolvent_at(&real(&[&[0.5]]), c64(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(r[(0, 0)].re, 2.0, epsilon = 1e-14);

        let r = resolvent_at(&real(&[&[0.0, 1.0], &[0.0, 0.0]]), c64(1.0, 0.0)).unwrap();
        let expected = [[1.0, 1.0], [0.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(r[(i, j)].re, expected[i][j], epsilon = 1e-14);
                assert_abs_diff_eq!(r[(i, j)].im, 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn resolvent_matches_direct_two_by_two_inverse() {
        // Oracle: [[a, b], [0, d]]^{-1} = [[1/a, -b/(a d)], [0, 1/d]]
        let z = c64(0.0, 1.0);
        let a = z - 0.5;
        let b = c64(-1.0, 0.0);
        let d = z - 2.0;
        let expected = [[1.0 / a, -b / (a * d)], [c64(0.0, 0.0), 1.0 / d]];
        let r = resolvent_at(&real(&[&[0.5, 1.0], &[0.0, 2.0]]), z).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((r[(i, j)] - expected[i][j]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn resolvent_rejects_spectrum() {
        let err = resolvent_at(&real(&[&[0.5]]), c64(0.5, 0.0)).unwrap_err();
        assert!(matches!(err, Error::SpectrumHit { .. }));
    }

    #[test]
    fn circle_sup_examples() {
        let m = circle_sup_resolvent(&real(&[&[0.5]]), 1.0, 64).unwrap();
        assert_abs_diff_eq!(m, 2.0, epsilon = 1e-12);
        let m = circle_sup_resolvent(&BoundedOperator::real_diagonal(&[0.5, 2.0]).unwrap(), 1.0, 64)
            .unwrap();
        assert_abs_diff_eq!(m, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn circle_sup_errors() {
        let a = real(&[&[1.0]]);
        assert!(matches!(
            circle_sup_resolvent(&a, 1.0, 64),
            Err(Error::SpectrumOnCircle { .. })
        ));
        assert!(matches!(
            circle_sup_resolvent(&a, 2.0, 8),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn riesz_diagonal_split() {
        let a = BoundedOperator::real_diagonal(&[0.5, 2.0]).unwrap();
        let s = riesz_split(&a, 1.0, 64).unwrap();
        let p = [[1.0, 0.0], [0.0, 0.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((s.proj_stable[(i, j)] - c64(p[i][j], 0.0)).norm() < 1e-12);
                assert!((s.proj_unstable[(i, j)] - c64(p[1 - i][1 - j], 0.0)).norm() < 1e-12);
            }
        }
        assert_eq!(s.rank_stable, 1);
        assert_abs_diff_eq!(s.r_inside, 0.5);
        assert_abs_diff_eq!(s.r_outside_inv, 0.5);
    }

    #[test]
    fn riesz_whole_spectrum_inside() {
        let a = real(&[&[0.5, 1.0], &[0.0, 0.5]]);
        let s = riesz_split(&a, 1.0, 64).unwrap();
        assert!(op_norm(&(&s.proj_stable - CMatrix::identity(2, 2))) < 1e-12);
        assert!(op_norm(&s.proj_unstable) < 1e-12);
        assert_eq!(s.r_outside_inv, 0.0);
    }

    #[test]
    fn riesz_oblique_projection() {
        // Eigenvectors (1, 0) for 0.5 and (2, 3) for 2: projecting onto the
        // first along the second gives P v = (v1 - 2 v2 / 3, 0).
        let a = real(&[&[0.5, 1.0], &[0.0, 2.0]]);
        let s = riesz_split(&a, 1.0, 64).unwrap();
        let expected = [[1.0, -2.0 / 3.0], [0.0, 0.0]];
        for (i, row) in expected.iter().enumerate() {
            for (j, &e) in row.iter().enumerate() {
                assert!((s.proj_stable[(i, j)] - c64(e, 0.0)).norm() < 1e-12);
            }
        }
        let defects = s.defects(&a);
        assert!(defects.idempotence < 1e-12);
        assert!(defects.commutation < 1e-12);
        assert!(defects.complementarity < 1e-15);
    }

    #[test]
    fn riesz_quadrature_gives_up_near_circle() {
        // Gap just above GAP_TOL: 4096 nodes cannot resolve it.
        let a = BoundedOperator::real_diagonal(&[1.0 - 1e-5, 2.0]).unwrap();
        assert!(matches!(
            riesz_split(&a, 1.0, 64),
            Err(Error::QuadratureNonConvergence { .. })
        ));
    }

    #[test]
    fn unstable_inverse_is_inverse_on_range() {
        let a = real(&[&[0.5, 1.0], &[0.0, 2.0]]);
        let s = riesz_split(&a, 1.0, 64).unwrap();
        let inv = s.unstable_inverse(&a).unwrap();
        let qaq = s.unstable_part(&a);
        assert!(op_norm(&(&inv * &qaq - &s.proj_unstable)) < 1e-12);
        assert!(op_norm(&(&qaq * &inv - &s.proj_unstable)) < 1e-12);
    }

    #[test]
    fn hyperbolicity_examples() {
        assert!(is_hyperbolic(&BoundedOperator::real_diagonal(&[0.5, 2.0]).unwrap()).unwrap());
        assert!(is_hyperbolic(&BoundedOperator::real_diagonal(&[0.9, 0.5]).unwrap()).unwrap());
        assert!(matches!(
            is_hyperbolic(&real(&[&[1.0]])),
            Err(Error::Indeterminate { .. })
        ));
    }

    #[test]
    fn matrix_power_matches_repeated_product() {
        let m = real(&[&[0.5, 1.0], &[0.25, -0.3]]);
        let mut direct = CMatrix::identity(2, 2);
        for _ in 0..7 {
            direct = &direct * m.entries();
        }
        assert!(op_norm(&(matrix_power(m.entries(), 7) - direct)) < 1e-14);
    }
}
