#![allow(dead_code)]

use rand::Rng;
use specseq_core::operator::BoundedOperator;
use specseq_core::random::{random_matrix, random_sequence, SeededRng};
use specseq_core::sequence::WindowedSequence;
use specseq_core::{CMatrix, CVector, Complex64};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rv(xs: &[f64]) -> CVector {
    CVector::from_vec(xs.iter().map(|&x| c(x, 0.0)).collect())
}

/// `I + 0.3 R / sqrt(d)`: invertible with modest condition number.
pub fn basis(rng: &mut SeededRng, d: usize) -> CMatrix {
    CMatrix::identity(d, d) + random_matrix(rng, d) * c(0.3 / (d as f64).sqrt(), 0.0)
}

/// `S diag(eigs) S^{-1}` together with `S`.
pub fn with_spectrum(rng: &mut SeededRng, eigs: &[Complex64]) -> (BoundedOperator, CMatrix) {
    let d = eigs.len();
    let s = basis(rng, d);
    let sinv = s.clone().try_inverse().expect("basis invertible");
    let m = &s * CMatrix::from_diagonal(&CVector::from_column_slice(eigs)) * &sinv;
    (BoundedOperator::new(m).unwrap(), s)
}

/// Spectral projection onto the eigenvectors selected by `keep`.
pub fn eigen_projection(s: &CMatrix, keep: &[bool]) -> CMatrix {
    let d = keep.len();
    let e = CMatrix::from_fn(d, d, |i, j| if i == j && keep[i] { c(1.0, 0.0) } else { c(0.0, 0.0) });
    s * e * s.clone().try_inverse().unwrap()
}

/// A complex number of modulus `m` with random argument.
pub fn with_modulus(rng: &mut SeededRng, m: f64) -> Complex64 {
    Complex64::from_polar(m, rng.gen_range(0.0..std::f64::consts::TAU))
}

/// `d` eigenvalues, `inside` of them with modulus in `[0, rho - gap]`, the
/// rest in `[rho + gap, rho + gap + 1.5]`.
pub fn eigs_around(rng: &mut SeededRng, d: usize, inside: usize, rho: f64, gap: f64) -> Vec<Complex64> {
    (0..d)
        .map(|i| {
            let m = if i < inside {
                rng.gen_range(0.0..=(rho - gap).max(0.0))
            } else {
                rho + gap + rng.gen_range(0.0..1.5)
            };
            with_modulus(rng, m)
        })
        .collect()
}

pub fn random_seq(rng: &mut SeededRng, d: usize, lo: i64, width: usize) -> WindowedSequence {
    random_sequence(rng, d, lo, lo + width as i64 - 1, 1.0)
}
