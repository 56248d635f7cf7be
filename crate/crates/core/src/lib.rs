//! Difference equations `u_{n+1} = F(u)_n` on exponentially weighted sequence
//! spaces over the integers, with state space `C^d`.
//!
//! The crate is organised bottom-up:
//!
//! - [`operator`]: dense complex operators, spectra, resolvents, circle suprema
//!   `M_rho` and Riesz projections.
//! - [`sequence`]: finitely supported two-sided sequences and the weighted
//!   `l_{p,rho}` norms, shifts and impulses acting on them.
//! - [`transform`]: the sampled Z-transform on the circle of radius `rho`, its
//!   inverse and the numerical checks of unitarity and shift/multiplication
//!   intertwining.
//! - [`resolvent`]: application of `(tau - A)^{-1}` by causal recursion,
//!   Riesz-split formulas or frequency-domain division, and the causality probe.
//! - [`stencil`] and [`solver`]: the closed registry of nonlinearities,
//!   contraction fixed-point solves, initial value problems and the
//!   exponential-stability classifier.
//! - [`manifold`]: the Lyapunov-Perron operator, its fixed point and the
//!   stable-manifold graph.
//! - [`io`]: JSON and CSV formats shared with the command-line front-end.

// `!(x > t)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod manifold;
pub mod operator;
pub mod random;
pub mod resolvent;
pub mod sequence;
pub mod solver;
pub mod stencil;
pub mod transform;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub type CMatrix = nalgebra::DMatrix<Complex64>;
pub type CVector = nalgebra::DVector<Complex64>;

/// Minimum distance between an eigenvalue modulus and a circle for the circle
/// to count as spectrum-free.
pub const GAP_TOL: f64 = 1e-6;
/// Minimum distance between a resolvent point and the spectrum.
pub const EIG_TOL: f64 = 1e-6;
/// Absolute threshold below which a sequence entry counts as zero in support
/// queries.
pub const SUPP_TOL: f64 = 1e-12;
/// Target size of truncated geometric tails.
pub const SERIES_TOL: f64 = 1e-12;
/// Default fixed-point tolerance.
pub const FP_TOL: f64 = 1e-10;
/// Default fixed-point iteration cap.
pub const MAX_ITER: usize = 10_000;
/// Hard cap on trapezoid points for Riesz contour integrals.
pub const QUAD_CAP: usize = 4096;

pub(crate) fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
