//! Error type shared by every module of the crate.

use num_complex::Complex64;

use crate::solver::SolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("eigenvalue solver failed for a {dim}x{dim} matrix")]
    EigenFailure { dim: usize },
    #[error("point {z} is within {distance:e} of the spectrum")]
    SpectrumHit { z: Complex64, distance: f64 },
    #[error("eigenvalue of modulus {modulus} lies within the gap tolerance of the circle of radius {radius}")]
    SpectrumOnCircle { radius: f64, modulus: f64 },
    #[error("contour quadrature did not converge: {points} points leave idempotence defect {defect:e}")]
    QuadratureNonConvergence { points: usize, defect: f64 },
    #[error("eigenvalue of modulus {modulus} is too close to the unit circle to decide")]
    Indeterminate { modulus: f64 },
    #[error("weighted norm overflows for window [{lo}, {hi}]")]
    Overflow { lo: i64, hi: i64 },
    #[error("{n_samples} circle samples alias a window of width {width}")]
    Aliasing { n_samples: usize, width: usize },
    #[error("window of width {width} is too wide for {n_samples} circle samples")]
    WindowTooWide { n_samples: usize, width: usize },
    #[error("rho = {rho} is not above the spectral radius {spectral_radius} (+ gap tolerance)")]
    NotCausalRegime { rho: f64, spectral_radius: f64 },
    #[error("split-mode resolvent requires a spectral split at gamma = rho")]
    SplitMissing,
    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),
    #[error("Lipschitz bound {lip} does not satisfy the contraction bound {bound}")]
    NotContractive { lip: f64, bound: f64 },
    #[error("fixed-point iteration did not converge after {} iterations (residual {:e})", .0.iterations, .0.final_residual)]
    NoConvergence(Box<SolveReport>),
    #[error("Lyapunov-Perron iteration did not converge after {iterations} iterations (residual {residual:e})")]
    LpNoConvergence { iterations: usize, residual: f64 },
    #[error("a causal map is required (lookahead {lookahead})")]
    CausalityRequired { lookahead: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("series truncation needs more than {limit} terms (ratio {ratio})")]
    TailTooLong { ratio: f64, limit: usize },
    #[error("operator is not hyperbolic")]
    NotHyperbolic,
    #[error("vector is not in the range of the {0} projection")]
    RangeViolation(&'static str),
}

impl Error {
    /// Stable machine-readable code for diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::EigenFailure { .. } => "eigen_failure",
            Error::SpectrumHit { .. } => "spectrum_hit",
            Error::SpectrumOnCircle { .. } => "spectrum_on_circle",
            Error::QuadratureNonConvergence { .. } => "quadrature_non_convergence",
            Error::Indeterminate { .. } => "indeterminate",
            Error::Overflow { .. } => "overflow",
            Error::Aliasing { .. } => "aliasing",
            Error::WindowTooWide { .. } => "window_too_wide",
            Error::NotCausalRegime { .. } => "not_causal_regime",
            Error::SplitMissing => "split_missing",
            Error::InternalInconsistency(_) => "internal_inconsistency",
            Error::NotContractive { .. } => "not_contractive",
            Error::NoConvergence(_) => "no_convergence",
            Error::LpNoConvergence { .. } => "lp_no_convergence",
            Error::CausalityRequired { .. } => "causality_required",
            Error::Precondition(_) => "precondition",
            Error::TailTooLong { .. } => "tail_too_long",
            Error::NotHyperbolic => "not_hyperbolic",
            Error::RangeViolation(_) => "range_violation",
        }
    }
}
