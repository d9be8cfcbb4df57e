//! # divest
//!
//! Estimation of integral functionals `T(p,q) = ∫ p^α(x) q^β(x) dx` of two
//! unknown densities on the unit cube, from i.i.d. samples of each, together
//! with the divergence estimators built on top of them:
//!
//! - squared L2 distance `∫ (p-q)²`,
//! - Rényi-α divergence `log(∫ p^α q^{1-α}) / (α-1)`,
//! - Tsallis-α divergence `(∫ p^α q^{1-α} - 1) / (α-1)`.
//!
//! Three estimators of increasing statistical quality (and cost) are provided:
//!
//! | Estimator | Idea | Error decay (smoothness s, dimension d) |
//! |-----------|------|------------------------------------------|
//! | plug-in   | evaluate T at kernel density estimates | n^{-s/(2s+d)} |
//! | linear    | correct by first-order expansion terms | n^{-1/2} + n^{-2s/(2s+d)} |
//! | quadratic | correct by second-order terms too      | n^{-1/2} + n^{-3s/(2s+d)} |
//!
//! The corrections come from a functional Taylor expansion of `T` around the
//! fitted pair. First-order terms are sample means; second-order terms are
//! estimated with Fourier projection estimators over a truncated frequency
//! lattice, with a coefficient-matrix bias correction.
//!
//! The crate also ships a simulation harness (`divest` binary) that reproduces
//! the convergence-rate experiments: Monte Carlo trials over a grid of sample
//! sizes, CSV output, and log-log slope fits.
//!
//! ## Layout
//!
//! - [`quadrature`]: midpoint-rule integration on tensor grids.
//! - [`density`]: synthetic trigonometric densities, samplers, ground-truth
//!   functionals.
//! - [`kernels`]: higher-order product kernels built from Legendre polynomials.
//! - [`kde`]: boundary-mirrored, truncated kernel density estimation.
//! - [`fourier`]: complex-exponential basis, empirical coefficients, frequency
//!   lattice selection.
//! - [`functional`]: linear / bilinear / quadratic functional estimators.
//! - [`estimators`]: the assembled T(p,q) and divergence estimators.
//! - [`harness`]: experiment configs, Monte Carlo driver, CSV, slope fitting.
//! - [`reference`]: brute-force reference implementations used for self-checks.

#![forbid(unsafe_code)]

use thiserror::Error;

pub mod density;
pub mod estimators;
pub mod fourier;
pub mod functional;
pub mod harness;
pub mod kde;
pub mod kernels;
pub mod point;
pub mod quadrature;
pub mod reference;

pub use density::{sample, true_divergence, true_t, Density, DivergenceKind, TrigDensity, UniformDensity};
pub use estimators::{
    c1, c2, l2_squared, renyi, t_estimate, t_linear, t_plugin, t_quadratic, tsallis, Estimate,
    EstimatorConfig, EstimatorKind,
};
pub use fourier::{empirical_coefficients, frequency_set, phi, CoefficientVector, FrequencySet};
pub use functional::{
    b_matrix, bilinear_functional, linear_functional, quadratic_functional, BMatrix, PsiFunction,
};
pub use kde::{bandwidth, MirroredKde, TruncatedKde};
pub use kernels::{legendre_kernel, smoothness_order, Kernel1D, KernelD};
pub use point::PointSet;
pub use quadrature::{integrate, integrate_complex, GridSpec};

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("grid too large: {nodes} nodes exceeds the guard of {guard} (use an unguarded grid to override)")]
    GridTooLarge { nodes: f64, guard: f64 },

    #[error("kernel order {0} exceeds the conditioning guard of 20")]
    KernelOrder(u32),

    #[error("frequency lattice of {0} elements exceeds the guard of {1}")]
    LatticeTooLarge(usize, usize),

    #[error("grid with {points} points per axis cannot resolve frequencies up to {max_freq} (need at least {required})")]
    GridResolution {
        points: usize,
        max_freq: i64,
        required: usize,
    },

    #[error("imaginary residue {residue:e} exceeds tolerance {tolerance:e} for value {value}")]
    ImaginaryResidue {
        value: f64,
        residue: f64,
        tolerance: f64,
    },

    #[error("inner functional estimate is not positive ({0}); Renyi divergence undefined")]
    NonPositiveEstimate(f64),

    #[error("config error at line {line}, field `{field}`: {message}")]
    Config {
        line: usize,
        field: String,
        message: String,
    },

    #[error("{0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
