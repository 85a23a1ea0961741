//! Numerical laboratory for the white-noise-driven heat equation in a
//! two-phase medium: the explicit fundamental solution, exact Gaussian
//! sampling of spatial slices, and quadratic-variation limit diagnostics.

// Quadrature nodes, rational-approximation coefficients and frozen oracle
// values are carried at published precision.
#![allow(clippy::excessive_precision)]

pub mod cache;
pub mod chaos;
pub mod covariance;
pub mod fit;
pub mod kernel;
pub mod medium;
pub mod quad;
pub mod quadvar;
pub mod rng;
pub mod sampler;
pub mod special;

pub use cache::{CacheStats, GramCache};
pub use chaos::{
    asclt_hypotheses, berry_esseen_value, chaos_diag, contraction_norm_sq, expected_vsq, hermite,
    malliavin_variance, AscltHypotheses, ChaosDiag, ChaosError, MalliavinVariance, VsqMoments,
};
pub use covariance::{
    build_gram, cov_field, cross_increment, increment_variance, sup_variance_check,
    verify_condition, ConditionId, ConditionReport, CovarianceError, IncrementGram,
    SupVarianceReport,
};
pub use kernel::{heat_kernel, FnKernel, Kernel, KernelError, PiecewiseKernel};
pub use medium::{Medium, MediumError};
pub use quad::{QuadError, QuadratureSpec};
pub use quadvar::{
    asclt_experiment, clt_experiment, holder_estimate, ks_distance, v_stat, AscltPath, AscltReport,
    CltReport, CltRow, HolderEstimate, QuadVarError, QuadVarStat, TestFunction, VariogramPoint,
};
pub use rng::NormalStream;
pub use sampler::{
    cholesky_sample, dyadic_sample, noise_grid_oracle, CholeskySampler, DyadicSample, FieldSample,
    NoiseGridOracle, NoiseGridSample, SampleError,
};
