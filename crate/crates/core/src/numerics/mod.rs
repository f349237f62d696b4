//! Numerical kernels shared by the rest of the crate.

mod eigen;
mod gamma;
mod logistic;
mod quad;
mod rng;

pub use eigen::{sym_eig_extremes, EigExtremes, SYMMETRY_TOL};
pub use gamma::{gamma, log_gamma};
pub use logistic::{log_sigmoid, sigmoid, softplus};
pub use quad::{integrate, QuadResult, MAX_SUBDIVISIONS};
pub use rng::{gamma_quarter_sample, gamma_small_shape_sample, RngStream};

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile `Φ⁻¹(p)` for `p ∈ (0, 1)`.
pub fn normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p)
}
