//! Numerical lab for noise contrastive estimation (NCE) on a quartic
//! exponential family, contrasted against standard Gaussian noise.
//!
//! The data law is `P* = P̂^d` with `p̂(x) ∝ exp(−x⁴/σ⁴)` scaled to unit
//! variance; the noise is `Q = N(0, I_d)`. The model family has sufficient
//! statistics `T(x) = (x₁⁴, …, x_d⁴, 1)` and NCE fits `θ ∈ ℝ^{d+1}` by logistic
//! classification of data against noise.
//!
//! Modules, from the bottom up:
//!
//! - [`numerics`]: log-gamma, adaptive quadrature, stable logistic functions,
//!   symmetric eigenvalues and a seedable random stream.
//! - [`dist`]: the quartic and Gaussian laws, samplers and log-density ratios.
//! - [`model`]: parameters, sufficient statistics and the true parameter θ*.
//! - [`nce`]: empirical loss, gradient and Hessian, the population Hessian at
//!   θ*, gradient descent and directional variance statistics.
//! - [`theory`]: distances, the Hessian norm bound, log-ratio moments and
//!   anti-concentration thresholds.
//! - [`harness`]: seeded experiments, linear fits and result files.
//! - [`cli`]: the `nce-lab` command.
//!
//! ```
//! use nce_lab::{model::theta_star, nce::empirical_loss, dist::*, numerics::RngStream};
//!
//! let d = 3;
//! let mut rng = RngStream::new(1, 0);
//! let data = ProductQuartic::new(d)?.sample_batch(200, &mut rng)?;
//! let noise = StandardGaussian::new(d)?.sample_batch(200, &mut rng)?;
//! let loss = empirical_loss(&theta_star(d)?, &data, &noise)?;
//! assert!(loss > 0.0 && loss < 1.0);
//! # Ok::<(), nce_lab::Error>(())
//! ```

pub mod cli;
pub mod dist;
pub mod error;
pub mod harness;
pub mod model;
pub mod nce;
pub mod numerics;
pub mod theory;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/quartic.md")]
    mod quartic {}
    #[doc = include_str!("../../../book/src/nce-loss.md")]
    mod nce_loss {}
    #[doc = include_str!("../../../book/src/flat-hessian.md")]
    mod flat_hessian {}
    #[doc = include_str!("../../../book/src/distances.md")]
    mod distances {}
    #[doc = include_str!("../../../book/src/anticoncentration.md")]
    mod anticoncentration {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
