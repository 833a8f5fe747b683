//! Numerics for relating in-distribution and out-of-distribution risk under
//! covariate shift.
//!
//! The crate is `no_std` (it needs `alloc`) and has no IO. It covers:
//!
//! * [`subspace`]: Haar-random bases, controlled-overlap subspace pairs,
//!   principal angles and the similarity / overlap scalars built on them.
//! * [`shiftmodel`]: simultaneously diagonalizable covariance pairs
//!   `(Σ_P, Σ_Q)`, the subspace shift `Σ_Q = τΠ_Q`, task-dependent shifts and
//!   the scalar shift descriptors `(γ, μ, κ, r_P, σ_β²)`.
//! * [`datagen`]: ground-truth coefficients, Gaussian covariates with `Σ/d`
//!   scaling and labels.
//! * [`estimators`]: ridge regression, Newton-solved ridge-penalized logistic
//!   regression and the population ridge estimator.
//! * [`risk`]: decision-function covariances, closed-form squared-error and
//!   misclassification risks, and Monte Carlo risk oracles.
//! * [`theory`]: predicted risk relations and the conditions under which they
//!   exist.
//! * [`inverse`]: denoising and compressed-sensing reconstruction risks.
//!
//! All randomness flows through [`Seed`], so every operation is a pure
//! function of its arguments.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod datagen;
pub mod error;
pub mod estimators;
pub mod inverse;
pub mod linalg;
pub mod risk;
pub mod seed;
pub mod shiftmodel;
pub mod subspace;
pub mod theory;

pub use error::{Error, Result};
pub use seed::Seed;

#[cfg(test)]
pub(crate) mod testutil;
