//! Ridge-penalized empirical risk minimization.
//!
//! Every estimator minimizes `Σ ℓ(y_i, x_iᵀβ) + (λ/2)‖β‖²` with either the
//! squared loss `½(y − z)²` or the logistic loss `log(1 + exp(−yz))`.

use alloc::vec::Vec;

use crate::datagen::{Dataset, GroundTruth};
use crate::error::{invalid_dim, Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::subspace::OrthonormalBasis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Loss {
    Squared,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErmConfig {
    pub loss: Loss,
    pub lambda: f64,
    /// Stop once `‖∇‖ ≤ tol·(1 + ‖β‖)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl ErmConfig {
    pub const DEFAULT_TOL: f64 = 1e-10;
    pub const DEFAULT_MAX_ITER: usize = 100;

    pub fn new(loss: Loss, lambda: f64) -> Self {
        Self { loss, lambda, tol: Self::DEFAULT_TOL, max_iter: Self::DEFAULT_MAX_ITER }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Domain(alloc::format!("λ must be positive, got {}", self.lambda)));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Domain("tol and max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub beta_hat: Vector,
    pub final_grad_norm: f64,
    pub iterations: usize,
    /// False when `max_iter` ran out before the gradient tolerance was met.
    pub converged: bool,
}

fn check_inputs(data: &Dataset, lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(alloc::format!("λ must be positive, got {lambda}")));
    }
    if data.x.nrows() != data.y.len() {
        return Err(invalid_dim!("X has {} rows, y has {} entries", data.x.nrows(), data.y.len()));
    }
    if !linalg::all_finite(data.x.iter()) || !linalg::all_finite(data.y.iter()) {
        return Err(Error::NumericInput("dataset has non-finite entries".into()));
    }
    Ok(())
}

fn squared_gradient(data: &Dataset, lambda: f64, beta: &Vector) -> Vector {
    let r = &data.x * beta - &data.y;
    data.x.transpose() * r + beta * lambda
}

/// `(XᵀX + λI)⁻¹Xᵀy`, through the `n × n` dual system when `n < d`.
pub fn ridge_fit(data: &Dataset, lambda: f64) -> Result<FittedModel> {
    check_inputs(data, lambda)?;
    let (n, d) = (data.n(), data.dim());
    let beta = if n >= d {
        let mut gram = linalg::at_b(&data.x, &data.x);
        for i in 0..d {
            gram[(i, i)] += lambda;
        }
        linalg::spd_solve(gram, &(data.x.transpose() * &data.y))?
    } else {
        let mut gram = &data.x * data.x.transpose();
        for i in 0..n {
            gram[(i, i)] += lambda;
        }
        data.x.transpose() * linalg::spd_solve(gram, &data.y)?
    };
    let grad = squared_gradient(data, lambda, &beta).norm();
    Ok(FittedModel { beta_hat: beta, final_grad_norm: grad, iterations: 1, converged: true })
}

/// Ridge solutions for many `λ` from one eigendecomposition of `XᵀX`.
#[derive(Debug, Clone)]
pub struct RidgePath {
    gram: Mat,
    eigvecs: Mat,
    eigvals: Vector,
    xty: Vector,
    /// `Vᵀ Xᵀ y`.
    rotated: Vector,
}

impl RidgePath {
    pub fn new(data: &Dataset) -> Result<Self> {
        check_inputs(data, 1.0)?;
        let gram = linalg::at_b(&data.x, &data.x);
        let eig = gram.clone().symmetric_eigen();
        let xty = data.x.transpose() * &data.y;
        let rotated = eig.eigenvectors.transpose() * &xty;
        Ok(Self { gram, eigvecs: eig.eigenvectors, eigvals: eig.eigenvalues, xty, rotated })
    }

    pub fn fit(&self, lambda: f64) -> Result<FittedModel> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(alloc::format!("λ must be positive, got {lambda}")));
        }
        let coef = self.rotated.zip_map(&self.eigvals, |r, e| r / (e.max(0.0) + lambda));
        let beta = &self.eigvecs * coef;
        let grad = (&self.gram * &beta + &beta * lambda - &self.xty).norm();
        Ok(FittedModel { beta_hat: beta, final_grad_norm: grad, iterations: 1, converged: true })
    }
}

/// `log(1 + eᵗ)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + libm::log1p(libm::exp(-t))
    } else {
        libm::log1p(libm::exp(t))
    }
}

/// `1 / (1 + e⁻ᵗ)`.
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + libm::exp(-t))
    } else {
        let e = libm::exp(t);
        e / (1.0 + e)
    }
}

/// Objective value `Σℓ(y_i, x_iᵀβ) + (λ/2)‖β‖²`.
pub fn erm_objective(data: &Dataset, loss: Loss, lambda: f64, beta: &Vector) -> f64 {
    let z = &data.x * beta;
    let data_term: f64 = match loss {
        Loss::Squared => z.iter().zip(data.y.iter()).map(|(z, y)| 0.5 * (y - z) * (y - z)).sum(),
        Loss::Logistic => z.iter().zip(data.y.iter()).map(|(z, y)| softplus(-y * z)).sum(),
    };
    data_term + 0.5 * lambda * beta.norm_squared()
}

/// Gradient of [`erm_objective`].
pub fn erm_gradient(data: &Dataset, loss: Loss, lambda: f64, beta: &Vector) -> Vector {
    match loss {
        Loss::Squared => squared_gradient(data, lambda, beta),
        Loss::Logistic => {
            let z = &data.x * beta;
            let w = z.zip_map(&data.y, |z, y| -y * sigmoid(-y * z));
            data.x.transpose() * w + beta * lambda
        }
    }
}

/// Hessian `XᵀWX + λI`.
fn hessian(data: &Dataset, loss: Loss, lambda: f64, beta: &Vector) -> Mat {
    let mut h = match loss {
        Loss::Squared => linalg::at_b(&data.x, &data.x),
        Loss::Logistic => {
            let z = &data.x * beta;
            let mut weighted = data.x.clone();
            for (i, zi) in z.iter().enumerate() {
                let p = sigmoid(*zi);
                weighted.row_mut(i).scale_mut(p * (1.0 - p));
            }
            linalg::at_b(&weighted, &data.x)
        }
    };
    for i in 0..h.nrows() {
        h[(i, i)] += lambda;
    }
    h
}

pub fn erm_fit(data: &Dataset, config: &ErmConfig) -> Result<FittedModel> {
    erm_fit_from(data, config, None)
}

/// [`erm_fit`] started from `init` (zero when `None`).
///
/// Damped Newton: the Newton direction from a Cholesky solve, step halved
/// until the objective decreases. If the Hessian factorization fails the
/// iteration falls back to gradient descent with an Armijo line search.
pub fn erm_fit_from(data: &Dataset, config: &ErmConfig, init: Option<&Vector>) -> Result<FittedModel> {
    config.validate()?;
    check_inputs(data, config.lambda)?;
    if config.loss == Loss::Logistic && data.y.iter().any(|y| *y != 1.0 && *y != -1.0) {
        return Err(Error::Domain("logistic loss needs labels in {-1, +1}".into()));
    }
    let d = data.dim();
    let mut beta = match init {
        Some(b) if b.len() != d => return Err(invalid_dim!("initial point has length {}, expected {d}", b.len())),
        Some(b) => b.clone(),
        None => Vector::zeros(d),
    };
    let (loss, lambda) = (config.loss, config.lambda);
    let mut obj = erm_objective(data, loss, lambda, &beta);
    let mut grad = erm_gradient(data, loss, lambda, &beta);
    let mut iterations = 0;
    while iterations < config.max_iter {
        let gnorm = grad.norm();
        if gnorm <= config.tol * (1.0 + beta.norm()) {
            return Ok(FittedModel { beta_hat: beta, final_grad_norm: gnorm, iterations, converged: true });
        }
        iterations += 1;
        let newton = hessian(data, loss, lambda, &beta).cholesky().map(|c| c.solve(&grad));
        let (direction, armijo) = match newton {
            Some(step) => (-step, false),
            None => (-grad.clone(), true),
        };
        let slope = grad.dot(&direction);
        let mut t = 1.0;
        let mut accepted = false;
        // Near the optimum the decrease falls below one ulp of the objective;
        // a step within rounding of `obj` still counts if the gradient shrinks.
        let rounding = 1e-13 * obj.abs().max(1.0);
        for _ in 0..60 {
            let candidate = &beta + &direction * t;
            let value = erm_objective(data, loss, lambda, &candidate);
            let enough = if armijo {
                value <= obj + 1e-4 * t * slope
            } else {
                value <= obj
                    || (value <= obj + rounding && erm_gradient(data, loss, lambda, &candidate).norm() < gnorm)
            };
            if enough {
                beta = candidate;
                obj = value;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        grad = erm_gradient(data, loss, lambda, &beta);
        if !accepted {
            // No decrease is representable any more; report where we are.
            let gnorm = grad.norm();
            let converged = gnorm <= config.tol * (1.0 + beta.norm());
            return Ok(FittedModel { beta_hat: beta, final_grad_norm: gnorm, iterations, converged });
        }
    }
    let gnorm = grad.norm();
    let converged = gnorm <= config.tol * (1.0 + beta.norm());
    Ok(FittedModel { beta_hat: beta, final_grad_norm: gnorm, iterations, converged })
}

/// Fits along a `λ` grid from the largest value down, warm-starting each
/// solve at the previous solution. Results come back in the order of
/// `lambdas`.
pub fn erm_path(data: &Dataset, loss: Loss, lambdas: &[f64]) -> Result<Vec<FittedModel>> {
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|a, b| lambdas[*b].total_cmp(&lambdas[*a]));
    let mut out: Vec<Option<FittedModel>> = (0..lambdas.len()).map(|_| None).collect();
    let mut warm: Option<Vector> = None;
    for i in order {
        let fit = erm_fit_from(data, &ErmConfig::new(loss, lambdas[i]), warm.as_ref())?;
        warm = Some(fit.beta_hat.clone());
        out[i] = Some(fit);
    }
    Ok(out.into_iter().map(|f| f.expect("every index visited")).collect())
}

/// `Π_Pβ*/(1 + λ)`.
pub fn population_ridge(gt: &GroundTruth, u_p: &OrthonormalBasis, lambda: f64) -> Result<Vector> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(alloc::format!("λ must be nonnegative, got {lambda}")));
    }
    if u_p.ambient_dim() != gt.dim() {
        return Err(invalid_dim!("basis lives in R^{}, β* in R^{}", u_p.ambient_dim(), gt.dim()));
    }
    Ok(u_p.project(&gt.beta_star) / (1.0 + lambda))
}
