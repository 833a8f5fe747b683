//! Predicted relations between in-distribution (`P`) and out-of-distribution
//! (`Q`) risks, and checks of the conditions under which they exist.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{invalid_dim, Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::risk::DecisionCov;
use crate::shiftmodel::{CovariancePair, ShiftParameters};
use crate::subspace::OrthonormalBasis;

/// Scalars `(a, b, c)` describing the limiting estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl AsymParams {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && b > 0.0 && b.is_finite() && c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(alloc::format!("need b, c > 0, got ({a}, {b}, {c})")));
        }
        Ok(Self { a, b, c })
    }
}

/// The eight covariance functionals at one value of `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalTuple {
    pub omega_p: f64,
    pub gamma_p: f64,
    pub lambda_p: f64,
    pub theta_p: f64,
    pub omega_q: f64,
    pub gamma_q: f64,
    pub lambda_q: f64,
    pub theta_q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityVerdict {
    pub holds: bool,
    pub rho: Option<f64>,
    pub u0: Option<f64>,
    /// Largest relative deviation from the required identities over the grid.
    pub max_deviation: f64,
}

/// Functionals in the shared eigenbasis, with `s_j`, `q_j` the spectra of
/// `Σ_P`, `Σ_Q` and `b_j` the coordinates of `β*`:
///
/// ```text
/// Ω_P = Σ s b²/d        Γ_P = Σ s² b²/((s+b)d)   Λ_P = Σ s³ b²/((s+b)²d)   Θ_P = Σ s²/((s+b)²d)
/// Ω_Q = Σ q b²/d        Γ_Q = Σ q s b²/((s+b)d)  Λ_Q = Σ q s² b²/((s+b)²d) Θ_Q = Σ q s/((s+b)²d)
/// ```
pub fn covariance_functionals(pair: &CovariancePair, beta_star: &Vector, b: f64) -> Result<FunctionalTuple> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::Domain(alloc::format!("b must be positive, got {b}")));
    }
    let coords = pair.to_eigen(beta_star)?;
    let s = pair.eigvals(crate::shiftmodel::Distribution::P);
    let q = pair.eigvals(crate::shiftmodel::Distribution::Q);
    let mut f = FunctionalTuple {
        omega_p: 0.0,
        gamma_p: 0.0,
        lambda_p: 0.0,
        theta_p: 0.0,
        omega_q: 0.0,
        gamma_q: 0.0,
        lambda_q: 0.0,
        theta_q: 0.0,
    };
    for j in 0..pair.dim() {
        let (sj, qj, e) = (s[j], q[j], coords[j] * coords[j]);
        let g = 1.0 / (sj + b);
        f.omega_p += sj * e;
        f.gamma_p += sj * sj * e * g;
        f.lambda_p += sj * sj * sj * e * g * g;
        f.theta_p += sj * sj * g * g;
        f.omega_q += qj * e;
        f.gamma_q += qj * sj * e * g;
        f.lambda_q += qj * sj * sj * e * g * g;
        f.theta_q += qj * sj * g * g;
    }
    let d = pair.dim() as f64;
    for v in [
        &mut f.omega_p,
        &mut f.gamma_p,
        &mut f.lambda_p,
        &mut f.theta_p,
        &mut f.omega_q,
        &mut f.gamma_q,
        &mut f.lambda_q,
        &mut f.theta_q,
    ] {
        *v /= d;
    }
    Ok(f)
}

/// Limiting decision covariances `(cov_P, cov_Q)` for a projector `Σ_P`:
///
/// ```text
/// cov_P = (r_Pσ², a r_Pσ²/(1+b), (a² r_Pσ² + c r_P)/(1+b)²)
/// cov_Q = (γμ r_Pσ², aγ r_Pσ²/(1+b), (a²γ r_Pσ² + cκ r_P)/(1+b)²)
/// ```
pub fn asymptotic_decision_cov(params: &AsymParams, shift: &ShiftParameters) -> Result<(DecisionCov, DecisionCov)> {
    shift.validate()?;
    let AsymParams { a, b, c } = *params;
    AsymParams::new(a, b, c)?;
    let ShiftParameters { gamma, mu, kappa, r_p, sigma_beta_sq: s2 } = *shift;
    let g = 1.0 + b;
    let cov_p = DecisionCov::new(r_p * s2, a * r_p * s2 / g, (a * a * r_p * s2 + c * r_p) / (g * g))?;
    let cov_q = DecisionCov::new(
        gamma * mu * r_p * s2,
        a * gamma * r_p * s2 / g,
        (a * a * gamma * r_p * s2 + c * kappa * r_p) / (g * g),
    )?;
    Ok((cov_p, cov_q))
}

/// Relative `|γ − κ|/γ` above which the squared-error relation does not exist.
pub const GAMMA_KAPPA_TOL: f64 = 1e-6;

/// `R_Q = γR_P + γ r_P σ_β² (μ − 1)`; requires `γ = κ`.
pub fn regression_relation(risk_p: f64, shift: &ShiftParameters) -> Result<f64> {
    if (shift.gamma - shift.kappa).abs() / shift.gamma > GAMMA_KAPPA_TOL {
        return Err(Error::RelationInapplicable(alloc::format!(
            "γ = {} and κ = {} differ",
            shift.gamma,
            shift.kappa
        )));
    }
    regression_relation_unchecked(risk_p, shift)
}

/// The affine map of [`regression_relation`] without the `γ = κ` check.
///
/// For models that are task-independent by construction (such as
/// `Σ_Q = τΠ_Q` with `β*` drawn independently of the covariances) the
/// plug-in `γ` differs from `κ` at finite `d` only through sampling noise
/// in `β*`; callers in that situation use this form.
pub fn regression_relation_unchecked(risk_p: f64, shift: &ShiftParameters) -> Result<f64> {
    if !(risk_p >= 0.0 && risk_p.is_finite()) {
        return Err(Error::Domain(alloc::format!("risk must be nonnegative, got {risk_p}")));
    }
    let ShiftParameters { gamma, mu, r_p, sigma_beta_sq, .. } = *shift;
    Ok(gamma * risk_p + gamma * r_p * sigma_beta_sq * (mu - 1.0))
}

fn sec_sq(t: f64) -> f64 {
    let c = libm::cos(t);
    1.0 / (c * c)
}

/// Solves `sec²(πR_Q) = (κμ/γ)(sec²(πR_P) − 1) + μ` for `R_Q ∈ [0, ½)`.
pub fn classification_relation(risk_p: f64, shift: &ShiftParameters) -> Result<f64> {
    if !(risk_p > 0.0 && risk_p < 0.5) {
        return Err(Error::Domain(alloc::format!("risk must lie in (0, 1/2), got {risk_p}")));
    }
    let rho = shift.kappa * shift.mu / shift.gamma;
    let s = rho * (sec_sq(PI * risk_p) - 1.0) + shift.mu;
    Ok(libm::acos(1.0 / libm::sqrt(s)) / PI)
}

/// Inverse of [`classification_relation`]: the `R_P` whose image is
/// `risk_q`. Fails when `risk_q` is below the image of `R_P → 0`.
pub fn classification_relation_inverse(risk_q: f64, shift: &ShiftParameters) -> Result<f64> {
    if !(0.0..0.5).contains(&risk_q) {
        return Err(Error::Domain(alloc::format!("risk must lie in [0, 1/2), got {risk_q}")));
    }
    let rho = shift.kappa * shift.mu / shift.gamma;
    let t = (sec_sq(PI * risk_q) - shift.mu) / rho;
    if t < 0.0 {
        return Err(Error::Domain(alloc::format!("R_Q = {risk_q} is below the relation's floor")));
    }
    Ok(libm::acos(1.0 / libm::sqrt(t + 1.0)) / PI)
}

/// Affine-relation diagnostics for the population ridge estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearityReport {
    /// `β*ᵀΠ_PΣ_QΠ_P⊥β*`; the relation is affine in `λ` iff this vanishes.
    pub cross_term: f64,
    pub slope: f64,
    pub intercept: f64,
    /// `tr(Π_PΣ_QΠ_P)/tr(Π_P)`.
    pub expected_slope: f64,
    pub expected_intercept: f64,
}

fn check_dense_inputs(beta_star: &Vector, u_p: &OrthonormalBasis, sigma_q: &Mat) -> Result<usize> {
    let d = beta_star.len();
    if u_p.ambient_dim() != d || sigma_q.nrows() != d || sigma_q.ncols() != d {
        return Err(invalid_dim!("β*, Π_P and Σ_Q must share dimension {d}"));
    }
    if !linalg::all_finite(sigma_q.iter()) || !linalg::all_finite(beta_star.iter()) {
        return Err(Error::NumericInput("non-finite Σ_Q or β*".into()));
    }
    Ok(d)
}

pub fn finite_dim_linearity(
    beta_star: &Vector,
    u_p: &OrthonormalBasis,
    sigma_q: &Mat,
    sigma_p_sq: f64,
    sigma_q_sq: f64,
) -> Result<LinearityReport> {
    check_dense_inputs(beta_star, u_p, sigma_q)?;
    let bp = u_p.project(beta_star);
    let bperp = beta_star - &bp;
    let energy_p = bp.norm_squared();
    if !(energy_p > 0.0) {
        return Err(Error::Degenerate("β* has no component in range(Π_P)".into()));
    }
    let sq_bp = sigma_q * &bp;
    let cross_term = sq_bp.dot(&bperp);
    let slope = sq_bp.dot(&bp) / energy_p;
    let total = beta_star.dot(&(sigma_q * beta_star));
    let intercept = total - slope * energy_p + sigma_q_sq - slope * sigma_p_sq;
    let u = u_p.columns();
    let restricted = linalg::at_b(u, &(sigma_q * u));
    let rank = u_p.rank() as f64;
    let expected_slope = restricted.trace() / rank;
    let expected_intercept = sigma_q.trace() - expected_slope * rank + sigma_q_sq - expected_slope * sigma_p_sq;
    Ok(LinearityReport { cross_term, slope, intercept, expected_slope, expected_intercept })
}

/// `(R_P, R_Q)` of `β = Π_Pβ*/(1+λ)` with `α = 1/(1+λ)`:
///
/// ```text
/// R_P = β*ᵀΠ_Pβ*(1 + α² − 2α) + σ_P²
/// R_Q = β*ᵀΣ_Qβ* + (α² − 2α)β*ᵀΠ_PΣ_QΠ_Pβ* − 2α β*ᵀΠ_PΣ_QΠ_P⊥β* + σ_Q²
/// ```
pub fn population_ridge_risks(
    beta_star: &Vector,
    u_p: &OrthonormalBasis,
    sigma_q: &Mat,
    sigma_p_sq: f64,
    sigma_q_sq: f64,
    lambda: f64,
) -> Result<(f64, f64)> {
    check_dense_inputs(beta_star, u_p, sigma_q)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(alloc::format!("λ must be nonnegative, got {lambda}")));
    }
    let alpha = 1.0 / (1.0 + lambda);
    let bp = u_p.project(beta_star);
    let bperp = beta_star - &bp;
    let sq_bp = sigma_q * &bp;
    let risk_p = bp.norm_squared() * (1.0 + alpha * alpha - 2.0 * alpha) + sigma_p_sq;
    let risk_q = beta_star.dot(&(sigma_q * beta_star)) + (alpha * alpha - 2.0 * alpha) * sq_bp.dot(&bp)
        - 2.0 * alpha * sq_bp.dot(&bperp)
        + sigma_q_sq;
    Ok((risk_p, risk_q))
}

/// 16 log-spaced points in `[1e-3, 1e3]`.
pub fn default_b_grid() -> Vec<f64> {
    linalg::logspace(1e-3, 1e3, 16)
}

/// Default relative tolerance of the monotonicity checks.
pub const MONOTONICITY_REL_TOL: f64 = 1e-8;

fn check_grid(b_grid: &[f64], rel_tol: f64) -> Result<()> {
    if b_grid.is_empty() || b_grid.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
        return Err(Error::Domain("b grid must be nonempty and positive".into()));
    }
    if !(rel_tol > 0.0) {
        return Err(Error::Domain("rel_tol must be positive".into()));
    }
    Ok(())
}

fn rel_dev(value: f64, target: f64) -> f64 {
    (value - target).abs() / target.abs().max(f64::MIN_POSITIVE)
}

/// Squared-error monotonicity: `Γ_Q = ρΓ_P`, `Λ_Q = ρΛ_P` and `Θ_Q = ρΘ_P`
/// for one `ρ > 0` across the grid. `ρ` is read off `Γ_Q/Γ_P` at the first
/// grid point.
pub fn monotonicity_check_regression(
    pair: &CovariancePair,
    beta_star: &Vector,
    b_grid: &[f64],
    rel_tol: f64,
) -> Result<MonotonicityVerdict> {
    check_grid(b_grid, rel_tol)?;
    let mut rho = None;
    let mut max_deviation: f64 = 0.0;
    for &b in b_grid {
        let f = covariance_functionals(pair, beta_star, b)?;
        if !(f.gamma_p > 0.0) || !(f.lambda_p > 0.0) || !(f.theta_p > 0.0) {
            return Err(Error::Degenerate(alloc::format!("P functionals vanish at b = {b}")));
        }
        let r = *rho.get_or_insert(f.gamma_q / f.gamma_p);
        for ratio in [f.gamma_q / f.gamma_p, f.lambda_q / f.lambda_p, f.theta_q / f.theta_p] {
            max_deviation = max_deviation.max(rel_dev(ratio, r));
        }
    }
    let rho = rho.expect("grid is nonempty");
    Ok(MonotonicityVerdict {
        holds: rho > 0.0 && max_deviation <= rel_tol,
        rho: Some(rho),
        u0: None,
        max_deviation,
    })
}

/// Misclassification monotonicity:
/// `Ω_QΘ_Q/Γ_Q² = ρ Ω_PΘ_P/Γ_P²` and `Ω_QΛ_Q/Γ_Q² = ρ Ω_PΛ_P/Γ_P² + u₀`
/// across the grid, with `(ρ, u₀)` read off the first grid point.
pub fn monotonicity_check_classification(
    pair: &CovariancePair,
    beta_star: &Vector,
    b_grid: &[f64],
    rel_tol: f64,
) -> Result<MonotonicityVerdict> {
    check_grid(b_grid, rel_tol)?;
    let mut params: Option<(f64, f64)> = None;
    let mut max_deviation: f64 = 0.0;
    for &b in b_grid {
        let f = covariance_functionals(pair, beta_star, b)?;
        if !(f.gamma_p > 0.0) || !(f.gamma_q > 0.0) {
            return Err(Error::Degenerate(alloc::format!("Γ vanishes at b = {b}")));
        }
        let theta_p = f.omega_p * f.theta_p / (f.gamma_p * f.gamma_p);
        let theta_q = f.omega_q * f.theta_q / (f.gamma_q * f.gamma_q);
        let lambda_p = f.omega_p * f.lambda_p / (f.gamma_p * f.gamma_p);
        let lambda_q = f.omega_q * f.lambda_q / (f.gamma_q * f.gamma_q);
        let (rho, u0) = *params.get_or_insert_with(|| {
            let rho = theta_q / theta_p;
            (rho, lambda_q - rho * lambda_p)
        });
        max_deviation = max_deviation.max(rel_dev(rho * theta_p, theta_q));
        max_deviation = max_deviation.max(rel_dev(rho * lambda_p + u0, lambda_q));
    }
    let (rho, u0) = params.expect("grid is nonempty");
    Ok(MonotonicityVerdict {
        holds: rho > 0.0 && max_deviation <= rel_tol,
        rho: Some(rho),
        u0: Some(u0),
        max_deviation,
    })
}

/// Standard normal CDF through `erfc`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// `max_u |½Φ(u/√2) − atan(eᵘ)/π|` over the grid.
pub fn probit_arctan_gap(u_grid: &[f64]) -> f64 {
    u_grid
        .iter()
        .map(|&u| (0.5 * normal_cdf(u / core::f64::consts::SQRT_2) - libm::atan(libm::exp(u)) / PI).abs())
        .fold(0.0, f64::max)
}
