//! Covariance pairs `(Σ_P, Σ_Q)` sharing one eigenbasis, and the scalar
//! shift descriptors computed from them.
//!
//! `Σ_P = V diag(s) Vᵀ` with `s ∈ {0, 1}` (a projector) and
//! `Σ_Q = V diag(q) Vᵀ` with `q ≥ 0`. Everything downstream works on the
//! eigenvalue vectors after rotating vectors into the `V` basis, so no dense
//! `d × d` covariance is ever formed outside of tests.

use alloc::vec::Vec;

use crate::error::{invalid_dim, Error, Result};
use crate::linalg::{Mat, Vector};
use crate::seed::Seed;
use crate::subspace::{self, SubspacePairSpec};

/// Which of the two distributions an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Distribution {
    P,
    Q,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovariancePair {
    eigenbasis: Mat,
    eigvals_p: Vector,
    eigvals_q: Vector,
}

impl CovariancePair {
    /// Checks `VᵀV = I`, binary `eigvals_p` and nonnegative `eigvals_q`.
    pub fn new(eigenbasis: Mat, eigvals_p: Vector, eigvals_q: Vector) -> Result<Self> {
        let d = eigenbasis.nrows();
        if eigenbasis.ncols() != d || eigvals_p.len() != d || eigvals_q.len() != d || d == 0 {
            return Err(invalid_dim!("covariance pair needs a square basis and length-d spectra"));
        }
        subspace::OrthonormalBasis::new(eigenbasis.clone())?;
        if eigvals_p.iter().any(|s| *s != 0.0 && *s != 1.0) {
            return Err(Error::Covariance("Σ_P must be a projector (eigenvalues in {0, 1})".into()));
        }
        if eigvals_q.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
            return Err(Error::Covariance("Σ_Q eigenvalues must be finite and nonnegative".into()));
        }
        if eigvals_p.iter().all(|s| *s == 0.0) {
            return Err(Error::Covariance("Σ_P must have positive rank".into()));
        }
        Ok(Self { eigenbasis, eigvals_p, eigvals_q })
    }

    pub fn dim(&self) -> usize {
        self.eigenbasis.nrows()
    }

    pub fn eigenbasis(&self) -> &Mat {
        &self.eigenbasis
    }

    pub fn eigvals(&self, which: Distribution) -> &Vector {
        match which {
            Distribution::P => &self.eigvals_p,
            Distribution::Q => &self.eigvals_q,
        }
    }

    /// `d_P = rank(Σ_P)`.
    pub fn rank_p(&self) -> usize {
        self.eigvals_p.iter().filter(|s| **s == 1.0).count()
    }

    /// Coordinates `Vᵀv` in the shared eigenbasis.
    pub fn to_eigen(&self, v: &Vector) -> Result<Vector> {
        if v.len() != self.dim() {
            return Err(invalid_dim!("vector has length {}, expected {}", v.len(), self.dim()));
        }
        Ok(self.eigenbasis.transpose() * v)
    }

    pub fn from_eigen(&self, coords: &Vector) -> Vector {
        &self.eigenbasis * coords
    }

    /// Dense `V diag(λ) Vᵀ`. Only meant for small `d`.
    pub fn dense(&self, which: Distribution) -> Mat {
        let v = &self.eigenbasis;
        let scaled = v * Mat::from_diagonal(self.eigvals(which));
        scaled * v.transpose()
    }

    /// Copy with `Σ_Q` replaced.
    pub fn with_eigvals_q(&self, eigvals_q: Vector) -> Result<Self> {
        Self::new(self.eigenbasis.clone(), self.eigvals_p.clone(), eigvals_q)
    }

    /// `(Σ_P, Σ_P)`, the no-shift pair.
    pub fn without_shift(&self) -> Self {
        Self {
            eigenbasis: self.eigenbasis.clone(),
            eigvals_p: self.eigvals_p.clone(),
            eigvals_q: self.eigvals_p.clone(),
        }
    }
}

/// Scalar descriptors of a shift: `γ`, `μ`, `κ`, `r_P` and `σ_β²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftParameters {
    pub gamma: f64,
    pub mu: f64,
    pub kappa: f64,
    pub r_p: f64,
    pub sigma_beta_sq: f64,
}

impl ShiftParameters {
    pub fn new(gamma: f64, mu: f64, kappa: f64, r_p: f64, sigma_beta_sq: f64) -> Result<Self> {
        let p = Self { gamma, mu, kappa, r_p, sigma_beta_sq };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma > 0.0
            && self.kappa > 0.0
            && self.mu >= 1.0 - 1e-9
            && self.r_p > 0.0
            && self.r_p <= 1.0
            && self.sigma_beta_sq > 0.0
            && [self.gamma, self.mu, self.kappa, self.r_p, self.sigma_beta_sq].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(alloc::format!("invalid shift parameters {self:?}")))
        }
    }

    /// `κ / γ`.
    pub fn task_ratio(&self) -> f64 {
        self.kappa / self.gamma
    }
}

/// `Σ_P = Π_P` and `Σ_Q = τΠ_Q` in a Haar-random shared eigenbasis, with
/// `Π_P` on coordinates `0..d_P` and `Π_Q` on [`SubspacePairSpec::q_block`].
pub fn subspace_shift_model(spec: SubspacePairSpec, tau: f64, seed: Seed) -> Result<CovariancePair> {
    spec.validate()?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Domain(alloc::format!("τ must be positive, got {tau}")));
    }
    let v = subspace::haar_rotation(spec.d, seed)?;
    let mut s = Vector::zeros(spec.d);
    s.rows_mut(0, spec.d_p).fill(1.0);
    let mut q = Vector::zeros(spec.d);
    let block = spec.q_block();
    q.rows_mut(block.start, block.len()).fill(tau);
    Ok(CovariancePair { eigenbasis: v, eigvals_p: s, eigvals_q: q })
}

/// `‖Π_Pβ*‖² / d_P`, the realized per-coordinate energy of `β*` on the
/// support of `Σ_P`.
///
/// Passing this as `sigma_beta_sq` to [`shift_parameters`] makes the
/// projector identities `Γ_Q/Γ_P = γ` and `Ω_Q = γμΩ_P` exact at finite `d`.
pub fn realized_sigma_beta_sq(pair: &CovariancePair, beta_star: &Vector) -> Result<f64> {
    let b = pair.to_eigen(beta_star)?;
    let energy: f64 = b.iter().zip(pair.eigvals_p.iter()).map(|(b, s)| s * b * b).sum();
    Ok(energy / pair.rank_p() as f64)
}

/// Finite-`d` plug-ins `γ = β_PᵀΣ_Qβ_P/(d_Pσ_β²)`, `μ = β*ᵀΣ_Qβ*/β_PᵀΣ_Qβ_P`,
/// `κ = tr(Σ_QΠ_P)/d_P`, `r_P = d_P/d`, where `β_P = Π_Pβ*`.
pub fn shift_parameters(
    pair: &CovariancePair,
    beta_star: &Vector,
    sigma_beta_sq: f64,
) -> Result<ShiftParameters> {
    if !(sigma_beta_sq > 0.0 && sigma_beta_sq.is_finite()) {
        return Err(Error::Domain(alloc::format!("σ_β² must be positive, got {sigma_beta_sq}")));
    }
    let b = pair.to_eigen(beta_star)?;
    let d_p = pair.rank_p() as f64;
    let (mut restricted, mut total, mut trace) = (0.0, 0.0, 0.0);
    for ((bj, s), q) in b.iter().zip(pair.eigvals_p.iter()).zip(pair.eigvals_q.iter()) {
        let e = q * bj * bj;
        total += e;
        restricted += s * e;
        trace += s * q;
    }
    if !(restricted > 0.0) {
        return Err(Error::DegenerateShift);
    }
    Ok(ShiftParameters {
        gamma: restricted / (d_p * sigma_beta_sq),
        mu: total / restricted,
        kappa: trace / d_p,
        r_p: d_p / pair.dim() as f64,
        sigma_beta_sq,
    })
}

/// Range of exponents searched by [`task_dependent_model`].
pub const TASK_EXPONENT_RANGE: (f64, f64) = (-8.0, 8.0);

/// Shift whose `Σ_Q` is correlated (`κ < γ`) or anti-correlated (`κ > γ`)
/// with the ground-truth energy.
///
/// On the support of `Π_P`, with `b_j` the coordinates of `β*` in the shared
/// eigenbasis, sets `q_j ∝ (b_j² + ε₀)^s` with `ε₀ = 1e-8·σ̂²` and
/// `σ̂² = ‖Π_Pβ*‖²/d_P`. The exponent `s` is found by bisection on
/// [`TASK_EXPONENT_RANGE`] so that `κ/γ` hits `target_ratio`; a final global
/// scale sets `γ = target_gamma`. `Σ_Q` vanishes off the support, so `μ = 1`.
pub fn task_dependent_model(
    pair: &CovariancePair,
    beta_star: &Vector,
    target_ratio: f64,
    target_gamma: f64,
) -> Result<CovariancePair> {
    if !(target_ratio > 0.0 && target_ratio.is_finite() && target_gamma > 0.0 && target_gamma.is_finite()) {
        return Err(Error::Domain("target ratio and γ must be positive".into()));
    }
    let b = pair.to_eigen(beta_star)?;
    let sigma_sq = realized_sigma_beta_sq(pair, beta_star)?;
    if !(sigma_sq > 0.0) {
        return Err(Error::DegenerateShift);
    }
    let support: Vec<usize> = (0..pair.dim()).filter(|&j| pair.eigvals_p[j] == 1.0).collect();
    let eps0 = 1e-8 * sigma_sq;
    let log_energy: Vec<f64> = support.iter().map(|&j| libm::log(b[j] * b[j] + eps0)).collect();
    let energy: Vec<f64> = support.iter().map(|&j| b[j] * b[j]).collect();

    // Weights normalized by their maximum so large |s| does not overflow.
    let weights = |s: f64| -> Vec<f64> {
        let peak = log_energy.iter().map(|l| s * l).fold(f64::NEG_INFINITY, f64::max);
        log_energy.iter().map(|l| libm::exp(s * l - peak)).collect()
    };
    // κ/γ = σ̂² Σ q_j / Σ q_j b_j², independent of the scale of q.
    let ratio = |w: &[f64]| -> f64 {
        let sum: f64 = w.iter().sum();
        let weighted: f64 = w.iter().zip(&energy).map(|(w, e)| w * e).sum();
        sigma_sq * sum / weighted
    };

    let (lo_s, hi_s) = TASK_EXPONENT_RANGE;
    let exponent = if (target_ratio - 1.0).abs() <= 1e-15 {
        0.0
    } else {
        // κ/γ decreases in s.
        let r_lo = ratio(&weights(lo_s));
        let r_hi = ratio(&weights(hi_s));
        if !(target_ratio <= r_lo && target_ratio >= r_hi) {
            return Err(Error::UnreachableRatio { target: target_ratio, low: r_hi, high: r_lo });
        }
        let (mut a, mut c) = (lo_s, hi_s);
        for _ in 0..200 {
            let mid = 0.5 * (a + c);
            let r = ratio(&weights(mid));
            if (r / target_ratio - 1.0).abs() < 1e-13 {
                a = mid;
                c = mid;
                break;
            }
            if r > target_ratio {
                a = mid;
            } else {
                c = mid;
            }
        }
        0.5 * (a + c)
    };

    let w = weights(exponent);
    let d_p = support.len() as f64;
    let gamma_unscaled: f64 = w.iter().zip(&energy).map(|(w, e)| w * e).sum::<f64>() / (d_p * sigma_sq);
    let scale = target_gamma / gamma_unscaled;
    let mut q = Vector::zeros(pair.dim());
    for (&j, w) in support.iter().zip(&w) {
        q[j] = if exponent == 0.0 { target_gamma } else { w * scale };
    }
    pair.with_eigvals_q(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::sample_beta;
    use crate::testutil::assert_close;

    fn fig2_pair(seed: u64) -> CovariancePair {
        let spec = SubspacePairSpec::new(800, 720, 640, 560).unwrap();
        subspace_shift_model(spec, 2.0, Seed(seed)).unwrap()
    }

    #[test]
    fn fig2_kappa_is_exact() {
        let pair = fig2_pair(1);
        let beta = sample_beta(800, 1.0, Seed(2)).unwrap();
        let p = shift_parameters(&pair, &beta.beta_star, 1.0).unwrap();
        assert_close(p.kappa, 2.0 * 560.0 / 720.0, 1e-12);
        assert_close(p.r_p, 0.9, 1e-15);
        // Concentration around τ d_PQ/d_P ≈ 1.56 and d_Q/d_PQ ≈ 1.14.
        assert!((p.gamma - 1.5556).abs() < 0.2, "{p:?}");
        assert!((p.mu - 8.0 / 7.0).abs() < 0.05, "{p:?}");
        let sigma_hat = realized_sigma_beta_sq(&pair, &beta.beta_star).unwrap();
        let q = shift_parameters(&pair, &beta.beta_star, sigma_hat).unwrap();
        assert!((q.gamma - 1.5556).abs() < 0.1, "{q:?}");
    }

    #[test]
    fn identity_shift() {
        let spec = SubspacePairSpec::new(60, 40, 40, 40).unwrap();
        let pair = subspace_shift_model(spec, 1.0, Seed(3)).unwrap();
        assert_eq!(pair.eigvals(Distribution::P), pair.eigvals(Distribution::Q));
        let beta = sample_beta(60, 1.0, Seed(4)).unwrap().beta_star;
        let p = shift_parameters(&pair, &beta, 1.0).unwrap();
        assert_eq!(p.mu, 1.0);
        assert_eq!(p.kappa, 1.0);
        assert!((p.gamma - 1.0).abs() < 3.0 / libm::sqrt(40.0));
        let p = shift_parameters(&pair, &beta, realized_sigma_beta_sq(&pair, &beta).unwrap()).unwrap();
        assert_close(p.gamma, 1.0, 1e-12);
    }

    #[test]
    fn disjoint_supports_have_zero_trace() {
        let spec = SubspacePairSpec::new(20, 8, 8, 0).unwrap();
        let pair = subspace_shift_model(spec, 3.0, Seed(5)).unwrap();
        let trace: f64 = pair.eigvals(Distribution::P).dot(pair.eigvals(Distribution::Q));
        assert_eq!(trace, 0.0);
        let beta = sample_beta(20, 1.0, Seed(6)).unwrap().beta_star;
        assert_eq!(shift_parameters(&pair, &beta, 1.0), Err(Error::DegenerateShift));
    }

    #[test]
    fn shift_parameters_converge_over_d() {
        // Deviation from the limits shrinks roughly like d^{-1/2}.
        let mut devs = Vec::new();
        for &d in &[100usize, 400] {
            let spec = SubspacePairSpec::new(d, 9 * d / 10, 8 * d / 10, 7 * d / 10).unwrap();
            let mut dev = 0.0;
            for s in 0..8 {
                let pair = subspace_shift_model(spec, 2.0, Seed(100 + s)).unwrap();
                let beta = sample_beta(d, 1.0, Seed(200 + s)).unwrap().beta_star;
                let p = shift_parameters(&pair, &beta, 1.0).unwrap();
                dev += (p.gamma - 2.0 * 7.0 / 9.0).abs() + (p.mu - 8.0 / 7.0).abs();
            }
            devs.push(dev / 8.0);
        }
        assert!(devs[1] < devs[0], "{devs:?}");
    }

    #[test]
    fn task_dependent_ratios() {
        let pair = fig2_pair(7);
        let beta = sample_beta(800, 1.0, Seed(8)).unwrap().beta_star;
        let sigma_hat = realized_sigma_beta_sq(&pair, &beta).unwrap();
        let gamma0 = shift_parameters(&pair, &beta, sigma_hat).unwrap().gamma;
        for &target in &[5.0, 0.2, 1.0] {
            let shifted = task_dependent_model(&pair, &beta, target, gamma0).unwrap();
            assert_eq!(shifted.eigvals(Distribution::P), pair.eigvals(Distribution::P));
            let p = shift_parameters(&shifted, &beta, sigma_hat).unwrap();
            assert!((p.task_ratio() - target).abs() <= 1e-3, "{target}: {p:?}");
            assert!((p.task_ratio() / target - 1.0).abs() <= 5e-3);
            assert!((p.gamma - gamma0).abs() <= 1e-6);
            assert_close(p.mu, 1.0, 1e-9);
            assert!(shifted.eigvals(Distribution::Q).iter().all(|q| *q >= 0.0));
        }
        let flat = task_dependent_model(&pair, &beta, 1.0, gamma0).unwrap();
        let support: Vec<f64> =
            flat.eigvals(Distribution::Q).iter().copied().filter(|q| *q > 0.0).collect();
        assert_eq!(support.len(), 720);
        assert!(support.iter().all(|q| *q == support[0]));
        let p = shift_parameters(&flat, &beta, sigma_hat).unwrap();
        assert_close(p.kappa, p.gamma, 1e-12);
    }

    #[test]
    fn task_dependent_unreachable() {
        let spec = SubspacePairSpec::new(10, 4, 4, 4).unwrap();
        let pair = subspace_shift_model(spec, 1.0, Seed(1)).unwrap();
        let beta = sample_beta(10, 1.0, Seed(2)).unwrap().beta_star;
        let err = task_dependent_model(&pair, &beta, 1e9, 1.0).unwrap_err();
        assert!(matches!(err, Error::UnreachableRatio { .. }));
    }

    #[test]
    fn rejects_invalid_pairs() {
        let v = Mat::identity(3, 3);
        let ok = Vector::from_vec(alloc::vec![1.0, 0.0, 1.0]);
        assert!(CovariancePair::new(v.clone(), Vector::from_vec(alloc::vec![0.5, 0.0, 1.0]), ok.clone()).is_err());
        assert!(CovariancePair::new(v.clone(), ok.clone(), Vector::from_vec(alloc::vec![-1.0, 0.0, 1.0])).is_err());
        assert!(CovariancePair::new(v * 2.0, ok.clone(), ok.clone()).is_err());
    }
}
