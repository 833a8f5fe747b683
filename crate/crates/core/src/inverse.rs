//! Denoising and compressed sensing of signals on a known subspace.
//!
//! Training signals are `x = U_P c` and test signals `x = U_Q c` with
//! `c ~ (0, I)`; observations carry additive noise of variance `σ_P²`
//! (resp. `σ_Q²`) per coordinate. Risks are `E‖x − x̂‖²/d_P` (resp. `/d_Q`).

use alloc::vec::Vec;

use crate::error::{invalid_dim, Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::seed::Seed;
use crate::subspace::{overlap_coefficient, principal_angles, OrthonormalBasis};

#[derive(Debug, Clone, PartialEq)]
pub struct InverseProblem {
    pub u_p: OrthonormalBasis,
    pub u_q: OrthonormalBasis,
    pub sigma_p_sq: f64,
    pub sigma_q_sq: f64,
    pub lambda: f64,
}

impl InverseProblem {
    pub fn new(u_p: OrthonormalBasis, u_q: OrthonormalBasis, sigma_p_sq: f64, sigma_q_sq: f64, lambda: f64) -> Result<Self> {
        let p = Self { u_p, u_q, sigma_p_sq, sigma_q_sq, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.u_p.ambient_dim() != self.u_q.ambient_dim() {
            return Err(invalid_dim!(
                "U_P lives in R^{}, U_Q in R^{}",
                self.u_p.ambient_dim(),
                self.u_q.ambient_dim()
            ));
        }
        for (name, v) in [("σ_P²", self.sigma_p_sq), ("σ_Q²", self.sigma_q_sq), ("λ", self.lambda)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Domain(alloc::format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn d_p(&self) -> usize {
        self.u_p.rank()
    }

    pub fn d_q(&self) -> usize {
        self.u_q.rank()
    }

    /// Overlap `a = ‖cos θ‖²/d_Q` of the two signal subspaces.
    pub fn overlap(&self) -> Result<f64> {
        overlap_coefficient(&principal_angles(&self.u_p, &self.u_q)?, self.d_q())
    }

    /// `1/(1 + σ_P² + λ)`.
    pub fn alpha(&self) -> f64 {
        1.0 / (1.0 + self.sigma_p_sq + self.lambda)
    }

    /// `|R_Q − aR_P − (1−a) − α²((d_P/d_Q)σ_Q² − aσ_P²)|`.
    pub fn relation_residual(&self, risk_p: f64, risk_q: f64, a: f64) -> f64 {
        let alpha = self.alpha();
        let ratio = self.d_p() as f64 / self.d_q() as f64;
        (risk_q - a * risk_p - (1.0 - a) - alpha * alpha * (ratio * self.sigma_q_sq - a * self.sigma_p_sq)).abs()
    }
}

/// The denoiser `x̂ = α Π_P y`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseOperator {
    pub alpha: f64,
    pub u_p: OrthonormalBasis,
}

impl DenoiseOperator {
    pub fn new(problem: &InverseProblem) -> Self {
        Self { alpha: problem.alpha(), u_p: problem.u_p.clone() }
    }

    pub fn apply(&self, y: &Vector) -> Vector {
        self.u_p.project(y) * self.alpha
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseRisks {
    pub risk_p: f64,
    pub risk_q: f64,
    pub alpha: f64,
    pub overlap: f64,
}

/// `R_P = (1−α)² + α²σ_P²` and `R_Q = 1 + (α²−2α)a + α²σ_Q² d_P/d_Q`.
pub fn denoise_risks(problem: &InverseProblem) -> Result<InverseRisks> {
    problem.validate()?;
    let alpha = problem.alpha();
    let a = problem.overlap()?;
    let ratio = problem.d_p() as f64 / problem.d_q() as f64;
    let risk_p = (1.0 - alpha) * (1.0 - alpha) + alpha * alpha * problem.sigma_p_sq;
    let risk_q = 1.0 + (alpha * alpha - 2.0 * alpha) * a + alpha * alpha * problem.sigma_q_sq * ratio;
    Ok(InverseRisks { risk_p, risk_q, alpha, overlap: a })
}

/// Residual of the exact denoising relation
/// `R_Q = aR_P + (1 − a) + α²((d_P/d_Q)σ_Q² − aσ_P²)`.
pub fn denoise_relation_residual(problem: &InverseProblem) -> Result<f64> {
    let r = denoise_risks(problem)?;
    Ok(problem.relation_residual(r.risk_p, r.risk_q, r.overlap))
}

/// `n × d` matrix of i.i.d. `N(0, 1/n)` entries.
pub fn gaussian_measurement(n: usize, d: usize, seed: Seed) -> Result<Mat> {
    if n == 0 || d == 0 {
        return Err(invalid_dim!("measurement matrix needs n, d >= 1, got {n} x {d}"));
    }
    Ok(linalg::standard_normal_matrix(n, d, &mut seed.rng()) / libm::sqrt(n as f64))
}

/// Regularized least-squares reconstruction `W* = U_P S U_PᵀAᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CSOperator {
    /// `1/(σ_P² + λ)`; infinite when both vanish.
    pub eta: f64,
    /// `ηI − η²M(I + ηM)⁻¹`, computed as `((σ_P² + λ)I + M)⁻¹`.
    pub s: Mat,
    pub a: Mat,
    /// `M = U_PᵀAᵀAU_P`.
    pub m: Mat,
}

impl CSOperator {
    /// `x̂ = W*y`.
    pub fn reconstruct(&self, u_p: &OrthonormalBasis, y: &Vector) -> Vector {
        let coef = &self.s * (u_p.columns().transpose() * (self.a.transpose() * y));
        u_p.columns() * coef
    }
}

pub fn cs_operator(a: &Mat, problem: &InverseProblem) -> Result<CSOperator> {
    problem.validate()?;
    let d_p = problem.d_p();
    if a.ncols() != problem.u_p.ambient_dim() {
        return Err(invalid_dim!("A has {} columns, signals live in R^{}", a.ncols(), problem.u_p.ambient_dim()));
    }
    if d_p > a.nrows() || problem.d_q() > a.nrows() {
        return Err(invalid_dim!("need d_P, d_Q <= n = {}", a.nrows()));
    }
    let a_up = a * problem.u_p.columns();
    let m = linalg::at_b(&a_up, &a_up);
    let eps = problem.sigma_p_sq + problem.lambda;
    let mut shifted = m.clone();
    for i in 0..d_p {
        shifted[(i, i)] += eps;
    }
    let chol = shifted
        .cholesky()
        .ok_or_else(|| Error::Numeric("(σ_P² + λ)I + M is singular".into()))?;
    let s = chol.inverse();
    let s = (&s + s.transpose()) * 0.5;
    Ok(CSOperator { eta: 1.0 / eps, s, a: a.clone(), m })
}

/// Exact finite-`n` risks of the compressed-sensing reconstruction:
///
/// ```text
/// R_P = (‖I − SM‖_F² + σ_P² tr(SᵀSM)) / d_P
/// R_Q = (‖U_PᵀU_Q − S U_PᵀAᵀAU_Q‖_F² − ‖U_PᵀU_Q‖_F² + d_Q + σ_Q² tr(SᵀSM)) / d_Q
/// ```
pub fn cs_risks(op: &CSOperator, problem: &InverseProblem) -> Result<InverseRisks> {
    problem.validate()?;
    let (d_p, d_q) = (problem.d_p(), problem.d_q());
    if op.s.nrows() != d_p || op.a.ncols() != problem.u_p.ambient_dim() {
        return Err(invalid_dim!("operator does not match the problem dimensions"));
    }
    let a_up = &op.a * problem.u_p.columns();
    let a_uq = &op.a * problem.u_q.columns();
    let n_pq = linalg::at_b(&a_up, &a_uq);
    let c = linalg::at_b(problem.u_p.columns(), problem.u_q.columns());
    let sm = &op.s * &op.m;
    let noise_gain = (op.s.transpose() * &sm).trace();
    let bias_p = (Mat::identity(d_p, d_p) - &sm).norm_squared();
    let risk_p = (bias_p + problem.sigma_p_sq * noise_gain) / d_p as f64;
    let bias_q = (&c - &op.s * n_pq).norm_squared();
    let risk_q = (bias_q - c.norm_squared() + d_q as f64 + problem.sigma_q_sq * noise_gain) / d_q as f64;
    Ok(InverseRisks { risk_p, risk_q, alpha: problem.alpha(), overlap: problem.overlap()? })
}

/// Residual of the denoising relation evaluated at the exact
/// compressed-sensing risks.
pub fn cs_relation_residual(op: &CSOperator, problem: &InverseProblem) -> Result<f64> {
    let r = cs_risks(op, problem)?;
    Ok(problem.relation_residual(r.risk_p, r.risk_q, r.overlap))
}

/// `max_{i<j} |⟨Au_i, Au_j⟩ − ⟨u_i, u_j⟩|` over distinct pairs of unit
/// vectors (the squared norm `|‖Au‖² − 1|` when only one vector is given).
pub fn inner_product_preservation_stats(a: &Mat, vectors: &[Vector]) -> Result<f64> {
    if vectors.is_empty() {
        return Err(invalid_dim!("need at least one vector"));
    }
    for v in vectors {
        if v.len() != a.ncols() {
            return Err(invalid_dim!("vector has length {}, A has {} columns", v.len(), a.ncols()));
        }
        if (v.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::Domain("vectors must be unit norm".into()));
        }
    }
    let images: Vec<Vector> = vectors.iter().map(|v| a * v).collect();
    if vectors.len() == 1 {
        return Ok((images[0].norm_squared() - 1.0).abs());
    }
    let mut worst: f64 = 0.0;
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            worst = worst.max((images[i].dot(&images[j]) - vectors[i].dot(&vectors[j])).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspace::{haar_basis, overlapping_pair, SubspacePairSpec};
    use crate::testutil::assert_close;
    use proptest::prelude::*;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    #[allow(clippy::too_many_arguments)]
    fn problem(d: usize, d_p: usize, d_q: usize, d_pq: usize, sp: f64, sq: f64, lambda: f64, seed: u64) -> InverseProblem {
        let spec = SubspacePairSpec::new(d, d_p, d_q, d_pq).unwrap();
        let (u_p, u_q) = overlapping_pair(spec, Seed(seed)).unwrap();
        InverseProblem::new(u_p, u_q, sp, sq, lambda).unwrap()
    }

    #[test]
    fn denoise_closed_forms() {
        let p = problem(50, 10, 10, 5, 0.0, 0.0, 0.0, 1);
        let r = denoise_risks(&p).unwrap();
        assert_eq!(r.alpha, 1.0);
        assert_eq!(r.risk_p, 0.0);
        assert_close(r.risk_q, 1.0 - r.overlap, 1e-14);
        assert_close(r.overlap, 0.5, 1e-12);

        let same = InverseProblem::new(p.u_p.clone(), p.u_p.clone(), 0.3, 0.3, 0.2).unwrap();
        let r = denoise_risks(&same).unwrap();
        assert_close(r.overlap, 1.0, 1e-12);
        assert_close(r.risk_q, r.risk_p, 1e-12);

        let snr1 = problem(50, 10, 10, 5, 1.0, 1.0, 0.0, 2);
        let r = denoise_risks(&snr1).unwrap();
        assert_eq!(r.alpha, 0.5);
        assert_eq!(r.risk_p, 0.5);
    }

    #[test]
    fn denoise_operator_matches_mc() {
        let p = problem(30, 6, 8, 3, 0.2, 0.4, 0.5, 3);
        let op = DenoiseOperator::new(&p);
        let mut rng = Seed(4).rng();
        let (mut sp, mut sq) = (0.0, 0.0);
        let draws = 20_000;
        let noise = |rng: &mut crate::seed::Rng, s2: f64| {
            Vector::from_iterator(30, (0..30).map(|_| libm::sqrt(s2) * rng.sample::<f64, _>(StandardNormal)))
        };
        for _ in 0..draws {
            let c = Vector::from_iterator(6, (0..6).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let x = p.u_p.columns() * c;
            sp += (op.apply(&(&x + noise(&mut rng, 0.2))) - &x).norm_squared() / 6.0;
            let c = Vector::from_iterator(8, (0..8).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let x = p.u_q.columns() * c;
            sq += (op.apply(&(&x + noise(&mut rng, 0.4))) - &x).norm_squared() / 8.0;
        }
        let r = denoise_risks(&p).unwrap();
        assert!((sp / draws as f64 - r.risk_p).abs() < 0.02, "{} {}", sp / draws as f64, r.risk_p);
        assert!((sq / draws as f64 - r.risk_q).abs() < 0.02, "{} {}", sq / draws as f64, r.risk_q);
    }

    #[test]
    fn denoise_sweeps() {
        let high = problem(100, 20, 20, 10, 0.01, 0.01, 0.0, 5);
        let low = problem(100, 20, 20, 0, 1.0, 1.0, 0.0, 6);
        let mut curves = Vec::new();
        for p in [high, low] {
            let (mut rp, mut rq) = (Vec::new(), Vec::new());
            for lambda in linalg::logspace(1e-3, 1e2, 50) {
                let q = InverseProblem { lambda, ..p.clone() };
                assert!(denoise_relation_residual(&q).unwrap() <= 1e-12);
                let r = denoise_risks(&q).unwrap();
                rp.push(r.risk_p);
                rq.push(r.risk_q);
            }
            curves.push(linalg::affine_fit(&rp, &rq).unwrap().rms_residual);
        }
        assert!(curves[0] <= 1e-3, "{curves:?}");
        assert!(curves[1] > 1e-2, "{curves:?}");
    }

    #[test]
    fn measurement_statistics() {
        let a = gaussian_measurement(400, 30, Seed(7)).unwrap();
        assert_eq!(a, gaussian_measurement(400, 30, Seed(7)).unwrap());
        let var = a.norm_squared() / (400.0 * 30.0);
        // Var of the sample variance of N(0, 1/n) over N entries is 2/(n² N).
        let se = libm::sqrt(2.0 / (400.0 * 400.0 * 400.0 * 30.0));
        assert!((var - 1.0 / 400.0).abs() <= 3.0 * se, "{var}");

        let u = haar_basis(30, 1, Seed(8)).unwrap().into_columns().column(0).into_owned();
        let norms: Vec<f64> = (0..1000).map(|s| (gaussian_measurement(50, 30, Seed(100 + s)).unwrap() * &u).norm_squared()).collect();
        let mean = norms.iter().sum::<f64>() / 1000.0;
        let sd = libm::sqrt(norms.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 999.0);
        assert!((mean - 1.0).abs() <= 3.0 * sd / libm::sqrt(1000.0), "{mean}");
    }

    #[test]
    fn cs_operator_limits() {
        let p = problem(40, 8, 8, 4, 0.1, 0.1, 0.2, 9);
        let eye = Mat::identity(40, 40);
        let op = cs_operator(&eye, &p).unwrap();
        let alpha = p.alpha();
        assert!((&op.s - Mat::identity(8, 8) * alpha).amax() < 1e-14);
        assert_close(op.eta, 1.0 / 0.3, 1e-14);
        let heavy = InverseProblem { lambda: 1e12, ..p.clone() };
        let op = cs_operator(&gaussian_measurement(60, 40, Seed(10)).unwrap(), &heavy).unwrap();
        assert!(op.s.amax() < 1e-11);
        let r = cs_risks(&op, &heavy).unwrap();
        assert_close(r.risk_p, 1.0, 1e-9);
        assert_close(r.risk_q, 1.0, 1e-9);
        assert!(cs_operator(&gaussian_measurement(5, 40, Seed(1)).unwrap(), &p).is_err());
    }

    #[test]
    fn cs_operator_concentrates() {
        let p = problem(200, 40, 40, 20, 0.01, 0.01, 0.0, 11);
        let op = cs_operator(&gaussian_measurement(8000, 200, Seed(12)).unwrap(), &p).unwrap();
        let target = Mat::identity(40, 40) * p.alpha();
        assert!((&op.s - &target).norm() / target.norm() <= 0.1);
        let asym = (&op.s - op.s.transpose()).amax();
        assert!(asym <= 1e-10);
    }

    #[test]
    fn cs_with_identity_reduces_to_denoising() {
        let p = problem(30, 6, 9, 4, 0.3, 0.5, 0.7, 13);
        let op = cs_operator(&Mat::identity(30, 30), &p).unwrap();
        let cs = cs_risks(&op, &p).unwrap();
        let dn = denoise_risks(&p).unwrap();
        assert_close(cs.risk_p, dn.risk_p, 1e-10);
        assert_close(cs.risk_q, dn.risk_q, 1e-10);
        assert!(cs_relation_residual(&op, &p).unwrap() <= 1e-12);
    }

    #[test]
    fn cs_risks_match_monte_carlo() {
        let p = problem(40, 6, 6, 3, 0.05, 0.1, 0.1, 14);
        let a = gaussian_measurement(20, 40, Seed(15)).unwrap();
        let op = cs_operator(&a, &p).unwrap();
        let exact = cs_risks(&op, &p).unwrap();
        let mut rng = Seed(16).rng();
        let draws = 20_000;
        let mut mc = [Vec::with_capacity(draws), Vec::with_capacity(draws)];
        for _ in 0..draws {
            for (k, (u, s2)) in [(&p.u_p, p.sigma_p_sq), (&p.u_q, p.sigma_q_sq)].into_iter().enumerate() {
                let c = Vector::from_iterator(6, (0..6).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let x = u.columns() * c;
                let z = Vector::from_iterator(20, (0..20).map(|_| libm::sqrt(s2) * rng.sample::<f64, _>(StandardNormal)));
                let y = &a * &x + z;
                mc[k].push((op.reconstruct(&p.u_p, &y) - &x).norm_squared() / 6.0);
            }
        }
        for (k, target) in [exact.risk_p, exact.risk_q].into_iter().enumerate() {
            let mean = mc[k].iter().sum::<f64>() / draws as f64;
            let var = mc[k].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (draws - 1) as f64;
            let se = libm::sqrt(var / draws as f64);
            assert!((mean - target).abs() <= 4.0 * se, "{k}: {mean} vs {target} (se {se})");
        }
    }

    #[test]
    fn cs_self_shift() {
        let p = problem(60, 10, 10, 10, 0.2, 0.2, 0.3, 17);
        let same = InverseProblem::new(p.u_p.clone(), p.u_p.clone(), 0.2, 0.2, 0.3).unwrap();
        let op = cs_operator(&gaussian_measurement(30, 60, Seed(18)).unwrap(), &same).unwrap();
        let r = cs_risks(&op, &same).unwrap();
        assert_close(r.risk_p, r.risk_q, 1e-10);
    }

    #[test]
    fn inner_products() {
        let vectors: Vec<Vector> = (0..20)
            .map(|s| haar_basis(100, 1, Seed(200 + s)).unwrap().into_columns().column(0).into_owned())
            .collect();
        let q = crate::subspace::haar_rotation(100, Seed(19)).unwrap();
        assert!(inner_product_preservation_stats(&q, &vectors).unwrap() <= 1e-12);
        let a = gaussian_measurement(2000, 100, Seed(20)).unwrap();
        assert!(inner_product_preservation_stats(&a, &vectors).unwrap() <= 0.2);
        let bad = [Vector::from_element(100, 1.0)];
        assert!(inner_product_preservation_stats(&a, &bad).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn denoise_identity_is_exact(
            sp in 0.0f64..5.0, sq in 0.0f64..5.0, lambda in 0.0f64..10.0,
            d_pq in 0usize..6, seed in 0u64..1000,
        ) {
            let p = problem(24, 6, 8, d_pq, sp, sq, lambda, seed);
            prop_assert!(denoise_relation_residual(&p).unwrap() <= 1e-12);
            let r = denoise_risks(&p).unwrap();
            prop_assert!(r.risk_p >= -1e-12 && r.risk_q >= -1e-12);
        }
    }
}
