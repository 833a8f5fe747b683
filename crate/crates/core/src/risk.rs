//! Risks of linear decision functions under Gaussian covariates.
//!
//! For `x ~ N(0, Σ/d)` the pair `(Z*, Ẑ) = (xᵀβ*, xᵀβ̂)` is a zero-mean
//! bivariate normal, so every risk is a function of its 2×2 covariance
//! [`DecisionCov`].

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{invalid_dim, Error, Result};
use crate::linalg::Vector;
use crate::seed::Seed;
use crate::shiftmodel::{CovariancePair, Distribution};

/// `(E[Z*²], E[Z*Ẑ], E[Ẑ²])`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionCov {
    pub omega_star: f64,
    pub chi: f64,
    pub v: f64,
}

impl DecisionCov {
    pub fn new(omega_star: f64, chi: f64, v: f64) -> Result<Self> {
        let c = Self { omega_star, chi, v };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { omega_star, chi, v } = *self;
        if !(omega_star.is_finite() && chi.is_finite() && v.is_finite()) {
            return Err(Error::NumericInput("decision covariance has non-finite entries".into()));
        }
        let det_slack = 1e-12 * f64::max(1.0, omega_star * v);
        if omega_star < 0.0 || v < 0.0 || chi * chi > omega_star * v + det_slack {
            return Err(Error::Covariance(alloc::format!("({omega_star}, {chi}, {v})")));
        }
        Ok(())
    }

    /// `χ / √(Ω* v)`, clamped to `[-1, 1]`.
    pub fn correlation(&self) -> Result<f64> {
        let denom = self.omega_star * self.v;
        if !(denom > 0.0) {
            return Err(Error::DegenerateDecision);
        }
        Ok((self.chi / libm::sqrt(denom)).clamp(-1.0, 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    /// `(z* − z)²`
    SquaredError,
    /// `1{z*z < 0}`
    Misclassification,
    /// `log(1 + exp(−sign(z*)z))`
    LogisticMetric,
    /// `max(0, 1 − sign(z*)z)`
    HingeMetric,
}

impl MetricKind {
    pub fn eval(self, z_star: f64, z: f64) -> f64 {
        let sign = if z_star >= 0.0 { 1.0 } else { -1.0 };
        match self {
            MetricKind::SquaredError => (z_star - z) * (z_star - z),
            MetricKind::Misclassification => {
                if z_star * z < 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            MetricKind::LogisticMetric => {
                let t = -sign * z;
                if t > 0.0 {
                    t + libm::log1p(libm::exp(-t))
                } else {
                    libm::log1p(libm::exp(t))
                }
            }
            MetricKind::HingeMetric => f64::max(0.0, 1.0 - sign * z),
        }
    }
}

/// `(β*ᵀΣβ*/d, β*ᵀΣβ̂/d, β̂ᵀΣβ̂/d)` for the selected covariance.
pub fn decision_cov(
    beta_star: &Vector,
    beta_hat: &Vector,
    pair: &CovariancePair,
    which: Distribution,
) -> Result<DecisionCov> {
    if beta_hat.len() != pair.dim() {
        return Err(invalid_dim!("β̂ has length {}, expected {}", beta_hat.len(), pair.dim()));
    }
    let b = pair.to_eigen(beta_star)?;
    let c = pair.to_eigen(beta_hat)?;
    let lam = pair.eigvals(which);
    let d = pair.dim() as f64;
    let (mut om, mut ch, mut v) = (0.0, 0.0, 0.0);
    for j in 0..pair.dim() {
        om += lam[j] * b[j] * b[j];
        ch += lam[j] * b[j] * c[j];
        v += lam[j] * c[j] * c[j];
    }
    Ok(DecisionCov { omega_star: om / d, chi: ch / d, v: v / d })
}

/// `E[(Z* − Ẑ)²] = Ω* − 2χ + v`.
pub fn squared_risk(cov: &DecisionCov) -> f64 {
    cov.omega_star - 2.0 * cov.chi + cov.v
}

/// `Pr(Z*Ẑ < 0) = arccos(ρ)/π`.
pub fn misclassification_risk(cov: &DecisionCov) -> Result<f64> {
    Ok(libm::acos(cov.correlation()?) / core::f64::consts::PI)
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Draws per chunk in [`mc_metric_risk`].
pub const MC_CHUNK: usize = 1 << 16;

/// Running sums of one chunk of draws.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChunkSums {
    pub count: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl ChunkSums {
    fn push(&mut self, value: f64) {
        self.count += 1;
        self.sum += value;
        self.sum_sq += value * value;
    }
}

/// Lower Cholesky factor `(l11, l21, l22)` of the 2×2 covariance, with a
/// `1e-14` diagonal jitter when the matrix is singular.
fn cholesky2(cov: &DecisionCov) -> Result<(f64, f64, f64)> {
    cov.validate()?;
    let factor = |om: f64, ch: f64, v: f64| -> Option<(f64, f64, f64)> {
        if om <= 0.0 {
            return None;
        }
        let l11 = libm::sqrt(om);
        let l21 = ch / l11;
        let rest = v - l21 * l21;
        (rest > 0.0).then(|| (l11, l21, libm::sqrt(rest)))
    };
    factor(cov.omega_star, cov.chi, cov.v)
        .or_else(|| factor(cov.omega_star + 1e-14, cov.chi, cov.v + 1e-14))
        .ok_or_else(|| Error::Covariance("2×2 Cholesky failed even with jitter".into()))
}

/// Sums of `ψ` over the draws of chunk `index` (`len` draws from the stream
/// `seed.derive(index)`).
///
/// [`mc_metric_risk`] is exactly the ordered fold of these chunks through
/// [`combine_chunks`], so any caller that evaluates chunks in parallel and
/// combines them in index order reproduces it bit for bit.
pub fn mc_metric_chunk(cov: &DecisionCov, metric: MetricKind, index: u64, len: usize, seed: Seed) -> Result<ChunkSums> {
    let (l11, l21, l22) = cholesky2(cov)?;
    let mut rng = seed.derive(index).rng();
    let mut sums = ChunkSums::default();
    for _ in 0..len {
        let g1: f64 = rng.sample(StandardNormal);
        let g2: f64 = rng.sample(StandardNormal);
        sums.push(metric.eval(l11 * g1, l21 * g1 + l22 * g2));
    }
    Ok(sums)
}

/// Chunk lengths for `n_draws` total draws.
pub fn mc_chunk_lengths(n_draws: usize) -> impl Iterator<Item = (u64, usize)> {
    let full = n_draws / MC_CHUNK;
    let tail = n_draws % MC_CHUNK;
    (0..full)
        .map(|i| (i as u64, MC_CHUNK))
        .chain((tail > 0).then_some((full as u64, tail)))
}

/// Folds chunk sums in the order given.
pub fn combine_chunks(chunks: impl IntoIterator<Item = ChunkSums>) -> Result<McEstimate> {
    let mut total = ChunkSums::default();
    for c in chunks {
        total.count += c.count;
        total.sum += c.sum;
        total.sum_sq += c.sum_sq;
    }
    if total.count < 2 {
        return Err(Error::Domain("need at least two draws".into()));
    }
    let n = total.count as f64;
    let mean = total.sum / n;
    let var = f64::max(0.0, (total.sum_sq - n * mean * mean) / (n - 1.0));
    Ok(McEstimate { estimate: mean, std_error: libm::sqrt(var / n) })
}

/// Monte Carlo estimate of `E ψ(Z*, Ẑ)`.
pub fn mc_metric_risk(cov: &DecisionCov, metric: MetricKind, n_draws: usize, seed: Seed) -> Result<McEstimate> {
    if n_draws < 100 {
        return Err(Error::Domain(alloc::format!("n_draws must be >= 100, got {n_draws}")));
    }
    let mut chunks = alloc::vec::Vec::new();
    for (index, len) in mc_chunk_lengths(n_draws) {
        chunks.push(mc_metric_chunk(cov, metric, index, len, seed)?);
    }
    combine_chunks(chunks)
}

/// Monte Carlo estimate of `E ψ(xᵀβ*, xᵀβ̂)` from draws of `x ~ N(0, Σ/d)`
/// made in the shared eigenbasis.
pub fn population_mc_risk(
    beta_star: &Vector,
    beta_hat: &Vector,
    pair: &CovariancePair,
    which: Distribution,
    metric: MetricKind,
    n_draws: usize,
    seed: Seed,
) -> Result<McEstimate> {
    if n_draws < 100 {
        return Err(Error::Domain(alloc::format!("n_draws must be >= 100, got {n_draws}")));
    }
    if beta_hat.len() != pair.dim() {
        return Err(invalid_dim!("β̂ has length {}, expected {}", beta_hat.len(), pair.dim()));
    }
    let d = pair.dim();
    let root = pair.eigvals(which).map(|l| libm::sqrt(l / d as f64));
    let u = pair.to_eigen(beta_star)?.component_mul(&root);
    let w = pair.to_eigen(beta_hat)?.component_mul(&root);
    let mut rng = seed.rng();
    let mut sums = ChunkSums::default();
    for _ in 0..n_draws {
        let (mut zs, mut z) = (0.0, 0.0);
        for j in 0..d {
            let g: f64 = rng.sample(StandardNormal);
            zs += g * u[j];
            z += g * w[j];
        }
        sums.push(metric.eval(zs, z));
    }
    combine_chunks([sums])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::sample_beta;
    use crate::shiftmodel::subspace_shift_model;
    use crate::subspace::SubspacePairSpec;
    use crate::testutil::assert_close;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    #[test]
    fn decision_cov_cases() {
        let spec = SubspacePairSpec::new(10, 6, 6, 6).unwrap();
        let pair = subspace_shift_model(spec, 1.0, Seed(1)).unwrap();
        let inside = pair.from_eigen(&Vector::from_vec(alloc::vec![1.0, -2.0, 0.5, 1.0, 3.0, 2.0, 0.0, 0.0, 0.0, 0.0]));
        let c = decision_cov(&inside, &inside, &pair, Distribution::P).unwrap();
        let e = inside.norm_squared() / 10.0;
        assert_close(c.omega_star, e, 1e-12);
        assert_close(c.chi, e, 1e-12);
        assert_close(c.v, e, 1e-12);
        let zero = decision_cov(&inside, &Vector::zeros(10), &pair, Distribution::Q).unwrap();
        assert_eq!((zero.chi, zero.v), (0.0, 0.0));

        // Gram–Schmidt a random vector against Σβ*.
        let sb = pair.dense(Distribution::P) * &inside;
        let g = sample_beta(10, 1.0, Seed(2)).unwrap().beta_star;
        let ortho = &g - &sb * (g.dot(&sb) / sb.norm_squared());
        let c = decision_cov(&inside, &ortho, &pair, Distribution::P).unwrap();
        assert!(c.chi.abs() <= 1e-12);
        assert!(decision_cov(&inside, &Vector::zeros(3), &pair, Distribution::P).is_err());
    }

    #[test]
    fn closed_forms() {
        assert_eq!(squared_risk(&DecisionCov::new(1.0, 1.0, 1.0).unwrap()), 0.0);
        assert_eq!(squared_risk(&DecisionCov::new(1.0, 0.0, 0.0).unwrap()), 1.0);
        assert_close(squared_risk(&DecisionCov::new(1.0, 0.45, 0.45).unwrap()), 0.55, 1e-15);
        assert_eq!(misclassification_risk(&DecisionCov::new(2.0, 2.0, 2.0).unwrap()).unwrap(), 0.0);
        assert_close(misclassification_risk(&DecisionCov::new(1.0, 0.0, 3.0).unwrap()).unwrap(), 0.5, 1e-15);
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert_close(misclassification_risk(&DecisionCov::new(1.0, h, 1.0).unwrap()).unwrap(), 0.25, 1e-15);
        assert_eq!(
            misclassification_risk(&DecisionCov::new(0.0, 0.0, 1.0).unwrap()),
            Err(Error::DegenerateDecision)
        );
        assert!(DecisionCov::new(1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn mc_matches_squared_closed_form() {
        let cov = DecisionCov::new(1.0, 0.45, 0.45).unwrap();
        let mc = mc_metric_risk(&cov, MetricKind::SquaredError, 1_000_000, Seed(3)).unwrap();
        assert!((mc.estimate - 0.55).abs() <= 4.0 * mc.std_error, "{mc:?}");
    }

    #[test]
    fn mc_matches_misclassification() {
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let cov = DecisionCov::new(1.0, h, 1.0).unwrap();
        let mc = mc_metric_risk(&cov, MetricKind::Misclassification, 1_000_000, Seed(4)).unwrap();
        assert!((mc.estimate - 0.25).abs() <= 4.0 * mc.std_error, "{mc:?}");
    }

    /// Composite Simpson rule on `[a, b]`.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn hinge_on_perfect_alignment_matches_quadrature() {
        let cov = DecisionCov::new(1.0, 1.0, 1.0).unwrap();
        let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
        let oracle = 2.0 * simpson(|z| (1.0 - z) * pdf(z), 0.0, 1.0, 2000);
        let mc = mc_metric_risk(&cov, MetricKind::HingeMetric, 1_000_000, Seed(5)).unwrap();
        assert!((mc.estimate - oracle).abs() <= 4.0 * mc.std_error, "{mc:?} vs {oracle}");
    }

    #[test]
    fn logistic_metric_matches_quadrature() {
        // Independent Z*, Z: ψ depends only on sign(Z*)·Z, which is N(0, v).
        let cov = DecisionCov::new(1.0, 0.0, 4.0).unwrap();
        let pdf = |z: f64| (-z * z / 8.0).exp() / (8.0 * PI).sqrt();
        let oracle = simpson(|z| (1.0 + (-z).exp()).ln() * pdf(z), -40.0, 40.0, 20_000);
        let mc = mc_metric_risk(&cov, MetricKind::LogisticMetric, 400_000, Seed(6)).unwrap();
        assert!((mc.estimate - oracle).abs() <= 4.0 * mc.std_error, "{mc:?} vs {oracle}");
    }

    #[test]
    fn chunked_evaluation_is_bit_exact() {
        let cov = DecisionCov::new(1.3, 0.4, 0.9).unwrap();
        let n = 3 * MC_CHUNK + 123;
        let serial = mc_metric_risk(&cov, MetricKind::LogisticMetric, n, Seed(7)).unwrap();
        let mut chunks: alloc::vec::Vec<(u64, ChunkSums)> = mc_chunk_lengths(n)
            .collect::<alloc::vec::Vec<_>>()
            .into_iter()
            .rev()
            .map(|(i, len)| (i, mc_metric_chunk(&cov, MetricKind::LogisticMetric, i, len, Seed(7)).unwrap()))
            .collect();
        chunks.sort_by_key(|(i, _)| *i);
        let combined = combine_chunks(chunks.into_iter().map(|(_, c)| c)).unwrap();
        assert_eq!(serial, combined);
        assert_eq!(serial, mc_metric_risk(&cov, MetricKind::LogisticMetric, n, Seed(7)).unwrap());
    }

    #[test]
    fn mc_error_shrinks_with_draws() {
        let cov = DecisionCov::new(1.0, 0.3, 2.0).unwrap();
        let exact = squared_risk(&cov);
        let mean_err = |n: usize| -> f64 {
            (0..16u64)
                .map(|s| (mc_metric_risk(&cov, MetricKind::SquaredError, n, Seed(100 + s)).unwrap().estimate - exact).abs())
                .sum::<f64>()
                / 16.0
        };
        let small = mean_err(2_000);
        let large = mean_err(32_000);
        // 16× the draws should cut the error about 4×.
        assert!(large < small / 2.0, "{small} {large}");
    }

    #[test]
    fn population_route_agrees_with_covariance_route() {
        let spec = SubspacePairSpec::new(30, 20, 15, 10).unwrap();
        let pair = subspace_shift_model(spec, 2.0, Seed(8)).unwrap();
        let bs = sample_beta(30, 1.0, Seed(9)).unwrap().beta_star;
        let bh = &bs * 0.6 + sample_beta(30, 0.3, Seed(10)).unwrap().beta_star;
        for metric in [MetricKind::SquaredError, MetricKind::Misclassification, MetricKind::HingeMetric] {
            let cov = decision_cov(&bs, &bh, &pair, Distribution::Q).unwrap();
            let a = mc_metric_risk(&cov, metric, 200_000, Seed(11)).unwrap();
            let b = population_mc_risk(&bs, &bh, &pair, Distribution::Q, metric, 200_000, Seed(12)).unwrap();
            let se = libm::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
            assert!((a.estimate - b.estimate).abs() <= 4.0 * se, "{metric:?} {a:?} {b:?}");
        }
        let same = population_mc_risk(&bs, &bs, &pair, Distribution::P, MetricKind::Misclassification, 1000, Seed(13)).unwrap();
        assert_eq!(same.estimate, 0.0);
        let flipped = -&bs;
        let opp = population_mc_risk(&bs, &flipped, &pair, Distribution::P, MetricKind::Misclassification, 1000, Seed(13)).unwrap();
        assert_eq!(opp.estimate, 1.0);
    }

    proptest! {
        #[test]
        fn misclassification_scale_invariant(om in 0.1f64..5.0, v in 0.1f64..5.0, r in -0.99f64..0.99, t in 0.01f64..100.0) {
            let chi = r * (om * v).sqrt();
            let a = misclassification_risk(&DecisionCov::new(om, chi, v).unwrap()).unwrap();
            let b = misclassification_risk(&DecisionCov::new(om, t * chi, t * t * v).unwrap()).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }

        #[test]
        fn squared_risk_floor(om in 0.0f64..5.0, v in 0.0f64..5.0, r in -1.0f64..1.0) {
            let cov = DecisionCov::new(om, r * (om * v).sqrt(), v).unwrap();
            let floor = (om.sqrt() - v.sqrt()).powi(2);
            prop_assert!(squared_risk(&cov) >= floor - 1e-12);
            prop_assert!(squared_risk(&cov) >= -1e-12);
        }
    }
}
