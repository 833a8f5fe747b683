//! Ground truth, covariates and labels.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{invalid_dim, Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::seed::Seed;
use crate::shiftmodel::{CovariancePair, Distribution};

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub beta_star: Vector,
    pub sigma_beta_sq: f64,
}

impl GroundTruth {
    pub fn new(beta_star: Vector, sigma_beta_sq: f64) -> Result<Self> {
        if !(sigma_beta_sq > 0.0 && sigma_beta_sq.is_finite()) {
            return Err(Error::Domain(alloc::format!("σ_β² must be positive, got {sigma_beta_sq}")));
        }
        if beta_star.is_empty() {
            return Err(invalid_dim!("β* must be nonempty"));
        }
        if !linalg::all_finite(beta_star.iter()) {
            return Err(Error::NumericInput("β* has non-finite entries".into()));
        }
        Ok(Self { beta_star, sigma_beta_sq })
    }

    pub fn dim(&self) -> usize {
        self.beta_star.len()
    }
}

/// Labeling function `y = φ(xᵀβ*, ξ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LabelKind {
    /// `y = xᵀβ* + σξ`; the field is the noise standard deviation `σ`.
    LinearGaussian(f64),
    /// `y = ±sign(xᵀβ*)`, correct with probability `p ∈ (1/2, 1]`.
    NoisySign(f64),
    NoiselessLinear,
}

impl LabelKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LabelKind::LinearGaussian(s) if !(s >= 0.0 && s.is_finite()) => {
                Err(Error::Domain(alloc::format!("noise std must be >= 0, got {s}")))
            }
            LabelKind::NoisySign(p) if !(p > 0.5 && p <= 1.0) => {
                Err(Error::Domain(alloc::format!("correct-label probability must be in (1/2, 1], got {p}")))
            }
            _ => Ok(()),
        }
    }

    /// Whether labels are `±1`.
    pub fn is_binary(&self) -> bool {
        matches!(self, LabelKind::NoisySign(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Mat,
    pub y: Vector,
}

impl Dataset {
    pub fn new(x: Mat, y: Vector) -> Result<Self> {
        if x.nrows() == 0 || x.nrows() != y.len() {
            return Err(invalid_dim!("dataset has {} rows and {} labels", x.nrows(), y.len()));
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

/// `β*` with i.i.d. `N(0, σ_β²)` entries.
pub fn sample_beta(d: usize, sigma_beta_sq: f64, seed: Seed) -> Result<GroundTruth> {
    if d == 0 {
        return Err(invalid_dim!("d must be positive"));
    }
    if !(sigma_beta_sq > 0.0 && sigma_beta_sq.is_finite()) {
        return Err(Error::Domain(alloc::format!("σ_β² must be positive, got {sigma_beta_sq}")));
    }
    let scale = libm::sqrt(sigma_beta_sq);
    let beta = linalg::standard_normal_vector(d, &mut seed.rng()) * scale;
    GroundTruth::new(beta, sigma_beta_sq)
}

/// `β* = V b` with `b_j = ±σ_β` (independent fair signs) in the shared
/// eigenbasis `V` of `pair`.
///
/// Every eigen-direction carries the same energy, so for any `Σ_Q` the
/// plug-in `γ` equals `κ` exactly.
pub fn equal_energy_beta(pair: &CovariancePair, sigma_beta_sq: f64, seed: Seed) -> Result<GroundTruth> {
    if !(sigma_beta_sq > 0.0 && sigma_beta_sq.is_finite()) {
        return Err(Error::Domain(alloc::format!("σ_β² must be positive, got {sigma_beta_sq}")));
    }
    let s = libm::sqrt(sigma_beta_sq);
    let mut rng = seed.rng();
    let coords = Vector::from_iterator(pair.dim(), (0..pair.dim()).map(|_| if rng.gen::<bool>() { s } else { -s }));
    GroundTruth::new(pair.from_eigen(&coords), sigma_beta_sq)
}

/// `n` rows i.i.d. `N(0, Σ/d)`, realized as `G V diag(√λ) Vᵀ / √d` for an
/// `n × d` standard normal `G` filled column by column.
pub fn sample_covariates(pair: &CovariancePair, which: Distribution, n: usize, seed: Seed) -> Result<Mat> {
    if n == 0 {
        return Err(invalid_dim!("n must be positive"));
    }
    let d = pair.dim();
    let g = linalg::standard_normal_matrix(n, d, &mut seed.rng());
    Ok(g * sqrt_cov(pair, which))
}

/// `V diag(√λ) Vᵀ / √d`, the symmetric square root of `Σ/d`.
pub fn sqrt_cov(pair: &CovariancePair, which: Distribution) -> Mat {
    let d = pair.dim();
    let v = pair.eigenbasis();
    let root = pair.eigvals(which).map(|l| libm::sqrt(l / d as f64));
    let scaled = v * Mat::from_diagonal(&root);
    scaled * v.transpose()
}

/// Labels for the rows of `x`. Zero decision values count as `+1` before any
/// flip under [`LabelKind::NoisySign`].
pub fn label(x: &Mat, gt: &GroundTruth, kind: LabelKind, seed: Seed) -> Result<Vector> {
    kind.validate()?;
    if x.ncols() != gt.dim() {
        return Err(invalid_dim!("X has {} columns, β* has length {}", x.ncols(), gt.dim()));
    }
    let z = x * &gt.beta_star;
    let mut rng = seed.rng();
    Ok(match kind {
        LabelKind::NoiselessLinear => z,
        LabelKind::LinearGaussian(sigma) => {
            let mut y = z;
            for v in y.iter_mut() {
                let xi: f64 = rng.sample(StandardNormal);
                *v += sigma * xi;
            }
            y
        }
        LabelKind::NoisySign(p) => z.map(|v| {
            let sign = if v >= 0.0 { 1.0 } else { -1.0 };
            if rng.gen::<f64>() < p {
                sign
            } else {
                -sign
            }
        }),
    })
}

/// Covariates and labels in one call, with independent substreams
/// `seed.derive(0)` for `X` and `seed.derive(1)` for the labels.
pub fn sample_dataset(
    pair: &CovariancePair,
    which: Distribution,
    gt: &GroundTruth,
    kind: LabelKind,
    n: usize,
    seed: Seed,
) -> Result<Dataset> {
    let x = sample_covariates(pair, which, n, seed.derive(0))?;
    let y = label(&x, gt, kind, seed.derive(1))?;
    Dataset::new(x, y)
}
