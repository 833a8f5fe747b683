//! Small dense helpers on top of nalgebra.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Matrix of i.i.d. standard normals filled in column-major order.
pub fn standard_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Mat::from_vec(rows, cols, data)
}

pub fn standard_normal_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vector {
    Vector::from_iterator(len, (0..len).map(|_| rng.sample(StandardNormal)))
}

/// `AᵀB` through an explicit transpose so that nalgebra's blocked GEMM is used.
pub fn at_b(a: &Mat, b: &Mat) -> Mat {
    a.transpose() * b
}

/// Cholesky solve of the SPD system `A x = b`.
pub fn spd_solve(a: Mat, b: &Vector) -> Result<Vector> {
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Numeric("matrix is not positive definite".into()))?;
    Ok(chol.solve(b))
}

/// Largest absolute entry of `A - B`.
pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| libm::fabs(x - y)).fold(0.0, f64::max)
}

pub fn all_finite<'a>(values: impl IntoIterator<Item = &'a f64>) -> bool {
    values.into_iter().all(|v| v.is_finite())
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => {
            let (a, b) = (libm::log(lo), libm::log(hi));
            (0..n)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i == n - 1 {
                        hi
                    } else {
                        libm::exp(a + (b - a) * i as f64 / (n - 1) as f64)
                    }
                })
                .collect()
        }
    }
}

/// Least-squares line `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute residual of the fitted line.
    pub max_residual: f64,
    /// Root mean square of the residuals.
    pub rms_residual: f64,
}

pub fn affine_fit(x: &[f64], y: &[f64]) -> Result<AffineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidDimension(alloc::format!(
            "affine fit needs two equal-length series of length >= 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::Degenerate("affine fit with constant abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = x.iter().zip(y).map(|(a, b)| libm::fabs(b - slope * a - intercept));
    let max_residual = residuals.clone().fold(0.0, f64::max);
    let rms_residual = libm::sqrt(residuals.map(|r| r * r).sum::<f64>() / n);
    Ok(AffineFit { slope, intercept, max_residual, rms_residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logspace_endpoints() {
        let g = logspace(1e-3, 1e2, 25);
        assert_eq!(g.len(), 25);
        assert_eq!(g[0], 1e-3);
        assert_eq!(g[24], 1e2);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn affine_fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let fit = affine_fit(&x, &y).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-14);
        assert!((fit.intercept + 1.0).abs() < 1e-14);
        assert!(fit.max_residual < 1e-13);
        assert!(fit.rms_residual <= fit.max_residual);
        assert!(affine_fit(&[1.0, 1.0], &[0.0, 2.0]).is_err());
    }
}
