//! Linear subspaces: Haar-random bases, controlled-overlap pairs and
//! principal angles.

use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use crate::error::{invalid_dim, Result};
use crate::linalg::{self, Mat, Vector};
use crate::seed::Seed;

/// Orthonormality tolerance checked by [`OrthonormalBasis::new`].
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// A `d × k` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    columns: Mat,
}

impl OrthonormalBasis {
    /// Validates `UᵀU = I` entrywise within [`ORTHONORMAL_TOL`].
    pub fn new(columns: Mat) -> Result<Self> {
        let (d, k) = columns.shape();
        if k == 0 || k > d {
            return Err(invalid_dim!("basis must satisfy 1 <= k <= d, got d={d}, k={k}"));
        }
        let gram = columns.transpose() * &columns;
        let err = linalg::max_abs_diff(&gram, &Mat::identity(k, k));
        if !(err <= ORTHONORMAL_TOL) {
            return Err(invalid_dim!("columns are not orthonormal (max |UᵀU - I| = {err:e})"));
        }
        Ok(Self { columns })
    }

    /// Coordinate subspace spanned by the standard basis vectors `e_i`, `i ∈ indices`.
    pub fn coordinate(d: usize, indices: &[usize]) -> Result<Self> {
        let mut m = Mat::zeros(d, indices.len());
        for (c, &i) in indices.iter().enumerate() {
            if i >= d {
                return Err(invalid_dim!("coordinate index {i} out of range for d={d}"));
            }
            m[(i, c)] = 1.0;
        }
        Self::new(m)
    }

    pub(crate) fn from_trusted(columns: Mat) -> Self {
        Self { columns }
    }

    pub fn ambient_dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn rank(&self) -> usize {
        self.columns.ncols()
    }

    pub fn columns(&self) -> &Mat {
        &self.columns
    }

    pub fn into_columns(self) -> Mat {
        self.columns
    }

    /// Dense projector `UUᵀ`.
    pub fn projector(&self) -> Mat {
        &self.columns * self.columns.transpose()
    }

    /// `UUᵀv` without forming the projector.
    pub fn project(&self, v: &Vector) -> Vector {
        &self.columns * (self.columns.transpose() * v)
    }

    /// The basis `RU` for an orthogonal `R`.
    pub fn rotated(&self, rotation: &Mat) -> Self {
        Self { columns: rotation * &self.columns }
    }
}

/// Haar-distributed `d × k` orthonormal basis.
///
/// QR of a matrix of i.i.d. standard normals, with every column of `Q`
/// multiplied by the sign of the matching diagonal entry of `R`.
pub fn haar_basis(d: usize, k: usize, seed: Seed) -> Result<OrthonormalBasis> {
    if k == 0 || k > d {
        return Err(invalid_dim!("haar_basis needs 1 <= k <= d, got d={d}, k={k}"));
    }
    let g = linalg::standard_normal_matrix(d, k, &mut seed.rng());
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(OrthonormalBasis::from_trusted(q))
}

/// Haar-random `d × d` orthogonal matrix.
pub fn haar_rotation(d: usize, seed: Seed) -> Result<Mat> {
    haar_basis(d, d, seed).map(OrthonormalBasis::into_columns)
}

/// Dimensions of a pair of subspaces with a prescribed intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubspacePairSpec {
    pub d: usize,
    pub d_p: usize,
    pub d_q: usize,
    pub d_pq: usize,
}

impl SubspacePairSpec {
    pub fn new(d: usize, d_p: usize, d_q: usize, d_pq: usize) -> Result<Self> {
        let spec = Self { d, d_p, d_q, d_pq };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { d, d_p, d_q, d_pq } = *self;
        if d_p == 0 || d_q == 0 {
            return Err(invalid_dim!("d_P and d_Q must be positive, got {d_p}, {d_q}"));
        }
        if d_pq > d_p.min(d_q) {
            return Err(invalid_dim!("d_PQ={d_pq} exceeds min(d_P, d_Q)={}", d_p.min(d_q)));
        }
        if d_p + d_q - d_pq > d {
            return Err(invalid_dim!("d_P + d_Q - d_PQ = {} exceeds d={d}", d_p + d_q - d_pq));
        }
        Ok(())
    }

    /// Coordinate range occupied by the `Q` block in the shared-block layout.
    ///
    /// `P` occupies `0..d_P`; `Q` starts `d_PQ` coordinates before the end of
    /// `P`, so exactly `d_PQ` coordinates are shared.
    pub fn q_block(&self) -> core::ops::Range<usize> {
        let start = self.d_p - self.d_pq;
        start..start + self.d_q
    }
}

/// Two bases whose spans intersect in exactly `d_PQ` dimensions and are
/// otherwise orthogonal, both rotated by one common Haar rotation.
pub fn overlapping_pair(
    spec: SubspacePairSpec,
    seed: Seed,
) -> Result<(OrthonormalBasis, OrthonormalBasis)> {
    spec.validate()?;
    let rotation = haar_rotation(spec.d, seed)?;
    let u_p = rotation.columns(0, spec.d_p).into_owned();
    let q = spec.q_block();
    let u_q = rotation.columns(q.start, q.len()).into_owned();
    Ok((OrthonormalBasis::from_trusted(u_p), OrthonormalBasis::from_trusted(u_q)))
}

/// Principal angles in radians, ascending, each in `[0, π/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalAngles {
    angles: Vec<f64>,
}

impl PrincipalAngles {
    pub fn new(mut angles: Vec<f64>) -> Result<Self> {
        if angles.iter().any(|a| !(0.0..=FRAC_PI_2).contains(a)) {
            return Err(invalid_dim!("principal angles must lie in [0, π/2]"));
        }
        angles.sort_by(f64::total_cmp);
        Ok(Self { angles })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// `‖cos θ‖²`.
    pub fn cos_sq_sum(&self) -> f64 {
        self.angles.iter().map(|t| libm::cos(*t) * libm::cos(*t)).sum()
    }
}

/// Principal angles from the singular values of `U_PᵀU_Q`.
///
/// Cosines are clamped to `[0, 1]` before `arccos`. Angles whose cosine
/// exceeds `1/√2` are taken from `arcsin` of the matching singular value of
/// `U_Q − U_P U_PᵀU_Q` instead, since `arccos` cannot resolve angles below
/// about `1e-8`.
pub fn principal_angles(u_p: &OrthonormalBasis, u_q: &OrthonormalBasis) -> Result<PrincipalAngles> {
    if u_p.ambient_dim() != u_q.ambient_dim() {
        return Err(invalid_dim!(
            "ambient dimensions differ: {} vs {}",
            u_p.ambient_dim(),
            u_q.ambient_dim()
        ));
    }
    let cross = u_p.columns().transpose() * u_q.columns();
    let mut cosines: Vec<f64> = cross.singular_values().iter().map(|s| s.clamp(0.0, 1.0)).collect();
    cosines.sort_by(|a, b| b.total_cmp(a));
    let m = cosines.len();
    let angles = if cosines.first().is_some_and(|c| c * c > 0.5) {
        let residual = u_q.columns() - u_p.columns() * &cross;
        let mut sines: Vec<f64> = residual.singular_values().iter().map(|s| s.clamp(0.0, 1.0)).collect();
        sines.sort_by(f64::total_cmp);
        cosines
            .iter()
            .zip(sines.iter().take(m))
            .map(|(c, s)| if c * c > 0.5 { libm::asin(*s) } else { libm::acos(*c) })
            .collect()
    } else {
        cosines.iter().map(|c| libm::acos(*c)).collect()
    };
    PrincipalAngles::new(angles)
}

/// `√(‖cos θ‖² / k)`.
pub fn subspace_similarity(theta: &PrincipalAngles, k: usize) -> Result<f64> {
    if k != theta.len() || k == 0 {
        return Err(invalid_dim!("similarity needs k = {} angles, got k={k}", theta.len()));
    }
    Ok(libm::sqrt(theta.cos_sq_sum() / k as f64))
}

/// `‖cos θ‖² / d_Q`.
pub fn overlap_coefficient(theta: &PrincipalAngles, d_q: usize) -> Result<f64> {
    if d_q == 0 || theta.len() > d_q {
        return Err(invalid_dim!("overlap needs #angles={} <= d_Q={d_q}", theta.len()));
    }
    Ok(theta.cos_sq_sum() / d_q as f64)
}

/// Spectrum and principal directions of a centered sample matrix.
#[derive(Debug, Clone)]
pub struct PrincipalComponents {
    /// Singular values of the centered data, descending.
    pub singular_values: Vec<f64>,
    /// Right singular vectors as columns, matching `singular_values`.
    directions: Mat,
}

impl PrincipalComponents {
    /// `samples` holds one observation per row.
    pub fn from_samples(samples: &Mat) -> Result<Self> {
        let (n, d) = samples.shape();
        if n < 2 || d == 0 {
            return Err(invalid_dim!("need at least two samples of positive dimension"));
        }
        if !linalg::all_finite(samples.iter()) {
            return Err(crate::Error::NumericInput("sample matrix has non-finite entries".into()));
        }
        let mean = samples.row_mean();
        let mut centered = samples.clone();
        for mut row in centered.row_iter_mut() {
            row -= &mean;
        }
        let svd = centered.svd(false, true);
        let v_t = svd
            .v_t
            .ok_or_else(|| crate::Error::Numeric("SVD did not return right singular vectors".into()))?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let singular_values = order.iter().map(|&i| svd.singular_values[i]).collect();
        let mut directions = Mat::zeros(d, order.len());
        for (c, &i) in order.iter().enumerate() {
            directions.set_column(c, &v_t.row(i).transpose());
        }
        Ok(Self { singular_values, directions })
    }

    /// Span of the top `k` principal directions.
    pub fn top(&self, k: usize) -> Result<OrthonormalBasis> {
        if k == 0 || k > self.directions.ncols() {
            return Err(invalid_dim!("k={k} outside 1..={}", self.directions.ncols()));
        }
        OrthonormalBasis::new(self.directions.columns(0, k).into_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{assert_close, orthonormality_error};
    use proptest::prelude::*;

    #[test]
    fn haar_square_is_orthogonal() {
        for s in 0..5 {
            let u = haar_basis(4, 4, Seed(s)).unwrap();
            assert!(orthonormality_error(u.columns()) < 1e-10);
        }
    }

    #[test]
    fn haar_is_deterministic_with_unit_columns() {
        let a = haar_basis(50, 10, Seed(7)).unwrap();
        let b = haar_basis(50, 10, Seed(7)).unwrap();
        assert_eq!(a, b);
        for c in a.columns().column_iter() {
            assert_close(c.norm(), 1.0, 1e-12);
        }
        assert_ne!(a, haar_basis(50, 10, Seed(8)).unwrap());
    }

    #[test]
    fn haar_rejects_bad_dims() {
        assert!(matches!(haar_basis(3, 4, Seed(0)), Err(crate::Error::InvalidDimension(_))));
        assert!(matches!(haar_basis(3, 0, Seed(0)), Err(crate::Error::InvalidDimension(_))));
    }

    #[test]
    fn haar_first_coordinate_is_symmetric() {
        // Sign-fixed QR: the first column is uniform on the sphere, so its
        // first coordinate has mean 0 and variance 1/d.
        let d = 5;
        let m = 4000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for i in 0..m {
            let u = haar_basis(d, 1, Seed(1000 + i)).unwrap();
            let x = u.columns()[(0, 0)];
            s1 += x;
            s2 += x * x;
        }
        let mean = s1 / m as f64;
        let var = s2 / m as f64;
        assert!(mean.abs() < 4.0 * (1.0 / (d as f64 * m as f64)).sqrt());
        assert!((var - 0.2).abs() < 0.02);
    }

    #[test]
    fn pair_angles_identical_and_disjoint() {
        let (p, q) = overlapping_pair(SubspacePairSpec::new(10, 3, 3, 3).unwrap(), Seed(1)).unwrap();
        for t in principal_angles(&p, &q).unwrap().angles() {
            assert!(*t < 1e-8);
        }
        let (p, q) = overlapping_pair(SubspacePairSpec::new(10, 3, 3, 0).unwrap(), Seed(1)).unwrap();
        for t in principal_angles(&p, &q).unwrap().angles() {
            assert_close(*t, FRAC_PI_2, 1e-7);
        }
    }

    #[test]
    fn fig2_pair_overlap_coefficient() {
        let spec = SubspacePairSpec::new(800, 720, 640, 560).unwrap();
        let (p, q) = overlapping_pair(spec, Seed(3)).unwrap();
        let theta = principal_angles(&p, &q).unwrap();
        assert_close(overlap_coefficient(&theta, 640).unwrap(), 0.875, 1e-9);
        assert_eq!(theta.angles().iter().filter(|t| **t < 1e-8).count(), 560);
    }

    #[test]
    fn half_overlap_gives_a_one_half() {
        let spec = SubspacePairSpec::new(200, 40, 40, 20).unwrap();
        let (p, q) = overlapping_pair(spec, Seed(11)).unwrap();
        let theta = principal_angles(&p, &q).unwrap();
        assert_close(overlap_coefficient(&theta, 40).unwrap(), 0.5, 1e-9);
    }

    #[test]
    fn pair_spec_violations() {
        assert!(SubspacePairSpec::new(10, 3, 3, 4).is_err());
        assert!(SubspacePairSpec::new(10, 6, 6, 1).is_err());
        assert!(SubspacePairSpec::new(10, 0, 3, 0).is_err());
        assert!(SubspacePairSpec::new(10, 6, 5, 1).is_ok());
    }

    #[test]
    fn coordinate_subspace_angles() {
        let p = OrthonormalBasis::coordinate(4, &[0, 1]).unwrap();
        let q = OrthonormalBasis::coordinate(4, &[0, 2]).unwrap();
        let theta = principal_angles(&p, &q).unwrap();
        assert_close(theta.angles()[0], 0.0, 1e-12);
        assert_close(theta.angles()[1], FRAC_PI_2, 1e-12);
        let self_angles = principal_angles(&p, &p).unwrap();
        assert!(self_angles.angles().iter().all(|t| *t < 1e-8));
    }

    #[test]
    fn mismatched_ambient_dims() {
        let p = OrthonormalBasis::coordinate(4, &[0]).unwrap();
        let q = OrthonormalBasis::coordinate(5, &[0]).unwrap();
        assert!(principal_angles(&p, &q).is_err());
    }

    #[test]
    fn similarity_values() {
        let h = FRAC_PI_2;
        let s = |v: [f64; 2]| subspace_similarity(&PrincipalAngles::new(v.to_vec()).unwrap(), 2).unwrap();
        assert_close(s([0.0, 0.0]), 1.0, 1e-15);
        assert_close(s([h, h]), 0.0, 1e-15);
        assert_close(s([0.0, h]), libm::sqrt(0.5), 1e-15);
        let theta = PrincipalAngles::new(alloc::vec![0.0]).unwrap();
        assert!(subspace_similarity(&theta, 2).is_err());
    }

    #[test]
    fn overlap_identical_and_orthogonal() {
        let p = haar_basis(12, 5, Seed(2)).unwrap();
        let theta = principal_angles(&p, &p).unwrap();
        assert_close(overlap_coefficient(&theta, 5).unwrap(), 1.0, 1e-12);
        let (p, q) = overlapping_pair(SubspacePairSpec::new(12, 5, 5, 0).unwrap(), Seed(2)).unwrap();
        let theta = principal_angles(&p, &q).unwrap();
        assert!(overlap_coefficient(&theta, 5).unwrap() < 1e-12);
    }

    #[test]
    fn pca_recovers_identical_inputs() {
        let data = linalg::standard_normal_matrix(200, 6, &mut Seed(4).rng());
        let pcs = PrincipalComponents::from_samples(&data).unwrap();
        assert!(pcs.singular_values.windows(2).all(|w| w[0] >= w[1]));
        let top = pcs.top(3).unwrap();
        let theta = principal_angles(&top, &top).unwrap();
        assert_close(subspace_similarity(&theta, 3).unwrap(), 1.0, 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn angles_invariant_under_common_rotation(d in 3usize..12, seed in 0u64..1000) {
            let k_p = 1 + (seed as usize % (d - 1));
            let k_q = 1 + ((seed as usize / 7) % (d - 1));
            let p = haar_basis(d, k_p, Seed(seed)).unwrap();
            let q = haar_basis(d, k_q, Seed(seed + 1)).unwrap();
            let r = haar_rotation(d, Seed(seed + 2)).unwrap();
            let before = principal_angles(&p, &q).unwrap();
            let after = principal_angles(&p.rotated(&r), &q.rotated(&r)).unwrap();
            for (a, b) in before.angles().iter().zip(after.angles()) {
                // arccos amplifies rounding near 0; compare cosines too.
                prop_assert!((libm::cos(*a) - libm::cos(*b)).abs() < 1e-9);
            }
            // Angles are sorted and the two scalar summaries agree.
            prop_assert!(before.angles().windows(2).all(|w| w[0] <= w[1]));
            let k = before.len();
            let sim = subspace_similarity(&before, k).unwrap();
            let a = overlap_coefficient(&before, k_q).unwrap();
            prop_assert!((sim * sim * k as f64 - a * k_q as f64).abs() < 1e-10);
            // Symmetry of the cosines.
            let swapped = principal_angles(&q, &p).unwrap();
            for (x, y) in before.angles().iter().zip(swapped.angles()) {
                prop_assert!((libm::cos(*x) - libm::cos(*y)).abs() < 1e-9);
            }
        }

        #[test]
        fn overlapping_pair_zero_angle_count(d_pq in 0usize..6, extra_p in 0usize..4, extra_q in 0usize..4, seed in 0u64..100) {
            let d_p = (d_pq + extra_p).max(1);
            let d_q = (d_pq + extra_q).max(1);
            let d = d_p + d_q - d_pq + 2;
            let spec = SubspacePairSpec::new(d, d_p, d_q, d_pq).unwrap();
            let (p, q) = overlapping_pair(spec, Seed(seed)).unwrap();
            let theta = principal_angles(&p, &q).unwrap();
            let zeros = theta.angles().iter().filter(|t| **t < 1e-8).count();
            prop_assert_eq!(zeros, d_pq);
        }
    }
}
