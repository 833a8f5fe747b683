use crate::linalg::Mat;

pub fn assert_close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} differ by {} > {tol}", (a - b).abs());
}

pub fn orthonormality_error(u: &Mat) -> f64 {
    let g = u.transpose() * u;
    let eye = Mat::identity(g.nrows(), g.ncols());
    crate::linalg::max_abs_diff(&g, &eye)
}
