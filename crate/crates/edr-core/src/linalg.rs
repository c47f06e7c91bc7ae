//! Small dense linear-algebra helpers shared across modules.

use nalgebra::DMatrix;

/// Orthonormal basis for the column space of `x` (thin SVD, singular
/// directions below `tol * σ_max` dropped).
pub fn orthonormal_cols(x: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    if x.ncols() == 0 || x.nrows() == 0 {
        return DMatrix::zeros(x.nrows(), 0);
    }
    let svd = x.clone().svd(true, false);
    let u = svd.u.expect("svd with u");
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let r = svd
        .singular_values
        .iter()
        .filter(|&&s| smax > 0.0 && s > tol * smax)
        .count();
    u.columns(0, r).into_owned()
}

/// Distance between the column spaces of `a` and `b`:
/// `‖Q_a Q_aᵀ − Q_b Q_bᵀ‖_F` with orthonormalized columns.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = orthonormal_cols(a, 1e-12);
    let qb = orthonormal_cols(b, 1e-12);
    let pa = &qa * qa.transpose();
    let pb = &qb * qb.transpose();
    (pa - pb).norm()
}

/// Residual of `b` against `a` after the best orthogonal alignment
/// (orthogonal Procrustes): `min_Q ‖Q a − b‖_F` over orthogonal `Q`.
pub fn procrustes_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.nrows(), b.nrows());
    assert_eq!(a.ncols(), b.ncols());
    let m = b * a.transpose();
    let svd = m.svd(true, true);
    let q = svd.u.unwrap() * svd.v_t.unwrap();
    (q * a - b).norm()
}

/// Column-wise sign fix: each column is scaled by ±1 so that its entry of
/// largest magnitude is positive. Ties resolve to the earliest row.
pub fn fix_column_signs(m: &mut DMatrix<f64>) {
    for j in 0..m.ncols() {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for i in 0..m.nrows() {
            let a = m[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if m[(best, j)] < 0.0 {
            for i in 0..m.nrows() {
                m[(i, j)] = -m[(i, j)];
            }
        }
    }
}
