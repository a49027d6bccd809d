//! Small dense linear-algebra helpers shared across the crate.

use nalgebra::DMatrix;

/// Entrywise infinity norm (largest absolute entry); 0 for empty matrices.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Largest eigenvalue magnitude, computed from the full complex spectrum.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    assert!(m.is_square(), "spectral radius of a non-square matrix");
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone()
        .complex_eigenvalues()
        .iter()
        .fold(0.0, |acc, ev| acc.max(ev.norm()))
}

/// Moore-Penrose pseudo-inverse with a relative singular-value cutoff:
/// singular values at or below `rel_tol` times the largest are dropped.
pub fn pseudo_inverse(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let svd = m.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    if s_max <= 0.0 {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    svd.pseudo_inverse(rel_tol * s_max)
        .expect("pseudo-inverse with a positive cutoff cannot fail")
}

/// Replaces `m` by its symmetric part. Keeps Riccati iterates symmetric in
/// the presence of rounding.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Frobenius norm; 0 for empty matrices.
pub fn fro_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}
