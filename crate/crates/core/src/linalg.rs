//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Elementwise Hermiticity tolerance.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalues below `-PSD_TOL` make a matrix unphysical; values in `[-PSD_TOL, 0)` clamp to zero.
pub const PSD_TOL: f64 = 1e-9;

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn max_hermitian_defect(m: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && max_hermitian_defect(m) <= tol
}

/// `(A + A†)/2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).map(|z| z * 0.5)
}

/// Real eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = hermitize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let n = m.nrows();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn eigenvalues(m: &CMatrix) -> Vec<f64> {
    eigh(m).0
}

/// Checks `m` has no eigenvalue below `-PSD_TOL`.
pub fn ensure_psd(m: &CMatrix) -> Result<()> {
    let min = eigenvalues(m).first().copied().unwrap_or(0.0);
    if min < -PSD_TOL {
        return Err(Error::UnphysicalMatrix(min));
    }
    Ok(())
}

/// Principal square root of a Hermitian PSD matrix.
///
/// Eigenvalues within `64 ε · max|λ|` of zero are round-off and map to zero,
/// so rank-deficient inputs do not pick up `√ε`-sized spurious terms.
pub fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let (values, vectors) = eigh(m);
    let scale = values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let round_off = 64.0 * f64::EPSILON * scale;
    let mut roots = Vec::with_capacity(values.len());
    for &v in &values {
        if v < -PSD_TOL {
            return Err(Error::UnphysicalMatrix(v));
        }
        roots.push(if v <= round_off { 0.0 } else { v.sqrt() });
    }
    let n = m.nrows();
    let diag = CMatrix::from_fn(n, n, |r, c| if r == c { c64(roots[r], 0.0) } else { c64(0.0, 0.0) });
    Ok(&vectors * diag * vectors.adjoint())
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMatrix::from_fn(ar * br, ac * bc, |r, c| a[(r / br, c / bc)] * b[(r % br, c % bc)])
}

pub fn trace(m: &CMatrix) -> Complex64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// `max |M†M - I|` over entries.
pub fn isometry_defect(m: &CMatrix) -> f64 {
    let g = m.adjoint() * m;
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - c64(target, 0.0)).norm());
        }
    }
    worst
}
