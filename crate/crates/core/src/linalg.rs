//! Small dense linear-algebra helpers shared by the analysis modules.

use nalgebra::linalg::balancing;
use nalgebra::{DMatrix, DVector, Schur, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const SCHUR_MAX_ITER: usize = 100_000;

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Eigenvalues of a real square matrix (balanced before the QR iteration).
pub fn real_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut work = m.clone();
    balancing::balance_parlett_reinsch(&mut work);
    let schur = Schur::try_new(work, f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Eigen(format!("real Schur iteration did not converge (n = {n})")))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Eigenvalues of a complex square matrix.
pub fn complex_eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    match n {
        0 => Ok(Vec::new()),
        1 => Ok(vec![m[(0, 0)]]),
        2 => {
            let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
            let half_tr = (a + d) * 0.5;
            let disc = ((a - d) * 0.5).powi(2) + b * c;
            let s = disc.sqrt();
            Ok(vec![half_tr + s, half_tr - s])
        }
        _ => {
            let schur = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER)
                .ok_or_else(|| Error::Eigen(format!("complex Schur iteration did not converge (n = {n})")))?;
            let (_, t) = schur.unpack();
            Ok((0..n).map(|i| t[(i, i)]).collect())
        }
    }
}

/// Smallest singular value together with its left and right singular vectors,
/// plus the second smallest singular value (`f64::INFINITY` for 1×1 input).
pub struct SingularTriplet {
    pub sigma_min: f64,
    pub sigma_next: f64,
    pub left: CVector,
    pub right: CVector,
}

pub fn smallest_singular_triplet(m: &CMatrix) -> SingularTriplet {
    let n = m.ncols();
    let svd = SVD::new(m.clone(), true, true);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let k = n - 1;
    SingularTriplet {
        sigma_min: svd.singular_values[k],
        sigma_next: if n > 1 {
            svd.singular_values[k - 1]
        } else {
            f64::INFINITY
        },
        left: u.column(k).into_owned(),
        right: v_t.row(k).adjoint(),
    }
}

pub fn sigma_min(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let sv = m.singular_values();
    sv.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Orthonormal basis of the column space, columns with singular value below
/// `rel_tol · σ_max` dropped.
pub fn orthonormal_range(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let rank = svd.singular_values.iter().filter(|&&s| s > rel_tol * smax).count();
    u.columns(0, rank).into_owned()
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}
