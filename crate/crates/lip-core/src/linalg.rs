//! Thin wrappers over the dense decomposition backend.
//!
//! All heavy factorizations (SVD, symmetric eigendecomposition, Cholesky)
//! run through this module so the rest of the crate works purely in
//! `ndarray` terms. Single-threaded backend; results are deterministic for
//! identical inputs.

use faer::prelude::*;
use faer_ext::{IntoFaer, IntoNdarray};

use crate::error::{Error, Result};
use crate::matio::Matrix;

fn to_faer(a: &Matrix) -> Mat<f64> {
    a.view().into_faer().to_owned()
}

fn from_faer(m: MatRef<'_, f64>) -> Matrix {
    m.into_ndarray().to_owned()
}

/// Thin SVD `a = U diag(s) V^T` with `r = min(rows, cols)` columns in `U`
/// and `V` and `s` in non-increasing order. No sign normalization here.
pub(crate) fn thin_svd(a: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let svd = to_faer(a)
        .thin_svd()
        .map_err(|e| Error::Decomposition(format!("thin SVD failed: {e:?}")))?;
    let s = svd.S().column_vector().iter().copied().collect();
    Ok((from_faer(svd.U()), s, from_faer(svd.V())))
}

/// Eigen-decomposition of a symmetric matrix; eigenvalues ascending.
pub(crate) fn eigh(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let eig = to_faer(a)
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Decomposition(format!("symmetric eigendecomposition failed: {e:?}")))?;
    let vals = eig.S().column_vector().iter().copied().collect();
    Ok((vals, from_faer(eig.U())))
}

/// Smallest eigenvalue of a symmetric matrix.
pub(crate) fn eigh_min(a: &Matrix) -> Result<f64> {
    Ok(eigh(a)?.0[0])
}

/// Solves `k x = rhs` for symmetric positive definite `k` via Cholesky.
/// `lambda` is only quoted in the error when `k` is not positive definite.
pub(crate) fn spd_solve(k: &Matrix, rhs: &Matrix, lambda: f64) -> Result<Matrix> {
    let not_pd = || {
        let lambda_min = eigh_min(k).unwrap_or(f64::NAN);
        Error::NotPositiveDefinite { lambda, lambda_min }
    };
    let kf = to_faer(k);
    let llt = kf.llt(faer::Side::Lower).map_err(|_| not_pd())?;
    let solution = from_faer(llt.solve(to_faer(rhs)).as_ref());
    // A zero pivot can survive factorization as inf/NaN instead of an error.
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(not_pd());
    }
    Ok(solution)
}

pub(crate) fn frob(a: &Matrix) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Largest singular value.
pub(crate) fn spectral_norm(a: &Matrix) -> Result<f64> {
    if a.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let (_, s, _) = thin_svd(a)?;
    Ok(s.first().copied().unwrap_or(0.0))
}
