//! Dense SVD backend. Matrices stay in nalgebra; the decomposition itself runs
//! in faer, whose bidiagonal solver is reliable on inputs with nearly
//! orthogonal columns.

use faer::Mat;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `A = U diag(σ) Vᵀ` with `U`, `V` square orthogonal and `σ` nonincreasing.
pub(crate) struct FullSvd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
}

fn to_faer(a: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(a: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn check(a: &DMatrix<f64>) -> Result<()> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Factorization("matrix has non-finite entries".into()));
    }
    Ok(())
}

pub(crate) fn full_svd(a: &DMatrix<f64>) -> Result<FullSvd> {
    check(a)?;
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(FullSvd {
            u: DMatrix::identity(m, m),
            sigma: Vec::new(),
            v: DMatrix::identity(n, n),
        });
    }
    let svd = to_faer(a)
        .svd()
        .map_err(|e| Error::Factorization(format!("SVD failed: {e:?}")))?;
    let sigma = svd.S().column_vector().iter().copied().collect();
    Ok(FullSvd { u: from_faer(svd.U()), sigma, v: from_faer(svd.V()) })
}

/// Singular values only, nonincreasing.
pub(crate) fn singular_values(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    check(a)?;
    if a.is_empty() {
        return Ok(Vec::new());
    }
    to_faer(a)
        .singular_values()
        .map_err(|e| Error::Factorization(format!("SVD failed: {e:?}")))
}
