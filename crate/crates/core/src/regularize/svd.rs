use nalgebra::{DMatrix, DVector};

use super::dense::full_svd;
use crate::error::{Error, Result};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-14;

/// SVD of the Jacobian, singular values in decreasing order.
///
/// `u` is `rows × rows`, `v` is `n × n` and `gamma` has `min(rows, n)`
/// entries; `rank` counts those above `RANK_TOLERANCE · γ₁`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    u: DMatrix<f64>,
    gamma: Vec<f64>,
    v: DMatrix<f64>,
    rank: usize,
}

impl SvdFactors {
    pub fn new(j: &DMatrix<f64>) -> Result<Self> {
        if j.is_empty() {
            return Err(Error::Shape("cannot factor an empty matrix".into()));
        }
        let svd = full_svd(j)?;
        let (u, gamma, v) = (svd.u, svd.sigma, svd.v);
        let cutoff = RANK_TOLERANCE * gamma[0];
        let rank = gamma.iter().take_while(|&&g| g > cutoff).count();
        Ok(Self { u, gamma, v, rank })
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    /// All computed singular values, including those below the rank cutoff.
    pub fn singular_values(&self) -> &[f64] {
        &self.gamma
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `γ₁ / γ_k` over every computed value; infinite when the last one is zero.
    pub fn condition_number(&self) -> f64 {
        let last = *self.gamma.last().expect("nonempty");
        if last == 0.0 {
            f64::INFINITY
        } else {
            self.gamma[0] / last
        }
    }

    /// Truncated step `-Σ_{i<ℓ} (uᵢᵀr / γᵢ) vᵢ`, `1 ≤ ℓ ≤ rank`.
    pub fn tsvd_step(&self, r: &DVector<f64>, ell: usize) -> Result<DVector<f64>> {
        if ell < 1 || ell > self.rank {
            return Err(Error::IndexOutOfRange { index: ell, min: 1, max: self.rank });
        }
        if r.len() != self.u.nrows() {
            return Err(Error::Shape(format!(
                "residual has {} entries, Jacobian has {} rows",
                r.len(),
                self.u.nrows()
            )));
        }
        let mut s = DVector::zeros(self.v.nrows());
        for i in 0..ell {
            let coef = self.u.column(i).dot(r) / self.gamma[i];
            s.axpy(-coef, &self.v.column(i), 1.0);
        }
        Ok(s)
    }
}
