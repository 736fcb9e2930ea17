//! Generalized SVD of a Jacobian / operator pair.
//!
//! `J = U Σ_J Z⁻¹`, `L = V Σ_L Z⁻¹` with `U`, `V` orthogonal and `Z` square
//! nonsingular. Columns of `Z` are ordered
//! `[null(J) (wide only) | pairs by nondecreasing cᵢ/sᵢ | null(L)]`.
//!
//! The reduction is a thin QR of `[J; L] = [Q₁; Q₂] R` followed by a CS
//! decomposition of `(Q₁, Q₂)`. Directions with `s ≤ 1/√2` take their right
//! basis from the SVD of `Q₂`; the rest are re-split by an SVD of their `Q₁`
//! image, so clustered values near either end keep orthogonal bases.

use nalgebra::{DMatrix, DVector};

use super::dense::{full_svd, singular_values};
use crate::error::{Error, Result};

/// Relative singular-value floor for the rank preconditions.
pub const RANK_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsvdShape {
    /// `rows ≥ n`: every direction is seen by `J`.
    Tall,
    /// `rows < n`: `J` has an `n − rows` dimensional null space.
    Wide,
}

#[derive(Debug, Clone)]
pub struct GsvdFactors {
    shape: GsvdShape,
    rows: usize,
    n: usize,
    t: usize,
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    z: DMatrix<f64>,
    z_inv: DMatrix<f64>,
    c: Vec<f64>,
    s: Vec<f64>,
}

impl GsvdFactors {
    pub fn new(j: &DMatrix<f64>, l: &DMatrix<f64>) -> Result<Self> {
        let (rows, n) = j.shape();
        let t = l.nrows();
        if l.ncols() != n {
            return Err(Error::Shape(format!(
                "J has {n} columns but L has {}",
                l.ncols()
            )));
        }
        if rows == 0 || t == 0 || t > n {
            return Err(Error::Shape(format!(
                "need J with rows and L with 1..={n} rows, got {rows}×{n} and {t}×{n}"
            )));
        }
        if j.iter().chain(l.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Factorization("non-finite entries".into()));
        }
        let shape = if rows >= n {
            GsvdShape::Tall
        } else if rows + t > n {
            GsvdShape::Wide
        } else {
            return Err(Error::Precondition(format!(
                "wide pair needs rows − n + t > 0, got {rows} − {n} + {t}"
            )));
        };

        let sv_l = singular_values(l)?;
        if sv_l[t - 1] <= RANK_FLOOR * sv_l[0] {
            return Err(Error::Precondition("L does not have full row rank".into()));
        }

        let mut stacked = DMatrix::zeros(rows + t, n);
        stacked.rows_mut(0, rows).copy_from(j);
        stacked.rows_mut(rows, t).copy_from(l);
        let qr = stacked.qr();
        let q = qr.q();
        let r = qr.r();
        let sv_r = singular_values(&r)?;
        if sv_r[n - 1] <= RANK_FLOOR * sv_r[0] {
            return Err(Error::Precondition(
                "null spaces of J and L intersect nontrivially".into(),
            ));
        }
        let q1 = q.rows(0, rows).clone_owned();
        let q2 = q.rows(rows, t).clone_owned();

        // SVD of Q₂ padded to n × n; s descending.
        let mut padded = DMatrix::zeros(n, n);
        padded.rows_mut(0, t).copy_from(&q2);
        let q2_svd = full_svd(&padded)?;
        let (s_all, w) = (q2_svd.sigma, q2_svd.v);
        let a_left = q2_svd.u.view((0, 0), (t, t)).clone_owned();

        let n_jnull = n.saturating_sub(rows);
        let split = std::f64::consts::FRAC_1_SQRT_2;
        let nb = s_all.iter().take(t).take_while(|&&x| x > split).count().max(n_jnull);
        let ng = n - nb;
        if ng > rows {
            return Err(Error::Factorization("CS split inconsistent with rank".into()));
        }

        // Good block: columns nb..n, reversed so cosines decrease.
        let x = &q1 * &w;
        let good: Vec<usize> = (nb..n).rev().collect();
        let x_g = x.select_columns(good.iter());
        let (qg, tg) = householder_full(&x_g);
        let mut u_g = qg.columns(0, ng).clone_owned();
        let mut c_g = vec![0.0; ng];
        for k in 0..ng {
            c_g[k] = tg[(k, k)];
            if c_g[k] < 0.0 {
                c_g[k] = -c_g[k];
                u_g.column_mut(k).neg_mut();
            }
        }

        // Bad block: columns 0..nb, re-split inside the exact complement of
        // the good U so tiny cosines cannot leak into it.
        let complement = qg.columns(ng, rows - ng).clone_owned();
        let x_b = complement.transpose() * x.columns(0, nb);
        let bad_svd = full_svd(&x_b)?;
        let mut c_b = bad_svd.sigma;
        c_b.resize(nb, 0.0);
        let w_b = w.columns(0, nb) * &bad_svd.v;
        let n_bad_pairs = nb - n_jnull;
        let u_b = &complement * bad_svd.u.columns(0, n_bad_pairs);

        // V for the bad block: QR of Q₂ W_B off the good left vectors.
        let good_pairs: Vec<usize> = (nb..t).collect();
        let v_g = a_left.select_columns(good_pairs.iter());
        let y_b = &q2 * &w_b;
        let y_b = &y_b - &v_g * (v_g.transpose() * &y_b);
        let (qv, tv) = householder_full(&y_b);
        let mut v_b = qv.columns(0, nb).clone_owned();
        let mut s_b = vec![0.0; nb];
        for k in 0..nb {
            s_b[k] = tv[(k, k)];
            if s_b[k] < 0.0 {
                s_b[k] = -s_b[k];
                v_b.column_mut(k).neg_mut();
            }
        }

        // Assemble in Z order. Bad pairs come out of the SVD with cosines
        // decreasing; good pairs follow W, whose cosines increase.
        let p = match shape {
            GsvdShape::Tall => n,
            GsvdShape::Wide => rows,
        };
        let pbar = p - (n - t);
        debug_assert_eq!(pbar, n_bad_pairs + (t - nb));

        let mut w_final = DMatrix::zeros(n, n);
        let mut v = DMatrix::zeros(t, t);
        let mut u_sel = DMatrix::zeros(rows, p);
        let mut c = Vec::with_capacity(pbar);
        let mut s = Vec::with_capacity(pbar);
        let mut col = 0;
        for k in n_bad_pairs..nb {
            w_final.set_column(col, &w_b.column(k));
            v.set_column(col, &v_b.column(k));
            col += 1;
        }
        for k in (0..n_bad_pairs).rev() {
            w_final.set_column(col, &w_b.column(k));
            v.set_column(col, &v_b.column(k));
            u_sel.set_column(col - n_jnull, &u_b.column(k));
            let h = c_b[k].hypot(s_b[k]);
            c.push(c_b[k] / h);
            s.push(s_b[k] / h);
            col += 1;
        }
        // good columns: W index k ↔ position ng − 1 − (k − nb) in the QR
        for k in nb..n {
            let g = ng - 1 - (k - nb);
            w_final.set_column(col, &w.column(k));
            u_sel.set_column(col - n_jnull, &u_g.column(g));
            if k < t {
                v.set_column(col, &a_left.column(k));
                let h = c_g[g].hypot(s_all[k]);
                c.push(c_g[g] / h);
                s.push(s_all[k] / h);
            }
            col += 1;
        }
        debug_assert_eq!(c.len(), pbar);

        let (u_full, _) = householder_full(&u_sel);
        let mut u = DMatrix::zeros(rows, rows);
        u.columns_mut(0, rows - p)
            .copy_from(&u_full.columns(p, rows - p));
        u.columns_mut(rows - p, p).copy_from(&u_sel);

        let z = r
            .solve_upper_triangular(&w_final)
            .ok_or_else(|| Error::Factorization("singular triangular factor".into()))?;
        let z_inv = w_final.transpose() * &r;

        Ok(Self { shape, rows, n, t, u, v, z, z_inv, c, s })
    }

    pub fn shape(&self) -> GsvdShape {
        self.shape
    }

    /// Number of directions `J` sees: `n` when tall, `rows` when wide.
    pub fn p(&self) -> usize {
        match self.shape {
            GsvdShape::Tall => self.n,
            GsvdShape::Wide => self.rows,
        }
    }

    /// Largest admissible truncation index.
    pub fn pbar(&self) -> usize {
        self.c.len()
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    /// `cᵢ / sᵢ`, nondecreasing.
    pub fn generalized_values(&self) -> Vec<f64> {
        self.c.iter().zip(&self.s).map(|(c, s)| c / s).collect()
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn z_inv(&self) -> &DMatrix<f64> {
        &self.z_inv
    }

    /// The `rows × n` middle factor of `J`.
    pub fn sigma_j(&self) -> DMatrix<f64> {
        let (off_u, off_z) = self.offsets();
        let pbar = self.pbar();
        let mut m = DMatrix::zeros(self.rows, self.n);
        for (i, &c) in self.c.iter().enumerate() {
            m[(off_u + i, off_z + i)] = c;
        }
        for i in pbar..self.p() {
            m[(off_u + i, off_z + i)] = 1.0;
        }
        m
    }

    /// The `t × n` middle factor of `L`.
    pub fn sigma_l(&self) -> DMatrix<f64> {
        let n_jnull = self.t - self.pbar();
        let mut m = DMatrix::zeros(self.t, self.n);
        for i in 0..n_jnull {
            m[(i, i)] = 1.0;
        }
        for (i, &s) in self.s.iter().enumerate() {
            m[(n_jnull + i, n_jnull + i)] = s;
        }
        m
    }

    fn offsets(&self) -> (usize, usize) {
        let p = self.p();
        (self.rows - p, self.n - p)
    }

    /// Truncated step keeping the `ℓ` largest generalized values plus the
    /// whole null space of `L`; `0 ≤ ℓ ≤ p̄`.
    pub fn tgsvd_step(&self, r: &DVector<f64>, ell: usize) -> Result<DVector<f64>> {
        let pbar = self.pbar();
        if ell > pbar {
            return Err(Error::IndexOutOfRange { index: ell, min: 0, max: pbar });
        }
        if r.len() != self.rows {
            return Err(Error::Shape(format!(
                "residual has {} entries, Jacobian has {} rows",
                r.len(),
                self.rows
            )));
        }
        let (off_u, off_z) = self.offsets();
        let mut step = DVector::zeros(self.n);
        for i in pbar - ell..pbar {
            if self.c[i] == 0.0 {
                continue;
            }
            let coef = self.u.column(off_u + i).dot(r) / self.c[i];
            step.axpy(-coef, &self.z.column(off_z + i), 1.0);
        }
        for i in pbar..self.p() {
            let coef = self.u.column(off_u + i).dot(r);
            step.axpy(-coef, &self.z.column(off_z + i), 1.0);
        }
        Ok(step)
    }
}

/// Householder QR with a full square orthogonal factor. Zero columns are
/// passed through, so the factor stays orthogonal for rank-deficient input.
pub(crate) fn householder_full(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, k) = a.shape();
    let mut r = a.clone();
    let mut q = DMatrix::identity(m, m);
    for j in 0..k.min(m) {
        let mut v: DVector<f64> = r.view((j, j), (m - j, 1)).column(0).clone_owned();
        let norm = v.norm();
        if norm == 0.0 {
            continue;
        }
        v[0] += norm.copysign(v[0]);
        let vn = v.norm();
        v /= vn;
        {
            let mut block = r.view_mut((j, j), (m - j, k - j));
            let proj = v.transpose() * &block;
            block -= (2.0 * &v) * proj;
        }
        {
            let mut block = q.view_mut((0, j), (m, m - j));
            let proj = &block * &v;
            block -= (2.0 * proj) * v.transpose();
        }
    }
    (q, r)
}
