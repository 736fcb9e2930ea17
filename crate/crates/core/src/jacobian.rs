//! Jacobian of the residual `r(σ) = b - m(σ)` with respect to the layer
//! conductivities: analytic recursion, forward differences and Broyden
//! rank-one updates.
//!
//! The analytic route differentiates the surface-admittance recursion
//! alongside the recursion itself. With
//!
//! ```text
//! a_k = (Y_{k+1} + N_k t_k) / (N_k + Y_{k+1} t_k)
//! b_k = 1 / ((N_k + Y_{k+1} t_k)² cosh²(d_k u_k)),     t_k = tanh(d_k u_k)
//! ```
//!
//! the partials `Y'_{kj} = ∂Y_k/∂σ_j` satisfy `Y'_{nn} = 1/(2u_n)` and, for
//! `k = n-1, ..., 1`,
//!
//! ```text
//! Y'_{kj} = N_k² b_k Y'_{k+1,j}                                      j > k
//! Y'_{kk} = a_k/(2u_k) + b_k/2 [N_k² d_k - Y_{k+1}(d_k Y_{k+1} + 1/(iμ_kω))]
//! Y'_{kj} = 0                                                        j < k
//! ```
//!
//! `b_k` is used instead of `1 - t_k²`, which cancels badly.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{
    air_admittance, propagation_constant, saturating_tanh, InstrumentSetup, LayeredEarthModel,
    SoundingData, SoundingKernel, MU0, TANH_SATURATION,
};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default relative forward-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum JacobianProvenance {
    Analytic,
    FiniteDifference { step: f64 },
    /// Number of rank-one updates since the last exact evaluation.
    Broyden { age: usize },
}

/// Dense `n_data × n_layers` Jacobian of the residual.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobianMatrix {
    entries: DMatrix<f64>,
    provenance: JacobianProvenance,
}

impl JacobianMatrix {
    pub fn new(entries: DMatrix<f64>, provenance: JacobianProvenance) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("Jacobian entries must be finite".into()));
        }
        Ok(Self {
            entries,
            provenance,
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn provenance(&self) -> JacobianProvenance {
        self.provenance
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    /// Writes the matrix as CSV, one row per datum.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let header: Vec<String> = (1..=self.ncols()).map(|j| format!("sigma_{j}")).collect();
        wtr.write_record(&header)?;
        for row in self.entries.row_iter() {
            wtr.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `Y_1(λ)` together with `∂Y_1/∂σ_j` for every layer.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmittanceGradient {
    pub y1: Complex64,
    pub dy1: Vec<Complex64>,
}

/// Joint evaluation of the surface admittance and its conductivity
/// gradient. Only one length-`n` buffer is kept: `Y'_{k+1,·}` is
/// overwritten by `Y'_{k,·}` at each step.
pub fn admittance_gradient(lambda: f64, model: &LayeredEarthModel, omega: f64) -> Result<AdmittanceGradient> {
    let n = model.n_layers();
    let sigma = model.sigma();
    let mu = model.mu();
    let d = model.thickness();

    let u_n = propagation_constant(lambda, sigma[n - 1], mu[n - 1], omega);
    let mut y = u_n / (I * mu[n - 1] * omega);
    let mut dy = vec![Complex64::new(0.0, 0.0); n];
    dy[n - 1] = 1.0 / (2.0 * u_n);

    for k in (0..n - 1).rev() {
        let imw = I * mu[k] * omega;
        let u = propagation_constant(lambda, sigma[k], mu[k], omega);
        let nk = u / imw;
        let du = u * d[k];
        let t = saturating_tanh(du);
        let den = nk + y * t;
        let a = (y + nk * t) / den;
        let b = if du.re > TANH_SATURATION {
            Complex64::new(0.0, 0.0)
        } else {
            let c = du.cosh();
            1.0 / (den * den * c * c)
        };
        let diag = a / (2.0 * u) + b / 2.0 * (nk * nk * d[k] - y * (d[k] * y + 1.0 / imw));
        let carry = nk * nk * b;
        for v in &mut dy[k + 1..] {
            *v *= carry;
        }
        dy[k] = diag;
        y = nk * a;
        if !(y.re.is_finite() && y.im.is_finite() && diag.re.is_finite() && diag.im.is_finite()) {
            return Err(Error::NonFiniteLayer { layer: k + 1, lambda });
        }
    }
    Ok(AdmittanceGradient { y1: y, dy1: dy })
}

/// `∂R_0/∂Y_1 = -2iμ0ωλ / (λ + iμ0ωY_1)²`.
pub fn reflection_sensitivity(lambda: f64, y1: Complex64, omega: f64) -> Complex64 {
    let imw = I * MU0 * omega;
    let den = lambda + imw * y1;
    -2.0 * imw * lambda / (den * den)
}

impl SoundingKernel {
    /// Predicted data and analytic Jacobian from one pass over the nodes.
    pub fn predict_with_jacobian(&self, model: &LayeredEarthModel) -> Result<(Vec<f64>, JacobianMatrix)> {
        let omega = self.setup().omega();
        let n = model.n_layers();
        let q = self.nodes().len();
        let mut im_r0 = DVector::zeros(q);
        let mut im_dr0 = DMatrix::zeros(q, n);
        for (i, &lambda) in self.nodes().iter().enumerate() {
            let grad = admittance_gradient(lambda, model, omega)?;
            let n0 = air_admittance(lambda, omega);
            let den = n0 + grad.y1;
            if den.norm() == 0.0 {
                return Err(Error::SingularReflection { lambda });
            }
            im_r0[i] = ((n0 - grad.y1) / den).im;
            let sens = reflection_sensitivity(lambda, grad.y1, omega);
            for (j, dy) in grad.dy1.iter().enumerate() {
                im_dr0[(i, j)] = (sens * dy).im;
            }
        }
        let predicted = (self.weights() * im_r0).as_slice().to_vec();
        // r = b - K Im R0, hence J = -K Im(∂R0/∂σ)
        let jac = -(self.weights() * im_dr0);
        Ok((predicted, JacobianMatrix::new(jac, JacobianProvenance::Analytic)?))
    }

    pub fn jacobian(&self, model: &LayeredEarthModel) -> Result<JacobianMatrix> {
        Ok(self.predict_with_jacobian(model)?.1)
    }
}

/// Analytic Jacobian of the residual with the built-in filters.
pub fn analytic_jacobian(model: &LayeredEarthModel, setup: &InstrumentSetup) -> Result<JacobianMatrix> {
    SoundingKernel::new(setup)?.jacobian(model)
}

/// Forward-difference Jacobian of an arbitrary vector function. Column `j`
/// uses the step `delta · max(|σ_j|, 1)`.
pub fn fd_jacobian_with<F>(mut f: F, sigma: &[f64], delta: f64) -> Result<JacobianMatrix>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidInput("finite-difference step must be positive".into()));
    }
    let base = f(sigma)?;
    let mut jac = DMatrix::zeros(base.len(), sigma.len());
    let mut probe = sigma.to_vec();
    for j in 0..sigma.len() {
        let h = delta * sigma[j].abs().max(1.0);
        probe[j] = sigma[j] + h;
        // the realized step, not h, keeps affine maps exact
        let step = probe[j] - sigma[j];
        let shifted = f(&probe)?;
        if shifted.len() != base.len() {
            return Err(Error::Shape("function changed output length".into()));
        }
        for (i, (s, b)) in shifted.iter().zip(&base).enumerate() {
            jac[(i, j)] = (s - b) / step;
        }
        probe[j] = sigma[j];
    }
    JacobianMatrix::new(jac, JacobianProvenance::FiniteDifference { step: delta })
}

/// Forward-difference Jacobian of the residual `b - m(σ)` at `model`.
pub fn fd_jacobian(
    model: &LayeredEarthModel,
    setup: &InstrumentSetup,
    data: &SoundingData,
    delta: f64,
) -> Result<JacobianMatrix> {
    let kernel = SoundingKernel::new(setup)?;
    fd_jacobian_with(
        |s| kernel.residual(&model.with_sigma(s)?, data),
        model.sigma(),
        delta,
    )
}

/// Broyden's rank-one secant update `J += (y - J s) sᵀ / (sᵀ s)`.
pub fn broyden_update(jac: &mut JacobianMatrix, s: &[f64], y: &[f64]) -> Result<()> {
    if s.len() != jac.ncols() || y.len() != jac.nrows() {
        return Err(Error::Shape(format!(
            "Broyden update of a {}x{} matrix with |s| = {}, |y| = {}",
            jac.nrows(),
            jac.ncols(),
            s.len(),
            y.len()
        )));
    }
    let s = DVector::from_column_slice(s);
    let y = DVector::from_column_slice(y);
    let ss = s.dot(&s);
    if ss == 0.0 {
        return Err(Error::InvalidInput("Broyden update with a zero step".into()));
    }
    let defect = (y - &jac.entries * &s) / ss;
    jac.entries.ger(1.0, &defect, &s, 1.0);
    if jac.entries.iter().any(|v| !v.is_finite()) {
        return Err(Error::Factorization("Broyden update produced non-finite entries".into()));
    }
    jac.provenance = match jac.provenance {
        JacobianProvenance::Broyden { age } => JacobianProvenance::Broyden { age: age + 1 },
        _ => JacobianProvenance::Broyden { age: 1 },
    };
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{surface_admittance, Orientations, DEFAULT_FREQUENCY};
    use std::f64::consts::PI;

    const OMEGA: f64 = 2.0 * PI * DEFAULT_FREQUENCY;

    fn crel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn single_layer_gradient() {
        let m = LayeredEarthModel::new(vec![0.4], vec![]).unwrap();
        let g = admittance_gradient(0.8, &m, OMEGA).unwrap();
        let u = propagation_constant(0.8, 0.4, MU0, OMEGA);
        assert_eq!(g.dy1, vec![1.0 / (2.0 * u)]);
        assert_eq!(g.y1, surface_admittance(0.8, &m, OMEGA).unwrap());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let m = LayeredEarthModel::new(vec![0.1, 0.5, 0.2], vec![0.5, 0.5]).unwrap();
        let g = admittance_gradient(1.0, &m, OMEGA).unwrap();
        for j in 0..3 {
            let h = 1e-7 * m.sigma()[j].max(1.0);
            let mut plus = m.sigma().to_vec();
            let mut minus = m.sigma().to_vec();
            plus[j] += h;
            minus[j] -= h;
            let yp = surface_admittance(1.0, &m.with_sigma(&plus).unwrap(), OMEGA).unwrap();
            let ym = surface_admittance(1.0, &m.with_sigma(&minus).unwrap(), OMEGA).unwrap();
            let fd = (yp - ym) / (2.0 * h);
            assert!(crel(g.dy1[j], fd) < 1e-6, "j = {j}: {} vs {fd}", g.dy1[j]);
        }
    }

    #[test]
    fn admittance_agrees_with_forward_recursion() {
        let m = LayeredEarthModel::new(vec![0.3, 2.0, 0.01, 5.0], vec![0.2, 0.7, 0.1]).unwrap();
        for &l in &[1e-5, 0.3, 7.0, 4e4] {
            let g = admittance_gradient(l, &m, OMEGA).unwrap();
            let y = surface_admittance(l, &m, OMEGA).unwrap();
            assert!(crel(g.y1, y) < 1e-14);
        }
    }

    #[test]
    fn zero_conductivity_sign_pattern() {
        let setup = InstrumentSetup::new(vec![0.0, 0.5], Orientations::Both).unwrap();
        let m = LayeredEarthModel::new(vec![1e-6; 4], vec![0.3; 3]).unwrap();
        let j = analytic_jacobian(&m, &setup).unwrap();
        for col in 0..4 {
            assert!(j.entries()[(0, col)] < 0.0);
            assert!(j.entries()[(2, col)] < 0.0);
        }
    }

    #[test]
    fn predict_with_jacobian_matches_predict() {
        let setup = InstrumentSetup::new(vec![0.0, 0.2, 0.9], Orientations::Both).unwrap();
        let kernel = SoundingKernel::new(&setup).unwrap();
        let m = LayeredEarthModel::new(vec![0.3, 1.2, 0.4], vec![0.4, 0.6]).unwrap();
        let (p, _) = kernel.predict_with_jacobian(&m).unwrap();
        let q = kernel.predict(&m).unwrap();
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() <= 1e-13 * b.abs().max(1e-3));
        }
    }

    #[test]
    fn fd_is_exact_for_affine_maps() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, -2.0, 0.5, 4.0, 3.0, 0.25]);
        let c = DVector::from_column_slice(&[0.1, 0.2, 0.3]);
        let f = |s: &[f64]| Ok((&a * DVector::from_column_slice(s) + &c).as_slice().to_vec());
        for &delta in &[1e-7, 1e-3, 0.5] {
            let j = fd_jacobian_with(f, &[0.25, 2.0], delta).unwrap();
            // no truncation error, only cancellation in f(σ + h) - f(σ)
            assert!((j.entries() - &a).amax() < 1e-14 / delta);
        }
        // exactly representable steps recover the matrix to round-off
        let j = fd_jacobian_with(f, &[0.5, 2.0], 0.25).unwrap();
        assert!((j.entries() - &a).amax() < 1e-14);
    }

    #[test]
    fn fd_rejects_bad_step_and_is_deterministic() {
        let f = |s: &[f64]| Ok(s.iter().map(|x| x * x).collect());
        assert!(fd_jacobian_with(f, &[1.0], 0.0).is_err());
        let a = fd_jacobian_with(f, &[1.0, 3.0], 1e-6).unwrap();
        let b = fd_jacobian_with(f, &[1.0, 3.0], 1e-6).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn broyden_fixed_point_and_errors() {
        let mut j = JacobianMatrix::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
            JacobianProvenance::Analytic,
        )
        .unwrap();
        let before = j.entries().clone();
        broyden_update(&mut j, &[1.0, 0.0], &[1.0, 3.0]).unwrap();
        assert_eq!(j.entries(), &before);
        assert_eq!(j.provenance(), JacobianProvenance::Broyden { age: 1 });
        broyden_update(&mut j, &[0.0, 1.0], &[2.0, 4.0]).unwrap();
        assert_eq!(j.provenance(), JacobianProvenance::Broyden { age: 2 });
        assert!(broyden_update(&mut j, &[0.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(broyden_update(&mut j, &[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn jacobian_csv_dump() {
        let j = JacobianMatrix::new(DMatrix::from_row_slice(1, 2, &[1.5, -2.0]), JacobianProvenance::Analytic)
            .unwrap();
        let mut out = Vec::new();
        j.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next().unwrap(), "sigma_1,sigma_2");
        assert_eq!(text.lines().count(), 2);
    }
}
