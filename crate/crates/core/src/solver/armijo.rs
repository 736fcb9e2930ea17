use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Outcome of the step-length search.
#[derive(Clone, Debug, PartialEq)]
pub enum LineSearch {
    /// Largest admissible `α` with the iterate and residual it produces.
    Accepted { alpha: f64, sigma: Vec<f64>, residual: Vec<f64> },
    /// No `α ≥ alpha_min` qualified. `trials` counts rejected candidates.
    Floor { trials: usize },
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Step length by halving from 1.
///
/// A candidate `α` is accepted when `σ + αs > 0` componentwise and
/// `‖r(σ)‖² − ‖r(σ+αs)‖² ≥ ½α‖Js‖²` with a strictly positive left side.
/// Non-finite or failed residual evaluations reject the candidate.
pub fn armijo_step<F>(
    sigma: &[f64],
    step: &[f64],
    jac: &DMatrix<f64>,
    residual: &[f64],
    mut residual_fn: F,
    alpha_min: f64,
) -> Result<LineSearch>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if sigma.len() != step.len() || jac.ncols() != step.len() || jac.nrows() != residual.len() {
        return Err(Error::Shape(format!(
            "line search with |σ| = {}, |s| = {}, J {}x{}, |r| = {}",
            sigma.len(),
            step.len(),
            jac.nrows(),
            jac.ncols(),
            residual.len()
        )));
    }
    if sigma.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Precondition("line search needs a strictly positive iterate".into()));
    }
    if step.iter().any(|v| !v.is_finite()) || step.iter().all(|&v| v == 0.0) {
        return Err(Error::Precondition("line search needs a finite nonzero step".into()));
    }
    if !(alpha_min > 0.0 && alpha_min <= 1.0) {
        return Err(Error::InvalidInput(format!("alpha_min must lie in (0, 1], got {alpha_min}")));
    }

    let js_sq = (jac * DVector::from_column_slice(step)).norm_squared();
    let r0_sq = norm_sq(residual);
    let mut alpha = 1.0;
    let mut trials = 0;
    let mut trial = vec![0.0; sigma.len()];
    while alpha >= alpha_min {
        for ((t, x), s) in trial.iter_mut().zip(sigma).zip(step) {
            *t = x + alpha * s;
        }
        if trial.iter().all(|&t| t > 0.0) {
            if let Ok(r) = residual_fn(&trial) {
                let r_sq = norm_sq(&r);
                let decrease = r0_sq - r_sq;
                if r_sq.is_finite() && r.len() == residual.len() && decrease > 0.0 && decrease >= 0.5 * alpha * js_sq {
                    return Ok(LineSearch::Accepted { alpha, sigma: trial, residual: r });
                }
            }
        }
        trials += 1;
        alpha *= 0.5;
    }
    Ok(LineSearch::Floor { trials })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shifted(target: Vec<f64>) -> impl FnMut(&[f64]) -> Result<Vec<f64>> {
        move |x| Ok(x.iter().zip(&target).map(|(a, b)| a - b).collect())
    }

    #[test]
    fn linear_residual_takes_full_step() {
        let sigma = [1.0, 2.0];
        let target = vec![0.5, 1.5];
        let r: Vec<f64> = sigma.iter().zip(&target).map(|(a, b)| a - b).collect();
        let s: Vec<f64> = r.iter().map(|v| -v).collect();
        let out = armijo_step(&sigma, &s, &DMatrix::identity(2, 2), &r, shifted(target), 1e-5).unwrap();
        match out {
            LineSearch::Accepted { alpha, sigma, residual } => {
                assert_eq!(alpha, 1.0);
                assert_eq!(sigma, vec![0.5, 1.5]);
                assert_eq!(residual, vec![0.0, 0.0]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn positivity_forces_a_quarter_step() {
        // σ + αs = 0.1 − 0.2α is positive only for α < 1/2
        let out = armijo_step(&[0.1], &[-0.2], &DMatrix::identity(1, 1), &[0.2], shifted(vec![-0.1]), 1e-5)
            .unwrap();
        match out {
            LineSearch::Accepted { alpha, .. } => assert_eq!(alpha, 0.25),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ascent_direction_hits_the_floor() {
        // the step increases ‖r‖ for every α
        let out =
            armijo_step(&[1.0], &[1.0], &DMatrix::identity(1, 1), &[0.5], shifted(vec![0.5]), 1e-5).unwrap();
        // α = 1, 1/2, …, 2⁻¹⁶ are the candidates at or above 1e-5
        assert_eq!(out, LineSearch::Floor { trials: 17 });
    }

    #[test]
    fn failed_evaluations_are_rejections() {
        let mut calls = 0;
        let f = |x: &[f64]| {
            calls += 1;
            if x[0] < 0.9 {
                Ok(vec![f64::NAN])
            } else {
                Ok(vec![x[0] - 0.5])
            }
        };
        let out = armijo_step(&[1.0], &[-0.5], &DMatrix::identity(1, 1), &[0.5], f, 1e-5).unwrap();
        // α = 1 → 0.5 (NaN), α = 1/2 → 0.75 (NaN), α = 1/4 → 0.875 (NaN), α = 1/8 → 0.9375
        match out {
            LineSearch::Accepted { alpha, .. } => assert_eq!(alpha, 0.125),
            other => panic!("{other:?}"),
        }
        assert_eq!(calls, 4);
    }

    #[test]
    fn preconditions() {
        let j = DMatrix::identity(1, 1);
        assert!(armijo_step(&[0.0], &[1.0], &j, &[1.0], shifted(vec![0.0]), 1e-5).is_err());
        assert!(armijo_step(&[1.0], &[0.0], &j, &[1.0], shifted(vec![0.0]), 1e-5).is_err());
        assert!(armijo_step(&[1.0, 1.0], &[1.0], &j, &[1.0], shifted(vec![0.0]), 1e-5).is_err());
    }
}
