//! Independent route to the forward map: reflection factor from the
//! exponential reflection-coefficient recursion, Bessel functions from their
//! periodic integral representation, and a plain composite Simpson rule in λ.
//! Only the instrument constants are shared with the library.

use std::f64::consts::PI;

use emsound::forward::{
    forward_map, reflection_factor, InstrumentSetup, LayeredEarthModel, Orientation, Orientations, MU0,
};
use num_complex::Complex64;

/// `J_nu(x) = (1/2π) ∫_{-π}^{π} cos(nu θ − x sin θ) dθ`; the trapezoid rule on
/// a full period is exact up to round-off once the point count exceeds |x|.
fn bessel(nu: f64, x: f64) -> f64 {
    let n = 64 + 2 * x.abs().ceil() as usize;
    (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            (nu * t - x * t.sin()).cos()
        })
        .sum::<f64>()
        / n as f64
}

/// `R_0` through interface reflection coefficients
/// `R_i = (r_i + R_{i+1} e^{−2u_{i+1}d_{i+1}}) / (1 + r_i R_{i+1} e^{−2u_{i+1}d_{i+1}})`
/// with uniform permeability μ0 (air is medium 0).
fn reflection_oracle(lambda: f64, sigma: &[f64], d: &[f64], omega: f64) -> Complex64 {
    let u: Vec<Complex64> = std::iter::once(Complex64::new(lambda, 0.0))
        .chain(sigma.iter().map(|&s| (Complex64::new(lambda * lambda, s * MU0 * omega)).sqrt()))
        .collect();
    let r = |i: usize| (u[i] - u[i + 1]) / (u[i] + u[i + 1]);
    let n = sigma.len();
    let mut big_r = r(n - 1);
    for i in (0..n - 1).rev() {
        let decay = (-2.0 * u[i + 1] * d[i]).exp();
        big_r = (r(i) + big_r * decay) / (1.0 + r(i) * big_r * decay);
    }
    big_r
}

fn simpson<F: Fn(f64) -> f64>(f: F, upper: f64, intervals: usize) -> f64 {
    let h = upper / intervals as f64;
    let mut acc = f(0.0) + f(upper);
    for k in 1..intervals {
        acc += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// Brute-force apparent conductivities, same row order as the library.
fn brute_force(model: &LayeredEarthModel, setup: &InstrumentSetup) -> Vec<f64> {
    let omega = setup.omega();
    let r = setup.coil_separation();
    let scale = 4.0 / (MU0 * omega);
    setup
        .rows()
        .map(|(orientation, h)| {
            // e^{−2hλ} < 1e-17 beyond this point
            let upper = 20.0 / h;
            // both integrands carry a factor λ, and r_i is 0/0 at λ = 0 over a
            // non-conducting layer
            let im_r0 = |l: f64| if l == 0.0 { 0.0 } else { reflection_oracle(l, model.sigma(), model.thickness(), omega).im };
            match orientation {
                Orientation::Vertical => {
                    scale * r * simpson(|l| -l * (-2.0 * h * l).exp() * im_r0(l) * bessel(0.0, r * l) * l, upper, 40_000)
                }
                Orientation::Horizontal => {
                    scale * simpson(|l| -(-2.0 * h * l).exp() * im_r0(l) * bessel(1.0, r * l) * l, upper, 40_000)
                }
            }
        })
        .collect()
}

fn models() -> Vec<LayeredEarthModel> {
    vec![
        LayeredEarthModel::new(vec![0.5], vec![]).unwrap(),
        LayeredEarthModel::new(vec![0.1, 1.0], vec![0.7]).unwrap(),
        LayeredEarthModel::equispaced(vec![0.05, 0.9, 0.2, 0.6, 0.01], 2.0).unwrap(),
        LayeredEarthModel::equispaced(vec![1.0, 0.0, 0.0, 0.3], 1.5).unwrap(),
    ]
}

#[test]
fn reflection_factor_agrees_with_coefficient_recursion() {
    let omega = 2.0 * PI * 14_600.0;
    for model in models() {
        for lambda in [1e-4, 0.01, 0.3, 1.0, 5.0, 40.0] {
            let lib = reflection_factor(lambda, &model, omega).unwrap();
            let oracle = reflection_oracle(lambda, model.sigma(), model.thickness(), omega);
            // λ − u cancels for large λ: round-off of order ε·λ/|R|
            let tol = 1e-12 * oracle.norm() + 1e-14 * lambda;
            assert!((lib - oracle).norm() <= tol, "{lambda}: {lib} vs {oracle}");
        }
    }
}

#[test]
fn bessel_oracle_sanity() {
    // tabulated values
    assert!((bessel(0.0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
    assert!((bessel(1.0, 1.0) - 0.440_050_585_744_933_5).abs() < 1e-15);
    assert!((bessel(0.0, 2.404_825_557_695_773)).abs() < 1e-14);
}

#[test]
fn filter_matches_brute_force_quadrature() {
    let setup = InstrumentSetup::new(vec![0.3, 0.5, 1.0, 1.9], Orientations::Both).unwrap();
    for model in models() {
        let filtered = forward_map(&model, &setup).unwrap();
        let oracle = brute_force(&model, &setup);
        for (i, (a, b)) in filtered.iter().zip(&oracle).enumerate() {
            let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!((a - b).abs() < 1e-6 * scale, "row {i}: filter {a} vs quadrature {b} ({:?})", model.sigma());
        }
    }
}
