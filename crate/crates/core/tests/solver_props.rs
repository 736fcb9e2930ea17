use emsound::forward::{forward_map, InstrumentSetup, LayeredEarthModel, Orientations, SoundingData};
use emsound::jacobian::{broyden_update, JacobianMatrix, JacobianProvenance};
use emsound::regularize::OperatorKind;
use emsound::solver::{solve, LayerGrid, SolverConfig, StepSource, Termination};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Random positive profile on `n` layers, a sounding at `m` heights, and a
/// deterministic perturbation of relative size `level`.
fn instance() -> impl Strategy<Value = (Vec<f64>, InstrumentSetup, Vec<f64>)> {
    (4usize..9, 3usize..7, 0.0f64..1e-2, any::<bool>()).prop_flat_map(|(n, m, level, single)| {
        prop::collection::vec(0.02f64..1.0, n).prop_map(move |sigma| {
            let heights = (0..m).map(|i| 1.9 * i as f64 / (m - 1) as f64).collect();
            let orientations = if single { Orientations::Vertical } else { Orientations::Both };
            let setup = InstrumentSetup::new(heights, orientations).unwrap();
            let model = LayeredEarthModel::equispaced(sigma.clone(), 2.0).unwrap();
            let mut b = forward_map(&model, &setup).unwrap();
            let scale = level * b.iter().map(|v| v * v).sum::<f64>().sqrt() / (b.len() as f64).sqrt();
            for (i, v) in b.iter_mut().enumerate() {
                *v += scale * (2.3 * i as f64 + 0.4).sin();
            }
            (sigma, setup, b)
        })
    })
}

fn kind() -> impl Strategy<Value = OperatorKind> {
    prop_oneof![
        Just(OperatorKind::Identity),
        Just(OperatorKind::FirstDifference),
        Just(OperatorKind::SecondDifference),
    ]
}

fn source() -> impl Strategy<Value = StepSource> {
    prop_oneof![
        Just(StepSource::Analytic),
        (1usize..6).prop_map(|refresh| StepSource::Broyden { refresh }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn iterates_stay_positive_and_residuals_decrease(
        (truth, setup, b) in instance(),
        kind in kind(),
        step_source in source(),
    ) {
        let n = truth.len();
        prop_assume!(n >= kind.min_size());
        let config = SolverConfig {
            grid: LayerGrid::Equispaced { n, depth: 2.0 },
            regularizer: kind,
            step_source,
            max_iter: 30,
            ..Default::default()
        };
        let data = SoundingData::new(b, &setup).unwrap();
        let result = solve(&config, &setup, &data).unwrap();
        prop_assert!(result.initial_sigma.iter().all(|&v| v > 0.0));
        for run in &result.runs {
            if run.termination == Termination::Failed {
                continue;
            }
            prop_assert!(run.sigma.iter().all(|&v| v > 0.0 && v.is_finite()), "ℓ = {}: {:?}", run.ell, run.sigma);
            prop_assert!(run.iterations <= config.max_iter);
            prop_assert_eq!(run.iterations, run.diagnostics.len());
            let mut prev = result.initial_residual_norm;
            for d in &run.diagnostics {
                if d.alpha > 0.0 {
                    prop_assert!(d.alpha <= 1.0 && d.alpha >= config.alpha_min);
                    prop_assert!(d.residual_norm < prev, "ℓ = {}: {} !< {}", run.ell, d.residual_norm, prev);
                    prev = d.residual_norm;
                }
            }
            prop_assert!((run.residual_norm - prev).abs() <= 1e-12 * prev.max(1e-300));
            if run.termination == Termination::AlphaFloor {
                prop_assert_eq!(run.diagnostics.last().unwrap().alpha, 0.0);
            }
        }
    }

    #[test]
    fn broyden_update_satisfies_the_secant_condition(
        (rows, cols) in (1usize..12, 1usize..12),
        seed in prop::collection::vec(-1.0f64..1.0, 12 * 12 + 24),
    ) {
        let entries = DMatrix::from_iterator(rows, cols, seed.iter().copied().take(rows * cols));
        let s: Vec<f64> = seed[144..144 + cols].to_vec();
        let y: Vec<f64> = seed[156..156 + rows].to_vec();
        prop_assume!(s.iter().map(|v| v * v).sum::<f64>() > 1e-6);
        let mut jac = JacobianMatrix::new(entries.clone(), JacobianProvenance::Analytic).unwrap();
        broyden_update(&mut jac, &s, &y).unwrap();
        let js = jac.entries() * DVector::from_column_slice(&s);
        let scale = 1.0 + entries.norm() * DVector::from_column_slice(&s).norm() + DVector::from_column_slice(&y).norm();
        for (a, b) in js.iter().zip(&y) {
            prop_assert!((a - b).abs() <= 1e-13 * scale, "{a} vs {b}");
        }
        // the correction is rank one and vanishes on the orthogonal complement of s
        let sv = DVector::from_column_slice(&s);
        let w = DVector::from_fn(cols, |i, _| if i == 0 { 1.0 } else { 0.0 });
        let w_perp = &w - &sv * (sv.dot(&w) / sv.dot(&sv));
        let diff = (jac.entries() - &entries) * &w_perp;
        prop_assert!(diff.norm() <= 1e-13 * scale);
        prop_assert_eq!(jac.provenance(), JacobianProvenance::Broyden { age: 1 });
    }
}
