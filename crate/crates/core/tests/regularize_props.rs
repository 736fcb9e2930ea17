use emsound::forward::{InstrumentSetup, LayeredEarthModel, Orientations};
use emsound::jacobian::analytic_jacobian;
use emsound::regularize::{
    discrepancy_pick, GsvdFactors, GsvdShape, OperatorKind, RegularizationOperator, SvdFactors,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, rows * cols)
        .prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn operator_kind() -> impl Strategy<Value = OperatorKind> {
    prop_oneof![
        Just(OperatorKind::Identity),
        Just(OperatorKind::FirstDifference),
        Just(OperatorKind::SecondDifference),
    ]
}

/// `(J, L)` pairs with `rows + t > n`, tall or wide.
fn pair() -> impl Strategy<Value = (DMatrix<f64>, DMatrix<f64>)> {
    (3usize..12, 2usize..16, operator_kind())
        .prop_filter("shape admits a GSVD", |(n, rows, kind)| {
            *n >= kind.min_size() && rows + n - kind.null_dim() > *n
        })
        .prop_flat_map(|(n, rows, kind)| {
            let l = RegularizationOperator::build(kind, n).unwrap().matrix().clone();
            (matrix(rows, n), Just(l))
        })
}

fn assert_gsvd_invariants(j: &DMatrix<f64>, l: &DMatrix<f64>, g: &GsvdFactors) {
    let rec_j = g.u() * g.sigma_j() * g.z_inv();
    let rec_l = g.v() * g.sigma_l() * g.z_inv();
    let (ej, el) = ((rec_j - j).norm() / j.norm(), (rec_l - l).norm() / l.norm());
    assert!(ej <= 1e-10, "J reconstruction {ej:e}, shape {:?}", j.shape());
    assert!(el <= 1e-10, "L reconstruction {el:e}, shape {:?}", l.shape());
    let (rows, _) = j.shape();
    let t = l.nrows();
    let du = (g.u().transpose() * g.u() - DMatrix::identity(rows, rows)).amax();
    let dv = (g.v().transpose() * g.v() - DMatrix::identity(t, t)).amax();
    assert!(du < 1e-12, "U orthogonality {du:e}");
    assert!(dv < 1e-12, "V orthogonality {dv:e}");
    for (c, s) in g.c().iter().zip(g.s()) {
        assert!((c * c + s * s - 1.0).abs() < 1e-12);
    }
    let gv = g.generalized_values();
    assert!(gv.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-10) + 1e-14));
}

fn nondecreasing(v: &[f64], rel: f64) -> bool {
    v.windows(2).all(|w| w[1] >= w[0] - rel * w[0].abs().max(w[1].abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gsvd_reconstructs((j, l) in pair()) {
        let g = GsvdFactors::new(&j, &l).unwrap();
        let expected = if j.nrows() >= j.ncols() { GsvdShape::Tall } else { GsvdShape::Wide };
        prop_assert_eq!(g.shape(), expected);
        assert_gsvd_invariants(&j, &l, &g);
    }

    #[test]
    fn tgsvd_filtering_is_monotone(
        (j, l) in pair(),
        r in prop::collection::vec(-1.0f64..1.0, 16),
    ) {
        let g = GsvdFactors::new(&j, &l).unwrap();
        let r = DVector::from_iterator(j.nrows(), r.into_iter().cycle().take(j.nrows()));
        let mut semi = Vec::new();
        let mut resid = Vec::new();
        for ell in 0..=g.pbar() {
            let s = g.tgsvd_step(&r, ell).unwrap();
            semi.push((&l * &s).norm());
            resid.push(-(&j * &s + &r).norm());
        }
        prop_assert!(nondecreasing(&semi, 1e-9), "{semi:?}");
        prop_assert!(nondecreasing(&resid, 1e-9), "{resid:?}");
    }

    #[test]
    fn tsvd_filtering_is_monotone(
        j in (2usize..12, 2usize..12).prop_flat_map(|(r, c)| matrix(r, c)),
        r in prop::collection::vec(-1.0f64..1.0, 12),
    ) {
        let f = SvdFactors::new(&j).unwrap();
        let r = DVector::from_iterator(j.nrows(), r.into_iter().cycle().take(j.nrows()));
        let mut norm = Vec::new();
        let mut resid = Vec::new();
        for ell in 1..=f.rank() {
            let s = f.tsvd_step(&r, ell).unwrap();
            norm.push(s.norm());
            resid.push(-(&j * &s + &r).norm());
        }
        prop_assert!(nondecreasing(&norm, 1e-10));
        prop_assert!(nondecreasing(&resid, 1e-10));
    }

    #[test]
    fn identity_operator_matches_tsvd(
        (rows, n) in (3usize..10).prop_flat_map(|n| (n..n + 6, Just(n))),
        seed in prop::collection::vec(-1.0f64..1.0, 150),
        r in prop::collection::vec(-1.0f64..1.0, 16),
    ) {
        let j = DMatrix::from_iterator(rows, n, seed.into_iter().cycle().take(rows * n));
        let f = SvdFactors::new(&j).unwrap();
        prop_assume!(f.condition_number() < 1e8);
        let g = GsvdFactors::new(&j, &DMatrix::identity(n, n)).unwrap();
        let r = DVector::from_iterator(rows, r.into_iter().cycle().take(rows));
        for ell in 1..=n {
            let a = g.tgsvd_step(&r, ell).unwrap();
            let b = f.tsvd_step(&r, ell).unwrap();
            prop_assert!((&a - &b).norm() <= 1e-8 * b.norm().max(1e-300), "ℓ = {}", ell);
        }
    }

    #[test]
    fn discrepancy_is_scale_invariant(
        norms in prop::collection::vec(1e-3f64..1e3, 1..30),
        noise in 1e-3f64..1e2,
        scale in 1e-6f64..1e6,
    ) {
        let scaled: Vec<f64> = norms.iter().map(|x| x * scale).collect();
        let a = discrepancy_pick(&norms, noise, 1.5).unwrap();
        let b = discrepancy_pick(&scaled, noise * scale, 1.5).unwrap();
        // a crossing exactly at the threshold can flip under rounding
        let threshold = 1.5 * noise;
        let borderline = norms.iter().any(|x| ((x - threshold) / threshold).abs() < 1e-12);
        prop_assume!(!borderline);
        prop_assert_eq!(a, b);
    }
}

/// Jacobians of the sounding problem are the ill-conditioned case that
/// matters; the factorization must stay accurate on them.
#[test]
fn gsvd_on_sounding_jacobians() {
    for (n, m) in [(20, 5), (20, 10), (20, 20), (40, 10), (40, 20)] {
        let sigma: Vec<f64> =
            (0..n).map(|i| (-((2.0 * i as f64 / (n - 1) as f64) - 1.0).powi(2)).exp()).collect();
        let model = LayeredEarthModel::equispaced(sigma, 2.0).unwrap();
        let heights: Vec<f64> = (0..m).map(|i| 1.9 * i as f64 / (m - 1) as f64).collect();
        let setup = InstrumentSetup::new(heights, Orientations::Both).unwrap();
        let j = analytic_jacobian(&model, &setup).unwrap().into_entries();
        for kind in [OperatorKind::FirstDifference, OperatorKind::SecondDifference] {
            let l = RegularizationOperator::build(kind, n).unwrap();
            let g = GsvdFactors::new(&j, l.matrix()).unwrap();
            assert_gsvd_invariants(&j, l.matrix(), &g);
        }
        let f = SvdFactors::new(&j).unwrap();
        assert!(f.condition_number() > 1e8, "n={n} m={m}: κ = {:e}", f.condition_number());
    }
}
