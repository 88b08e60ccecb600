//! Property-based invariants over randomized inputs.

use maflow::field::{integrate, ScalarField};
use maflow::grid::PeriodicGrid;
use maflow::symfunc::{elem_sym_all, s_alpha_reciprocal};
use proptest::prelude::*;
use std::sync::Arc;

fn grid() -> Arc<PeriodicGrid> {
    PeriodicGrid::new(2, &[8, 1, 4, 1], &[1.0, 1.0, 2.0, 1.0]).unwrap()
}

/// Cyclic shift of a field along one axis by `k` samples.
fn cyclic_shift(f: &ScalarField, axis: usize, k: usize) -> ScalarField {
    let g = f.grid().clone();
    let mut out = vec![0.0; f.len()];
    for p in 0..f.len() {
        let mut c = g.coords_of(p);
        c[axis] = (c[axis] + k) % g.points()[axis];
        out[g.index_of(&c)] = f.values()[p];
    }
    ScalarField::from_values(&g, out).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn s_identity_holds_on_positive_vectors(
        lam in prop::collection::vec(0.05f64..20.0, 2..=4),
        alpha_pick in 0usize..100,
    ) {
        let n = lam.len();
        let alpha = alpha_pick % (n + 1);
        let e = elem_sym_all(&lam);
        let prod: f64 = lam.iter().product();
        let lhs = e[n - alpha];
        let rhs = s_alpha_reciprocal(&lam, alpha) * prod;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn integrate_is_linear(
        vals_a in prop::collection::vec(-5.0f64..5.0, 32),
        vals_b in prop::collection::vec(-5.0f64..5.0, 32),
        c1 in -3.0f64..3.0,
        c2 in -3.0f64..3.0,
    ) {
        let g = grid();
        let a = ScalarField::from_values(&g, vals_a).unwrap();
        let b = ScalarField::from_values(&g, vals_b).unwrap();
        let vol = ScalarField::constant(&g, 1.5);
        let combo = a.scale(c1).add(&b.scale(c2)).unwrap();
        let lhs = integrate(&combo, &vol).unwrap();
        let rhs = c1 * integrate(&a, &vol).unwrap() + c2 * integrate(&b, &vol).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn integrate_invariant_under_cyclic_shift(
        vals in prop::collection::vec(-4.0f64..4.0, 32),
        axis_pick in 0usize..2,
        k in 1usize..7,
    ) {
        let g = grid();
        let axis = if axis_pick == 0 { 0 } else { 2 }; // active axes only
        let f = ScalarField::from_values(&g, vals).unwrap();
        let vol = ScalarField::constant(&g, 1.0);
        let base = integrate(&f, &vol).unwrap();
        let shifted = integrate(&cyclic_shift(&f, axis, k), &vol).unwrap();
        prop_assert!((base - shifted).abs() <= 1e-13 * (1.0 + base.abs()));
    }

    #[test]
    fn snapshot_round_trip_bit_exact(
        vals in prop::collection::vec(-1e6f64..1e6, 32),
        t in 0.0f64..100.0,
    ) {
        let g = grid();
        let f = ScalarField::from_values(&g, vals).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.snap");
        maflow::snapshot::write(&path, &g, t, 1e-3, &[("u", f.values())]).unwrap();
        let snap = maflow::snapshot::read(&path).unwrap();
        prop_assert_eq!(snap.t.to_bits(), t.to_bits());
        for (x, y) in snap.field("u").unwrap().iter().zip(f.values()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn oscillation_translation_invariant(
        vals in prop::collection::vec(-10.0f64..10.0, 32),
        shift in -50.0f64..50.0,
    ) {
        let g = grid();
        let f = ScalarField::from_values(&g, vals).unwrap();
        let osc_a = f.oscillation();
        let osc_b = f.add_scalar(shift).oscillation();
        prop_assert!((osc_a - osc_b).abs() <= 1e-12 * (1.0 + osc_a));
    }
}
