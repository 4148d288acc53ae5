mod support;

use mwlil::{dist_to_k, energy, min_energy_in_tube, PathFunction, DIST_TOL};
use proptest::prelude::*;
use support::{brute_force_dist, grid_min_energy, random_path};

#[test]
fn matches_grid_oracle_on_small_instances() {
    let mut rng = mwlil::rng::stream(31, 0);
    let mut worst: f64 = 0.0;
    for case in 0..25 {
        let m = 1 + case % 8;
        let f = random_path(&mut rng, m, 2.0);
        let tr_d = [0.05, 0.3, 1.0, 2.5][case % 4];
        let got = dist_to_k(&f, tr_d, DIST_TOL).unwrap();
        let oracle = brute_force_dist(&f, tr_d);
        assert!(got.certified, "case {case}");
        assert!((got.value - oracle).abs() <= 2e-3, "case {case}: {} vs oracle {oracle}", got.value);
        println!("case {case}: m={m} trD={tr_d} dist={:.6} oracle={oracle:.6}", got.value);
        worst = worst.max((got.value - oracle).abs());
    }
    assert!(worst < 1e-3, "worst gap {worst}");
}

#[test]
fn tube_energy_bounds_bracket_grid_search() {
    let mut rng = mwlil::rng::stream(32, 0);
    for m in 1..=6 {
        let f = random_path(&mut rng, m, 1.5);
        for delta in [0.05, 0.3, 0.8] {
            let (lower, upper) = min_energy_in_tube(&f, delta).unwrap();
            let grid = grid_min_energy(&f, delta, 4000);
            assert!(lower <= grid + 1e-12, "m={m} delta={delta}: {lower} > {grid}");
            assert!(upper <= grid + 1e-6 * (1.0 + grid), "m={m} delta={delta}: {upper} vs {grid}");
        }
    }
}

#[test]
fn fixed_examples() {
    let f = PathFunction::linear(&[2.0], 32);
    let d = dist_to_k(&f, 1.0, DIST_TOL).unwrap();
    assert!((d.value - 1.0).abs() <= 1e-6, "{}", d.value);

    assert_eq!(dist_to_k(&PathFunction::zero(8, 3), 1.0, DIST_TOL).unwrap().value, 0.0);
    assert_eq!(dist_to_k(&PathFunction::linear(&[0.6, 0.8], 16), 1.0, DIST_TOL).unwrap().value, 0.0);
    // With a zero trace the ball is the zero path.
    let f = PathFunction::uniform(vec![0.0, 0.5, -1.5, 0.25], 1).unwrap();
    assert_eq!(dist_to_k(&f, 0.0, DIST_TOL).unwrap().value, 1.5);
    assert!(dist_to_k(&f, -1.0, DIST_TOL).is_err());
}

#[test]
fn multidimensional_linear_path() {
    // For f = t v the optimum shrinks radially: dist = |v| - sqrt(tr_d).
    let f = PathFunction::linear(&[1.0, -2.0, 2.0], 50);
    let d = dist_to_k(&f, 4.0, DIST_TOL).unwrap();
    assert!((d.value - 1.0).abs() <= 1e-6, "{}", d.value);
}

fn path_strategy(d: usize) -> impl Strategy<Value = PathFunction> {
    (2usize..24).prop_flat_map(move |m| {
        prop::collection::vec(-2.0f64..2.0, m * d).prop_map(move |tail| {
            let mut values = vec![0.0; d];
            values.extend(tail);
            PathFunction::uniform(values, d).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn scaling_property(f in path_strategy(2), tr_d in 0.05f64..3.0, c in 0.2f64..5.0) {
        let base = dist_to_k(&f, tr_d, 1e-9).unwrap().value;
        let scaled = dist_to_k(&f.scaled(c), c * c * tr_d, 1e-9).unwrap().value;
        prop_assert!((scaled - c * base).abs() <= 1e-6 * (1.0 + c), "{} vs {}", scaled, c * base);
    }

    #[test]
    fn monotone_in_trace(f in path_strategy(1), a in 0.01f64..2.0, b in 0.01f64..2.0) {
        let (small, large) = if a < b { (a, b) } else { (b, a) };
        let ds = dist_to_k(&f, small, DIST_TOL).unwrap();
        let dl = dist_to_k(&f, large, DIST_TOL).unwrap();
        prop_assert!(dl.lower <= ds.upper + 1e-12);
    }

    #[test]
    fn envelope_lower_bound_holds(f in path_strategy(2), tr_d in 0.0f64..3.0) {
        let d = dist_to_k(&f, tr_d, DIST_TOL).unwrap();
        let end = f.knot(f.knots() - 1);
        let lb = (end[0] * end[0] + end[1] * end[1]).sqrt() - tr_d.sqrt();
        prop_assert!(d.upper >= lb - 1e-12);
        prop_assert!(d.value <= f.sup_norm() + 1e-12);
    }

    #[test]
    fn members_are_at_distance_zero(f in path_strategy(2), slack in 1.0f64..2.0) {
        let e = energy(&f);
        prop_assert_eq!(dist_to_k(&f, e * slack, DIST_TOL).unwrap().value, 0.0);
    }
}
