mod support;

use mwlil::chain::simulate_replica;
use mwlil::{simulate, ChainSpec, Error};
use nalgebra::DMatrix;
use proptest::prelude::*;
use support::random_chain;

#[test]
fn stationary_law_of_random_chains() {
    for seed in 0..20 {
        let c = random_chain(5, 2, seed);
        let pi = DMatrix::from_row_slice(1, 5, c.stationary.as_slice());
        let drift = &pi * c.kernel.matrix() - &pi;
        assert!(drift.amax() <= 1e-10, "seed {seed}");
        assert!((pi.sum() - 1.0).abs() <= 1e-12);
        assert!(c.stationary.mean(c.observable.matrix()).iter().all(|m| m.abs() <= 1e-10));
    }
}

#[test]
fn rejects_reducible_and_uncentered_specs() {
    let spec = ChainSpec {
        states: vec!["a".into(), "b".into()],
        p: vec![vec![1.0, 0.0], vec![0.5, 0.5]],
        g: vec![vec![1.0], vec![-1.0]],
        d: 1,
        center: false,
    };
    assert!(matches!(mwlil::load_chain(&spec), Err(Error::Reducible { .. })));
    let spec = ChainSpec { p: vec![vec![0.5, 0.5], vec![0.5, 0.5]], g: vec![vec![1.0], vec![0.0]], ..spec };
    assert!(matches!(mwlil::load_chain(&spec), Err(Error::NotCentered { .. })));
    let spec = ChainSpec { center: true, ..spec };
    let c = mwlil::load_chain(&spec).unwrap();
    assert_eq!(c.centering_shift, Some(vec![0.5]));
}

#[test]
fn paths_are_reproducible_per_stream() {
    let c = random_chain(4, 1, 3);
    let a = simulate_replica(&c.kernel, &c.stationary, &c.observable, 500, 8, 2).unwrap();
    let b = simulate_replica(&c.kernel, &c.stationary, &c.observable, 500, 8, 2).unwrap();
    let other = simulate_replica(&c.kernel, &c.stationary, &c.observable, 500, 8, 3).unwrap();
    assert_eq!(a.states(), b.states());
    assert_ne!(a.states(), other.states());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn partial_sum_increments_are_observable_values(seed in 0u64..10_000, chain_seed in 0u64..50) {
        let c = random_chain(5, 2, chain_seed);
        let path = simulate(&c.kernel, &c.stationary, &c.observable, 300, seed).unwrap();
        let g = c.observable.matrix();
        prop_assert!(path.partial_sum(0).iter().all(|&v| v == 0.0));
        for k in 0..300 {
            let x = path.state(k);
            prop_assert!(c.kernel.prob(x, path.state(k + 1)) > 0.0);
            for col in 0..2 {
                let inc = path.partial_sum(k + 1)[col] - path.partial_sum(k)[col];
                prop_assert!((inc - g[(x, col)]).abs() <= 1e-12 * (1.0 + k as f64));
            }
        }
    }
}
