mod support;

use mwlil::poisson::{mw_partial_norms, resolvent_series, ALPHA_MARGIN};
use mwlil::{decompose_path, martingale_kernel, mw_fit, poisson_limit, simulate, solve_resolvent};
use nalgebra::DMatrix;
use proptest::prelude::*;
use support::{all_fixtures, max_abs, random_chain, v_by_matrix_powers};

#[test]
fn resolvent_residual_on_all_fixtures() {
    for (name, c) in all_fixtures() {
        let g = c.observable.matrix();
        for eps in [1.0, 0.1, 1e-3, 1e-6] {
            let sol = solve_resolvent(&c.kernel, g, eps).unwrap();
            let residual = max_abs(&(&sol.h * (1.0 + eps) - c.kernel.apply(&sol.h) - g));
            assert!(residual <= 1e-10, "{name} eps={eps}: residual {residual:e}");
        }
    }
}

#[test]
fn resolvent_matches_series_within_tail() {
    for (name, c) in all_fixtures() {
        let g = c.observable.matrix();
        for (eps, terms) in [(1.0, 60), (0.1, 400), (1e-3, 40_000)] {
            let direct = solve_resolvent(&c.kernel, g, eps).unwrap().h;
            let (series, tail) = resolvent_series(&c.kernel, g, eps, terms);
            let err = max_abs(&(&series - &direct));
            assert!(err <= tail + 1e-10, "{name} eps={eps}: {err:e} > {tail:e}");
        }
    }
}

#[test]
fn martingale_kernel_has_zero_conditional_mean() {
    for (name, c) in all_fixtures() {
        let h = poisson_limit(&c.kernel, &c.stationary, c.observable.matrix()).unwrap().h;
        let mk = martingale_kernel(&c.kernel, &c.stationary, &h);
        assert!(mk.max_conditional_mean() <= 1e-10, "{name}");
        let h_eps = solve_resolvent(&c.kernel, c.observable.matrix(), 0.1).unwrap().h;
        let mk = martingale_kernel(&c.kernel, &c.stationary, &h_eps);
        assert!(mk.max_conditional_mean() <= 1e-10, "{name} (eps)");
    }
}

#[test]
fn poisson_limit_solves_poisson_equation() {
    for (name, c) in all_fixtures() {
        let g = c.observable.matrix();
        let h = poisson_limit(&c.kernel, &c.stationary, g).unwrap().h;
        assert!(max_abs(&(&h - c.kernel.apply(&h) - g)) <= 1e-10, "{name}");
        assert!(c.stationary.mean(&h).iter().all(|m| m.abs() <= 1e-12), "{name}");
    }
}

#[test]
fn decomposition_identity_on_random_paths() {
    for (name, c) in all_fixtures().into_iter().take(6) {
        let gmax = c.observable.max_norm();
        for seed in 0..10 {
            let path = simulate(&c.kernel, &c.stationary, &c.observable, 2000, seed).unwrap();
            let dec = decompose_path(&path, &c.kernel, &c.stationary, &c.observable, 0.01).unwrap();
            assert!(dec.max_identity_deviation() <= 1e-9 * 2000.0 * gmax, "{name} seed={seed}");
            // The forward sum and the path's partial sums differ by g(X_0) - g(X_k).
            let g = c.observable.matrix();
            for k in [1, 17, 2000] {
                for col in 0..c.dim() {
                    let lhs = dec.row(&dec.forward_sum, k)[col];
                    let rhs = path.partial_sum(k)[col] - g[(path.state(0), col)] + g[(path.state(k), col)];
                    assert!((lhs - rhs).abs() <= 1e-9 * k as f64 * gmax.max(1.0));
                }
            }
        }
    }
}

#[test]
fn sym2_remainder_vanishes_along_paths() {
    let c = support::sym2();
    let path = simulate(&c.kernel, &c.stationary, &c.observable, 5000, 3).unwrap();
    let dec = decompose_path(&path, &c.kernel, &c.stationary, &c.observable, 0.5).unwrap();
    assert!(dec.r_lim.iter().all(|&r| r == 0.0));
}

#[test]
fn v_recursion_matches_matrix_powers() {
    for (name, c) in all_fixtures() {
        let g = c.observable.matrix();
        let v = mw_partial_norms(&c.kernel, &c.stationary, g, 64);
        for n in 1..=64 {
            let direct = v_by_matrix_powers(&c.kernel, &c.stationary, g, n);
            assert!((v[n - 1] - direct).abs() <= 1e-10, "{name} n={n}");
        }
    }
}

#[test]
fn spectral_gap_fixtures_have_bounded_partial_sums() {
    for (name, c) in all_fixtures() {
        let fit = mw_fit(&c.kernel, &c.stationary, c.observable.matrix(), 1 << 14, ALPHA_MARGIN).unwrap();
        assert!(fit.alpha_hat <= 0.05, "{name}: alpha_hat {}", fit.alpha_hat);
        assert!(fit.alpha_ok);
    }
}

#[test]
fn zero_observable_is_degenerate() {
    let c = support::sym2();
    let fit = mw_fit(&c.kernel, &c.stationary, &DMatrix::zeros(2, 1), 64, ALPHA_MARGIN).unwrap();
    assert!(fit.degenerate);
    assert!(fit.v.iter().all(|&v| v == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn resolvent_is_linear_in_g(seed in 0u64..1000, a in -3.0f64..3.0, eps in 1e-3f64..2.0) {
        let c = random_chain(4, 2, seed);
        let g = c.observable.matrix();
        let h = solve_resolvent(&c.kernel, g, eps).unwrap().h;
        let ha = solve_resolvent(&c.kernel, &(g * a), eps).unwrap().h;
        prop_assert!(max_abs(&(ha - h * a)) <= 1e-9 * (1.0 + max_abs(g)) / eps);
    }

    #[test]
    fn series_agrees_with_solver(seed in 0u64..1000, eps in 0.05f64..2.0) {
        let c = random_chain(5, 1, seed);
        let g = c.observable.matrix();
        let direct = solve_resolvent(&c.kernel, g, eps).unwrap().h;
        let (series, tail) = resolvent_series(&c.kernel, g, eps, 500);
        prop_assert!(max_abs(&(series - direct)) <= tail + 1e-11);
    }
}
