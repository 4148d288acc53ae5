//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use mwlil::{load_chain, Chain, ChainSpec, FiniteKernel, PathFunction, StationaryDistribution};
use nalgebra::DMatrix;
use rand::Rng;

pub fn two_state(p: f64, q: f64, g: [f64; 2]) -> Chain {
    load_chain(&ChainSpec {
        states: vec!["a".into(), "b".into()],
        p: vec![vec![1.0 - p, p], vec![q, 1.0 - q]],
        g: vec![vec![g[0]], vec![g[1]]],
        d: 1,
        center: false,
    })
    .unwrap()
}

pub fn sym2() -> Chain {
    two_state(0.5, 0.5, [1.0, -1.0])
}

pub fn alt2() -> Chain {
    two_state(1.0, 1.0, [1.0, -1.0])
}

pub fn lazy2(p: f64) -> Chain {
    two_state(p, p, [1.0, -1.0])
}

/// Dense random chain with entries bounded away from zero and a random
/// observable centered under its stationary law.
pub fn random_chain(n: usize, d: usize, seed: u64) -> Chain {
    let mut rng = mwlil::rng::stream(seed, 0xfeed);
    let p = (0..n)
        .map(|_| {
            let row: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = row.iter().sum();
            let mut row: Vec<f64> = row.iter().map(|x| x / s).collect();
            let rest: f64 = row[..n - 1].iter().sum();
            row[n - 1] = 1.0 - rest;
            row
        })
        .collect();
    let g = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    load_chain(&ChainSpec {
        states: (0..n).map(|i| format!("s{i}")).collect(),
        p,
        g,
        d,
        center: true,
    })
    .unwrap()
}

/// The three closed-form fixtures plus twenty random 5-state chains.
pub fn all_fixtures() -> Vec<(String, Chain)> {
    let mut out = vec![
        ("SYM2".to_string(), sym2()),
        ("ALT2".to_string(), alt2()),
        ("LAZY2(0.25)".to_string(), lazy2(0.25)),
    ];
    for s in 0..20 {
        out.push((format!("random5#{s}"), random_chain(5, 2, 1000 + s)));
    }
    out
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, &b| a.max(b.abs()))
}

/// `||sum_{i<n} P^i g||_{L2(pi)}` from explicit matrix powers.
pub fn v_by_matrix_powers(kernel: &FiniteKernel, pi: &StationaryDistribution, g: &DMatrix<f64>, n: usize) -> f64 {
    let p = kernel.matrix();
    let s = p.nrows();
    let mut power = DMatrix::<f64>::identity(s, s);
    let mut acc = DMatrix::<f64>::zeros(s, s);
    for _ in 0..n {
        acc += &power;
        power = &power * p;
    }
    pi.l2_norm(&(acc * g))
}

/// Least energy over grid paths with `h_i` restricted to `K + 1` evenly
/// spaced points of `[f_i - delta, f_i + delta]`, by dynamic programming.
/// The cost `w (x - y)^2` is Monge, so the optimal predecessor index is
/// monotone and each layer is solved by divide and conquer.
pub fn grid_min_energy(f: &PathFunction, delta: f64, k: usize) -> f64 {
    assert_eq!(f.dim(), 1);
    let t = f.times();
    let v = f.values();
    let m = f.knots() - 1;
    let cand = |i: usize| -> Vec<f64> {
        (0..=k).map(|j| v[i] + delta * (-1.0 + 2.0 * j as f64 / k as f64)).collect()
    };
    let mut prev_x = vec![0.0];
    let mut prev_e = vec![0.0];
    for i in 1..=m {
        let w = 1.0 / (t[i] - t[i - 1]);
        let x = cand(i);
        let mut e = vec![0.0; x.len()];
        layer(&prev_x, &prev_e, &x, w, &mut e, 0, x.len(), 0, prev_x.len());
        prev_x = x;
        prev_e = e;
    }
    prev_e.into_iter().fold(f64::INFINITY, f64::min)
}

#[allow(clippy::too_many_arguments)]
fn layer(px: &[f64], pe: &[f64], x: &[f64], w: f64, out: &mut [f64], jlo: usize, jhi: usize, llo: usize, lhi: usize) {
    if jlo >= jhi {
        return;
    }
    let j = (jlo + jhi) / 2;
    let (mut best, mut arg) = (f64::INFINITY, llo);
    for l in llo..lhi {
        let c = pe[l] + w * (x[j] - px[l]).powi(2);
        if c < best {
            best = c;
            arg = l;
        }
    }
    out[j] = best;
    layer(px, pe, x, w, out, jlo, j, llo, arg + 1);
    layer(px, pe, x, w, out, j + 1, jhi, arg, lhi);
}

/// Grid-search distance from a one-dimensional `f` to `sqrt(tr_d) K`.
/// Candidate spacing stays below `2.5e-4`, so the result overestimates the
/// true distance by about that much at most.
pub fn brute_force_dist(f: &PathFunction, tr_d: f64) -> f64 {
    let feasible = |delta: f64| {
        let k = ((2.0 * delta / 2.5e-4).ceil() as usize).max(2000);
        grid_min_energy(f, delta, k) <= tr_d
    };
    if mwlil::energy(f) <= tr_d {
        return 0.0;
    }
    let mut hi = f.sup_norm().max(1e-3);
    while !feasible(hi) {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..26 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Random one-dimensional path on a random grid with `m` intervals.
pub fn random_path(rng: &mut impl Rng, m: usize, scale: f64) -> PathFunction {
    let mut cuts: Vec<f64> = (0..m - 1).map(|_| rng.gen_range(0.02..0.98)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let mut times = vec![0.0];
    times.extend(cuts);
    times.push(1.0);
    let mut values = vec![0.0];
    values.extend((1..times.len()).map(|_| rng.gen_range(-scale..scale)));
    PathFunction::new(times, values, 1).unwrap()
}
