//! Law-of-the-iterated-logarithm harness over one long stationary path.
//!
//! The path is never stored. Checkpoints `n_k = floor(rho^k)` are known in
//! advance, so the handful of partial sums each `xi_{n_k}` snapshot needs are
//! captured as the walk passes them; memory is `O(checkpoints * grid)`.

use std::fmt;

use nalgebra::DMatrix;
use serde::Serialize;

use super::dist::{dist_to_k, KDistance, DIST_TOL};
use super::path::{envelope_check, interpolate_knot, knot_index, PathFunction};
use crate::chain::{FiniteKernel, Observable, StationaryDistribution, Walker};
use crate::error::{Error, Result};
use crate::stats::{lil_scale, norm};

#[derive(Debug, Clone, Serialize)]
pub struct LilConfig {
    pub n_max: usize,
    /// Geometric checkpoint ratio.
    pub rho: f64,
    pub seed: u64,
    pub replica: u64,
    /// Subtract `E_{X_0} S_n = sum_{i<n} (Q^i g)(X_0)` from every partial sum.
    pub centered: bool,
    /// Number of grid intervals for the `xi` snapshots.
    pub grid: usize,
    /// Checkpoints below this `n` are reported but excluded from the
    /// running maximum.
    pub burn_in: usize,
    pub dist_tol: f64,
    pub band: (f64, f64),
}

impl Default for LilConfig {
    fn default() -> Self {
        Self {
            n_max: 10_000_000,
            rho: 1.05,
            seed: 2024,
            replica: 0,
            centered: false,
            grid: 1024,
            burn_in: 1000,
            dist_tol: DIST_TOL,
            band: (0.70, 1.10),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LilCheckpoint {
    /// Exponent `k` with `n = floor(rho^k)`.
    pub k: u32,
    pub n: usize,
    /// `|S_n| / sqrt(2 n log log n)`.
    pub stat: f64,
    pub running_max: f64,
    /// `max_j |xi_n(t_j)|` on the snapshot grid.
    pub sup_stat: f64,
    /// Bound on `sup_t |xi_n(t)| - sup_stat`.
    pub sup_error_bound: f64,
    pub dist_to_k: KDistance,
    /// `max_j (|xi_n(t_j)| - sqrt(tr_d t_j))`.
    pub envelope_violation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LilVerdict {
    Degenerate,
    ConvergesToZero,
    WithinBand,
    OutsideBand,
}

#[derive(Debug, Clone)]
pub struct LilReport {
    pub config: LilConfig,
    pub trace: f64,
    /// `sqrt(tr D)`.
    pub target: f64,
    pub checkpoints: Vec<LilCheckpoint>,
    /// `xi_{n_k}` on the uniform snapshot grid, one per checkpoint.
    pub snapshots: Vec<PathFunction>,
    pub max_abs_sum: f64,
    pub verdict: LilVerdict,
}

impl LilReport {
    pub fn final_running_max(&self) -> f64 {
        self.checkpoints.last().map_or(0.0, |c| c.running_max)
    }

    pub fn verdict_text(&self) -> String {
        let (lo, hi) = self.config.band;
        match self.verdict {
            LilVerdict::Degenerate => "degenerate (trD=0, S≡0)".to_string(),
            LilVerdict::ConvergesToZero => "converges to 0; band trivially satisfied".to_string(),
            LilVerdict::WithinBand => format!("within band [{lo:.2},{hi:.2}]"),
            LilVerdict::OutsideBand => format!(
                "outside band [{lo:.2},{hi:.2}] (running max / target = {:.4})",
                self.final_running_max() / self.target
            ),
        }
    }
}

impl fmt::Display for LilReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.verdict_text())
    }
}

/// Distinct `floor(rho^k) <= n_max`, tagged with the first `k` producing each.
pub fn checkpoints(rho: f64, n_max: usize) -> Vec<(u32, usize)> {
    let mut out: Vec<(u32, usize)> = Vec::new();
    let mut k = 0u32;
    loop {
        let x = rho.powi(k as i32).floor();
        if x > n_max as f64 {
            break;
        }
        let n = x as usize;
        if out.last().is_none_or(|&(_, prev)| n > prev) {
            out.push((k, n));
        }
        k += 1;
    }
    out
}

/// Runs one LIL path; `tr_d` is the exact trace of the diffusion matrix.
pub fn lil_run(
    kernel: &FiniteKernel,
    pi: &StationaryDistribution,
    g: &Observable,
    tr_d: f64,
    config: &LilConfig,
) -> Result<LilReport> {
    if config.n_max < 1000 {
        return Err(Error::InvalidArgument(format!("n_max must be at least 1000, got {}", config.n_max)));
    }
    if !(config.rho > 1.0 && config.rho.is_finite()) {
        return Err(Error::InvalidArgument(format!("rho must exceed 1, got {}", config.rho)));
    }
    if config.grid == 0 {
        return Err(Error::InvalidArgument("snapshot grid must have at least one interval".into()));
    }
    if tr_d.is_nan() || tr_d < 0.0 {
        return Err(Error::InvalidArgument(format!("trace must be >= 0, got {tr_d}")));
    }
    let d = g.dim();
    let gm = g.matrix();
    let m = config.grid;
    let cps = checkpoints(config.rho, config.n_max);
    let n_last = cps.last().map_or(0, |&(_, n)| n);

    let mut needed: Vec<usize> = Vec::new();
    for &(_, n) in &cps {
        for j in 0..=m {
            let (k, rem) = knot_index(n, m, j);
            needed.push(k);
            if rem > 0 {
                needed.push(k + 1);
            }
        }
    }
    needed.sort_unstable();
    needed.dedup();
    let mut stored = vec![0.0; needed.len() * d];

    let mut walker = Walker::stationary(kernel, pi, config.seed, config.replica);
    let x0 = walker.state();
    let mut sum = vec![0.0; d];
    let mut adjusted = vec![0.0; d];
    // Conditional-mean tracking for the centered variant: `row` is
    // e_{X_0}^t P^k and `drift` is sum_{i<k} (Q^i g)(X_0).
    let mut row = DMatrix::<f64>::zeros(1, kernel.n_states());
    row[(0, x0)] = 1.0;
    let mut drift = vec![0.0; d];

    let increment_bound = if config.centered { 2.0 } else { 1.0 } * g.max_norm();
    let mut next_needed = 0;
    let mut next_cp = 0;
    let mut running_max = 0.0f64;
    let mut max_abs_sum = 0.0f64;
    let mut out_cps = Vec::with_capacity(cps.len());
    let mut snapshots = Vec::with_capacity(cps.len());

    let mut state = x0;
    for k in 0..=n_last {
        for c in 0..d {
            adjusted[c] = sum[c] - drift[c];
        }
        max_abs_sum = max_abs_sum.max(norm(&adjusted));
        if next_needed < needed.len() && needed[next_needed] == k {
            stored[next_needed * d..(next_needed + 1) * d].copy_from_slice(&adjusted);
            next_needed += 1;
        }
        if next_cp < cps.len() && cps[next_cp].1 == k {
            let (kk, n) = cps[next_cp];
            let scale = lil_scale(n);
            let stat = norm(&adjusted) / scale;
            if n >= config.burn_in {
                running_max = running_max.max(stat);
            }
            let lookup = |i: usize| -> &[f64] {
                let pos = needed.binary_search(&i).expect("snapshot index was scheduled");
                &stored[pos * d..(pos + 1) * d]
            };
            let mut values = Vec::with_capacity((m + 1) * d);
            for j in 0..=m {
                values.extend(interpolate_knot(n, m, j, lookup).into_iter().map(|v| v / scale));
            }
            let snapshot = PathFunction::uniform(values, d)?;
            let sup_error_bound = if m.is_multiple_of(n) {
                0.0
            } else {
                n.div_ceil(m) as f64 * increment_bound / scale
            };
            let dist = dist_to_k(&snapshot, tr_d, config.dist_tol)?;
            out_cps.push(LilCheckpoint {
                k: kk,
                n,
                stat,
                running_max,
                sup_stat: snapshot.sup_norm(),
                sup_error_bound,
                dist_to_k: dist,
                envelope_violation: envelope_check(&snapshot, tr_d),
            });
            snapshots.push(snapshot);
            next_cp += 1;
        }
        if k == n_last {
            break;
        }
        for c in 0..d {
            sum[c] += gm[(state, c)];
        }
        if config.centered {
            let qg = &row * gm;
            for c in 0..d {
                drift[c] += qg[(0, c)];
            }
            row = &row * kernel.matrix();
        }
        state = walker.step();
    }

    let target = tr_d.sqrt();
    let verdict = if max_abs_sum == 0.0 {
        LilVerdict::Degenerate
    } else if target <= 1e-12 {
        LilVerdict::ConvergesToZero
    } else {
        let ratio = running_max / target;
        if ratio >= config.band.0 && ratio <= config.band.1 {
            LilVerdict::WithinBand
        } else {
            LilVerdict::OutsideBand
        }
    };
    Ok(LilReport {
        config: config.clone(),
        trace: tr_d,
        target,
        checkpoints: out_cps,
        snapshots,
        max_abs_sum,
        verdict,
    })
}

/// Proximity of the snapshots to `f(t) = t sqrt(tr_d / d) (1, ..., 1)`.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterProbe {
    pub distances: Vec<(usize, f64)>,
    pub min_distance: f64,
    pub argmin_n: usize,
}

pub fn cluster_probe(history: &[(usize, &PathFunction)], tr_d: f64, d: usize) -> Result<ClusterProbe> {
    if history.is_empty() {
        return Err(Error::InvalidArgument("cluster probe needs at least one snapshot".into()));
    }
    let slope = (tr_d / d as f64).sqrt();
    let mut distances = Vec::with_capacity(history.len());
    for &(n, xi) in history {
        if xi.dim() != d {
            return Err(Error::InvalidArgument("snapshot dimension mismatch".into()));
        }
        let mut worst: f64 = 0.0;
        for (i, &t) in xi.times().iter().enumerate() {
            let diff: Vec<f64> = xi.knot(i).iter().map(|v| v - t * slope).collect();
            worst = worst.max(norm(&diff));
        }
        distances.push((n, worst));
    }
    let (argmin_n, min_distance) = distances
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
    Ok(ClusterProbe { distances, min_distance, argmin_n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{load_chain, simulate, Chain, ChainSpec};
    use crate::strassen::xi_path;

    fn two(p: f64, g: [f64; 2]) -> Chain {
        load_chain(&ChainSpec {
            states: vec!["a".into(), "b".into()],
            p: vec![vec![1.0 - p, p], vec![p, 1.0 - p]],
            g: vec![vec![g[0]], vec![g[1]]],
            d: 1,
            center: false,
        })
        .unwrap()
    }

    fn small(n_max: usize) -> LilConfig {
        LilConfig { n_max, rho: 1.3, grid: 64, seed: 77, ..LilConfig::default() }
    }

    #[test]
    fn checkpoint_schedule() {
        let cps = checkpoints(1.05, 100);
        assert_eq!(cps[0], (0, 1));
        assert!(cps.windows(2).all(|w| w[1].1 > w[0].1));
        assert!(cps.last().unwrap().1 <= 100);
    }

    #[test]
    fn snapshots_match_stored_path() {
        let c = two(0.5, [1.0, -1.0]);
        let cfg = small(5000);
        let report = lil_run(&c.kernel, &c.stationary, &c.observable, 1.0, &cfg).unwrap();
        let path = simulate(&c.kernel, &c.stationary, &c.observable, 5000, cfg.seed).unwrap();
        for (cp, snap) in report.checkpoints.iter().zip(&report.snapshots) {
            let xi = xi_path(&path, cp.n, cfg.grid).unwrap();
            assert_eq!(&xi, snap);
            assert_eq!(cp.stat, path.partial_sum(cp.n)[0].abs() / lil_scale(cp.n));
        }
        assert!(report.checkpoints.windows(2).all(|w| w[1].running_max >= w[0].running_max));
    }

    #[test]
    fn alternating_chain_converges_to_zero() {
        let c = two(1.0, [1.0, -1.0]);
        let report = lil_run(&c.kernel, &c.stationary, &c.observable, 0.0, &small(20_000)).unwrap();
        for cp in &report.checkpoints {
            assert!(cp.stat <= 1.0 / lil_scale(cp.n) + 1e-15);
        }
        assert_eq!(report.verdict, LilVerdict::ConvergesToZero);
    }

    #[test]
    fn zero_observable_is_degenerate() {
        let c = two(0.3, [0.0, 0.0]);
        let report = lil_run(&c.kernel, &c.stationary, &c.observable, 0.0, &small(2000)).unwrap();
        assert!(report.checkpoints.iter().all(|cp| cp.stat == 0.0 && cp.sup_stat == 0.0));
        assert_eq!(report.verdict, LilVerdict::Degenerate);
        assert_eq!(report.verdict_text(), "degenerate (trD=0, S≡0)");
        let hist: Vec<_> = report.checkpoints.iter().map(|c| c.n).zip(&report.snapshots).collect();
        let probe = cluster_probe(&hist, 0.0, 1).unwrap();
        assert_eq!(probe.min_distance, 0.0);
    }

    #[test]
    fn centered_variant_on_alternating_chain() {
        // X_0 fixes the whole path, so S_n equals its conditional mean.
        let c = two(1.0, [1.0, -1.0]);
        let cfg = LilConfig { centered: true, ..small(3000) };
        let report = lil_run(&c.kernel, &c.stationary, &c.observable, 0.0, &cfg).unwrap();
        assert_eq!(report.max_abs_sum, 0.0);
    }

    #[test]
    fn rejects_bad_config() {
        let c = two(0.5, [1.0, -1.0]);
        assert!(lil_run(&c.kernel, &c.stationary, &c.observable, 1.0, &small(999)).is_err());
        let cfg = LilConfig { rho: 1.0, ..small(2000) };
        assert!(lil_run(&c.kernel, &c.stationary, &c.observable, 1.0, &cfg).is_err());
    }

    #[test]
    fn cluster_probe_on_diagonal() {
        let f = PathFunction::linear(&[0.5, 0.5], 16);
        let probe = cluster_probe(&[(10, &f)], 0.5, 2).unwrap();
        assert!(probe.min_distance < 1e-15);
        assert!(cluster_probe(&[], 1.0, 1).is_err());
    }
}
