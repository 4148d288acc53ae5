//! Fractional coboundaries on finite kernels and remainder diagnostics.
//!
//! `(I - Q)^alpha` is applied through its binomial series
//! `sum_k c_k Q^k` with `c_0 = 1`, `c_{k+1} = c_k (k - alpha) / (k + 1)`.
//! For `0 < alpha < 1` every `c_k` with `k >= 1` is negative and the
//! coefficients sum to zero, so the neglected mass after `K` terms is exactly
//! the partial sum `sum_{k<=K} c_k`. Because `Q` contracts the max-norm,
//! `|Q^k u|_max` is nonincreasing and the truncation error is at most that
//! mass times `|Q^{K+1} u|_max`.
//!
//! On the path space the relevant operator is the shift; here the kernel
//! `Q` stands in for it, and the path-space consequence (`R_n / sqrt(n) -> 0`)
//! is checked by [`remainder_growth`].

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::chain::{FiniteKernel, Observable, SamplePath, StationaryDistribution, Walker};
use crate::error::{Error, Result};
use crate::poisson::{martingale_kernel, mw_fit, poisson_limit, MartingaleKernel, ALPHA_MARGIN};
use crate::stats::{dyadic_grid, lil_scale, loglog_slope, mean_stderr, norm};

/// Default relative truncation tolerance.
pub const FRAC_TAIL_TOL: f64 = 1e-8;
/// Default cap on the number of series terms.
pub const FRAC_MAX_TERMS: usize = 100_000;

/// Binomial coefficients of `(I - T)^alpha`.
#[derive(Debug, Clone)]
pub struct FracOperator {
    pub alpha: f64,
    coeffs: Vec<f64>,
}

impl FracOperator {
    /// Coefficients `c_0..c_terms`.
    pub fn new(alpha: f64, terms: usize) -> Result<Self> {
        check_alpha(alpha)?;
        let mut coeffs = Vec::with_capacity(terms + 1);
        let mut c = 1.0;
        coeffs.push(c);
        for k in 0..terms {
            c *= (k as f64 - alpha) / (k as f64 + 1.0);
            coeffs.push(c);
        }
        Ok(Self { alpha, coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `sum_{k > K} |c_k|`, which equals `sum_{k <= K} c_k`.
    pub fn coefficient_tail(&self) -> f64 {
        self.coeffs.iter().sum::<f64>().max(0.0)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

/// Series truncation policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// Exactly `K` terms past the constant one.
    Fixed(usize),
    /// Stop once the error bound drops below `tol * max|u|` or after
    /// `max_terms` terms.
    Auto { tol: f64, max_terms: usize },
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Auto { tol: FRAC_TAIL_TOL, max_terms: FRAC_MAX_TERMS }
    }
}

#[derive(Debug, Clone)]
pub struct FracApplication {
    pub alpha: f64,
    pub values: DMatrix<f64>,
    /// Highest power `K` of `Q` included.
    pub terms: usize,
    /// Max-norm bound on the neglected part of the series.
    pub tail_bound: f64,
    /// `sum_{k > K} |c_k|`.
    pub coefficient_tail: f64,
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, &b| a.max(b.abs()))
}

/// `sum_{k=0}^{K} c_k Q^k u`.
pub fn frac_power_apply(
    kernel: &FiniteKernel,
    alpha: f64,
    u: &DMatrix<f64>,
    truncation: Truncation,
) -> Result<FracApplication> {
    check_alpha(alpha)?;
    let (limit, tol) = match truncation {
        Truncation::Fixed(k) => {
            if k < 1 {
                return Err(Error::InvalidArgument("truncation K must be at least 1".into()));
            }
            (k, None)
        }
        Truncation::Auto { tol, max_terms } => (max_terms.max(1), Some(tol * max_abs(u))),
    };

    let mut acc = u.clone();
    let mut power = kernel.apply(u);
    let mut c = 1.0;
    let mut partial = 1.0;
    let mut k = 0;
    let mut tail_bound;
    loop {
        k += 1;
        c *= (k as f64 - 1.0 - alpha) / k as f64;
        partial += c;
        acc += &power * c;
        power = kernel.apply(&power);
        let coeff_tail = partial.max(0.0);
        tail_bound = coeff_tail * max_abs(&power);
        let done = match tol {
            None => k >= limit,
            Some(t) => tail_bound <= t || k >= limit,
        };
        if done {
            return Ok(FracApplication {
                alpha,
                values: acc,
                terms: k,
                tail_bound,
                coefficient_tail: coeff_tail,
            });
        }
    }
}

/// Boundedness certificate for `sup_n n^{beta-1} ||sum_{k=1}^n Q^k g||_2`.
#[derive(Debug, Clone)]
pub struct FracMembership {
    pub beta: f64,
    pub n_grid: Vec<usize>,
    /// `n^{beta-1} ||sum_{k=1}^n Q^k g||_2` on the grid.
    pub scaled_norms: Vec<f64>,
    pub sup: f64,
    /// Fitted log-log slope of the scaled norms over the upper half of the grid.
    pub tail_slope: f64,
    pub bounded: bool,
}

impl FracMembership {
    pub fn conclusion(&self) -> String {
        if self.bounded {
            format!("g in (I-Q)^a L2 for all a < {}", self.beta)
        } else {
            "boundedness not established on this grid".to_string()
        }
    }
}

/// Scans dyadic `n <= n_max`. The sequence is declared bounded when it
/// vanishes or its fitted slope over the upper half of the grid is at most
/// `ALPHA_MARGIN`.
pub fn frac_membership(
    kernel: &FiniteKernel,
    pi: &StationaryDistribution,
    g: &DMatrix<f64>,
    beta: f64,
    n_max: usize,
) -> Result<FracMembership> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!("beta must lie in (0, 1), got {beta}")));
    }
    let n_grid: Vec<usize> = std::iter::once(1).chain(dyadic_grid(n_max)).collect();
    let mut scaled = Vec::with_capacity(n_grid.len());
    let mut power = kernel.apply(g);
    let mut sum = power.clone();
    let mut next = 0;
    for n in 1..=*n_grid.last().unwrap() {
        if n > 1 {
            power = kernel.apply(&power);
            sum += &power;
        }
        if n == n_grid[next] {
            scaled.push((n as f64).powf(beta - 1.0) * pi.l2_norm(&sum));
            next += 1;
        }
    }
    let sup = scaled.iter().copied().fold(0.0, f64::max);
    let half = n_grid.len() / 2;
    let tail_slope = if sup == 0.0 { 0.0 } else { loglog_slope(&n_grid[half..], &scaled[half..]) };
    Ok(FracMembership {
        beta,
        n_grid,
        scaled_norms: scaled,
        sup,
        tail_slope,
        bounded: sup == 0.0 || tail_slope <= ALPHA_MARGIN,
    })
}

/// Ensemble settings for [`remainder_growth`].
#[derive(Debug, Clone)]
pub struct RemainderConfig {
    pub paths: usize,
    /// Checkpoints; must be increasing.
    pub n_grid: Vec<usize>,
    pub seed: u64,
}

impl RemainderConfig {
    /// Dyadic checkpoints `2^lo ..= 2^hi`.
    pub fn dyadic(paths: usize, lo: u32, hi: u32, seed: u64) -> Self {
        Self { paths, n_grid: (lo..=hi).map(|e| 1usize << e).collect(), seed }
    }
}

/// Monte Carlo growth of the remainder `R_n = T_n - M_n`, with `T_n` the
/// forward sum and `M_n` the limit martingale.
#[derive(Debug, Clone)]
pub struct RemainderDiagnostics {
    pub n_grid: Vec<usize>,
    pub e_r2: Vec<f64>,
    pub e_r2_stderr: Vec<f64>,
    pub beta_hat: f64,
    pub alpha_hat: f64,
    /// `beta_hat <= 2 alpha_hat + 0.1`.
    pub consistent: bool,
    /// Ensemble mean of `max_{k<=n} |R_k| / sqrt(2 n log log n)`.
    pub max_r_stat: Vec<f64>,
    /// Ensemble mean of `max_{k<n} |m_k| / sqrt(2 n log log n)`.
    pub max_m_stat: Vec<f64>,
}

/// Remainder diagnostics over an ensemble of stationary paths. Replica `r`
/// uses stream `(seed, r)`; per-path results are merged in replica order.
pub fn remainder_growth(
    kernel: &FiniteKernel,
    pi: &StationaryDistribution,
    g: &Observable,
    config: &RemainderConfig,
) -> Result<RemainderDiagnostics> {
    if config.paths < 100 {
        return Err(Error::InvalidArgument(format!(
            "remainder growth needs at least 100 paths, got {}",
            config.paths
        )));
    }
    if config.n_grid.is_empty() || config.n_grid.windows(2).any(|w| w[1] <= w[0]) || config.n_grid[0] == 0
    {
        return Err(Error::InvalidArgument("n grid must be increasing and positive".into()));
    }
    let gm = g.matrix();
    let h = poisson_limit(kernel, pi, gm)?.h;
    let mk = martingale_kernel(kernel, pi, &h);
    let n_max = *config.n_grid.last().unwrap();
    let fit = mw_fit(kernel, pi, gm, n_max.max(8), ALPHA_MARGIN)?;

    let per_path: Vec<PathRemainder> = (0..config.paths as u64)
        .into_par_iter()
        .map(|r| path_remainder(kernel, pi, gm, &mk, &config.n_grid, config.seed, r))
        .collect();

    let m = config.n_grid.len();
    let mut e_r2 = Vec::with_capacity(m);
    let mut e_r2_stderr = Vec::with_capacity(m);
    let mut max_r_stat = Vec::with_capacity(m);
    let mut max_m_stat = Vec::with_capacity(m);
    for i in 0..m {
        let sq: Vec<f64> = per_path.iter().map(|p| p.r2[i]).collect();
        let (mean, se) = mean_stderr(&sq);
        e_r2.push(mean);
        e_r2_stderr.push(se);
        max_r_stat.push(per_path.iter().map(|p| p.max_r[i]).sum::<f64>() / per_path.len() as f64);
        max_m_stat.push(per_path.iter().map(|p| p.max_m[i]).sum::<f64>() / per_path.len() as f64);
    }
    let beta_hat =
        if e_r2.iter().all(|&v| v == 0.0) { 0.0 } else { loglog_slope(&config.n_grid, &e_r2) };
    Ok(RemainderDiagnostics {
        n_grid: config.n_grid.clone(),
        e_r2,
        e_r2_stderr,
        beta_hat,
        alpha_hat: fit.alpha_hat,
        consistent: beta_hat <= 2.0 * fit.alpha_hat + 0.1,
        max_r_stat,
        max_m_stat,
    })
}

struct PathRemainder {
    r2: Vec<f64>,
    max_r: Vec<f64>,
    max_m: Vec<f64>,
}

fn path_remainder(
    kernel: &FiniteKernel,
    pi: &StationaryDistribution,
    g: &DMatrix<f64>,
    mk: &MartingaleKernel,
    grid: &[usize],
    seed: u64,
    replica: u64,
) -> PathRemainder {
    let d = g.ncols();
    let mut walker = Walker::stationary(kernel, pi, seed, replica);
    let mut forward = vec![0.0; d];
    let mut mart = vec![0.0; d];
    let mut r = vec![0.0; d];
    let (mut max_r, mut max_m) = (0.0f64, 0.0f64);
    let mut out = PathRemainder {
        r2: Vec::with_capacity(grid.len()),
        max_r: Vec::with_capacity(grid.len()),
        max_m: Vec::with_capacity(grid.len()),
    };
    let mut next = 0;
    let mut prev = walker.state();
    for k in 1..=*grid.last().unwrap() {
        let cur = walker.step();
        let m = mk.value(prev, cur);
        max_m = max_m.max(norm(m));
        for c in 0..d {
            forward[c] += g[(cur, c)];
            mart[c] += m[c];
            r[c] = forward[c] - mart[c];
        }
        max_r = max_r.max(norm(&r));
        if k == grid[next] {
            let scale = lil_scale(k);
            out.r2.push(r.iter().map(|x| x * x).sum());
            out.max_r.push(max_r / scale);
            out.max_m.push(max_m / scale);
            next += 1;
        }
        prev = cur;
    }
    out
}

/// `max_{k<n} |m_k| / sqrt(2 n log log n)` at dyadic `n = 2, 4, ... <= len`,
/// with `m_k = H(X_k, X_{k+1})`.
pub fn max_increment_stat(path: &SamplePath, mk: &MartingaleKernel) -> Result<Vec<(usize, f64)>> {
    if path.len() < 16 {
        return Err(Error::InvalidArgument(format!(
            "max-increment diagnostic needs at least 16 steps, got {}",
            path.len()
        )));
    }
    let grid = dyadic_grid(path.len());
    let mut out = Vec::with_capacity(grid.len());
    let mut best: f64 = 0.0;
    let mut next = 0;
    for k in 0..path.len() {
        best = best.max(norm(mk.value(path.state(k), path.state(k + 1))));
        if next < grid.len() && k + 1 == grid[next] {
            out.push((grid[next], best / lil_scale(grid[next])));
            next += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{load_chain, simulate, Chain, ChainSpec};

    fn chain(p: Vec<Vec<f64>>, g: Vec<f64>) -> Chain {
        let n = p.len();
        load_chain(&ChainSpec {
            states: (0..n).map(|i| format!("s{i}")).collect(),
            p,
            g: g.into_iter().map(|x| vec![x]).collect(),
            d: 1,
            center: true,
        })
        .unwrap()
    }

    fn two(p: f64) -> Chain {
        chain(vec![vec![1.0 - p, p], vec![p, 1.0 - p]], vec![1.0, -1.0])
    }

    #[test]
    fn coefficients_follow_recurrence() {
        let op = FracOperator::new(0.5, 4).unwrap();
        let expect = [1.0, -0.5, -0.125, -0.0625, -0.0390625];
        for (a, b) in op.coeffs().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((op.coefficient_tail() - (1.0 - 0.5 - 0.125 - 0.0625 - 0.0390625)).abs() < 1e-15);
        let one = FracOperator::new(1.0, 5).unwrap();
        assert_eq!(one.coeffs(), &[1.0, -1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(FracOperator::new(0.0, 3).is_err());
        assert!(FracOperator::new(1.5, 3).is_err());
    }

    #[test]
    fn alpha_one_is_exact() {
        let c = chain(
            vec![vec![0.2, 0.5, 0.3], vec![0.6, 0.1, 0.3], vec![0.3, 0.3, 0.4]],
            vec![0.7, -1.3, 2.0],
        );
        let u = DMatrix::from_column_slice(3, 1, &[0.3, -2.0, 1.1]);
        let direct = &u - c.kernel.apply(&u);
        for trunc in [Truncation::Fixed(1), Truncation::Fixed(7), Truncation::default()] {
            let out = frac_power_apply(&c.kernel, 1.0, &u, trunc).unwrap();
            assert_eq!(out.values, direct);
            assert_eq!(out.tail_bound, 0.0);
        }
    }

    #[test]
    fn sym2_centered_input_is_fixed() {
        let c = two(0.5);
        let g = c.observable.matrix();
        for alpha in [0.1, 0.5, 0.9] {
            let out = frac_power_apply(&c.kernel, alpha, g, Truncation::default()).unwrap();
            assert_eq!(&out.values, g);
        }
    }

    #[test]
    fn lazy2_half_power_is_scalar() {
        let p = 0.25;
        let c = two(p);
        let g = c.observable.matrix();
        let out = frac_power_apply(&c.kernel, 0.5, g, Truncation::default()).unwrap();
        let expect = g * (2.0 * p).sqrt();
        assert!(max_abs(&(&out.values - &expect)) <= out.tail_bound + 1e-14);
        assert!(out.tail_bound <= 1e-8);
    }

    #[test]
    fn periodic_chain_uses_eigenvalue_two() {
        let c = two(1.0);
        let g = c.observable.matrix();
        let out = frac_power_apply(&c.kernel, 0.5, g, Truncation::Fixed(2000)).unwrap();
        let expect = g * 2f64.sqrt();
        let err = max_abs(&(&out.values - &expect));
        assert!(err <= out.tail_bound, "{err} > {}", out.tail_bound);
    }

    #[test]
    fn membership_examples() {
        let c = two(0.5);
        let m = frac_membership(&c.kernel, &c.stationary, c.observable.matrix(), 0.4, 1 << 12).unwrap();
        assert_eq!(m.sup, 0.0);
        assert!(m.bounded);

        let c = two(0.25);
        let m = frac_membership(&c.kernel, &c.stationary, c.observable.matrix(), 0.4, 1 << 12).unwrap();
        assert!(m.bounded);
        for (&n, &v) in m.n_grid.iter().zip(&m.scaled_norms) {
            // ||sum_{k=1}^n Q^k g|| <= sum (1/2)^k <= 1.
            assert!(v <= (n as f64).powf(-0.6) + 1e-12);
        }

        let zero = DMatrix::zeros(2, 1);
        let m = frac_membership(&c.kernel, &c.stationary, &zero, 0.4, 64).unwrap();
        assert_eq!(m.sup, 0.0);
        assert!(frac_membership(&c.kernel, &c.stationary, &zero, 1.0, 64).is_err());
    }

    #[test]
    fn remainder_sym2_is_identically_zero() {
        let c = two(0.5);
        let cfg = RemainderConfig::dyadic(100, 4, 10, 5);
        let diag = remainder_growth(&c.kernel, &c.stationary, &c.observable, &cfg).unwrap();
        assert!(diag.e_r2.iter().all(|&v| v == 0.0));
        assert!(diag.max_r_stat.iter().all(|&v| v == 0.0));
        assert_eq!(diag.beta_hat, 0.0);
        assert!(diag.consistent);
    }

    #[test]
    fn remainder_alt2_is_bounded() {
        let c = two(1.0);
        let cfg = RemainderConfig::dyadic(100, 4, 10, 5);
        let diag = remainder_growth(&c.kernel, &c.stationary, &c.observable, &cfg).unwrap();
        assert!(diag.e_r2.iter().all(|&v| v <= 1.0));
        assert!(diag.beta_hat.abs() < 0.1);
        assert!(diag.max_m_stat.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn remainder_requires_enough_paths() {
        let c = two(0.5);
        let cfg = RemainderConfig::dyadic(10, 4, 6, 5);
        assert!(remainder_growth(&c.kernel, &c.stationary, &c.observable, &cfg).is_err());
    }

    #[test]
    fn max_increment_examples() {
        let c = two(0.5);
        let h = poisson_limit(&c.kernel, &c.stationary, c.observable.matrix()).unwrap().h;
        let mk = martingale_kernel(&c.kernel, &c.stationary, &h);
        let path = simulate(&c.kernel, &c.stationary, &c.observable, 64, 8).unwrap();
        let stats = max_increment_stat(&path, &mk).unwrap();
        assert_eq!(stats[1].0, 4);
        assert_eq!(stats[1].1, 1.0 / 8f64.sqrt());
        for (n, v) in &stats {
            assert!(*v <= mk.max_norm_on_support() / lil_scale(*n));
        }
        let short = simulate(&c.kernel, &c.stationary, &c.observable, 8, 8).unwrap();
        assert!(max_increment_stat(&short, &mk).is_err());

        let c = two(1.0);
        let h = poisson_limit(&c.kernel, &c.stationary, c.observable.matrix()).unwrap().h;
        let mk = martingale_kernel(&c.kernel, &c.stationary, &h);
        let path = simulate(&c.kernel, &c.stationary, &c.observable, 64, 8).unwrap();
        assert!(max_increment_stat(&path, &mk).unwrap().iter().all(|&(_, v)| v == 0.0));
    }
}
