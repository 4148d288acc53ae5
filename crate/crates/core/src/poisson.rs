//! Resolvent and Poisson solutions, the martingale kernel, and the
//! martingale-plus-remainder decomposition of a sample path.

use nalgebra::DMatrix;

use crate::chain::{FiniteKernel, Observable, SamplePath, StationaryDistribution, CENTERING_TOL};
use crate::error::{Error, Result};
use crate::stats::{dyadic_grid, loglog_slope};

/// Relative tolerance on the resolvent residual `(1+eps) h - Q h - g`.
pub const RESOLVENT_TOL: f64 = 1e-10;
/// Default reporting margin below 1/2 for the moment-condition exponent.
pub const ALPHA_MARGIN: f64 = 0.05;

fn lu_solve(a: DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let x = a.lu().solve(b).ok_or_else(|| Error::Singular(what.to_string()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular(what.to_string()));
    }
    Ok(x)
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, &b| a.max(b.abs()))
}

/// Solution `h_eps` of `(1 + eps) h = Q h + g`.
#[derive(Debug, Clone)]
pub struct ResolventSolution {
    pub epsilon: f64,
    pub h: DMatrix<f64>,
    /// Max-norm of `(1 + eps) h - Q h - g`.
    pub residual: f64,
}

/// Dense solve of `((1 + eps) I - P) h = g`.
pub fn solve_resolvent(
    kernel: &FiniteKernel,
    g: &DMatrix<f64>,
    epsilon: f64,
) -> Result<ResolventSolution> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let n = kernel.n_states();
    let a = DMatrix::<f64>::identity(n, n) * (1.0 + epsilon) - kernel.matrix();
    let h = lu_solve(a, g, "resolvent system")?;
    let residual = max_abs(&(&h * (1.0 + epsilon) - kernel.apply(&h) - g));
    if residual > RESOLVENT_TOL * (1.0 + max_abs(g)) {
        return Err(Error::Singular(format!("resolvent residual {residual:e}")));
    }
    Ok(ResolventSolution { epsilon, h, residual })
}

/// Truncated series `sum_{n=1}^{terms} (1+eps)^{-n} Q^{n-1} g` and the
/// max-norm tail bound `max|g| (1+eps)^{-terms} / eps`.
pub fn resolvent_series(
    kernel: &FiniteKernel,
    g: &DMatrix<f64>,
    epsilon: f64,
    terms: usize,
) -> (DMatrix<f64>, f64) {
    let mut acc = DMatrix::zeros(g.nrows(), g.ncols());
    let mut power = g.clone();
    let mut weight = 1.0;
    for _ in 0..terms {
        weight /= 1.0 + epsilon;
        acc += &power * weight;
        power = kernel.apply(&power);
    }
    let tail = max_abs(g) * (1.0 + epsilon).powi(-(terms as i32)) / epsilon;
    (acc, tail)
}

/// Centered solution of the Poisson equation `h - Q h = g`.
#[derive(Debug, Clone)]
pub struct PoissonSolution {
    pub h: DMatrix<f64>,
    /// `max|h_eps - h|` at `eps = 1e-6`, relative to `max(max|h|, max|g|)`.
    pub continuation_error: f64,
}

/// Solves `(I - P + Pi) h = g` with `Pi` the rank-one projection onto the
/// stationary law; for centered `g` this gives `(I - P) h = g`, `pi h = 0`.
pub fn poisson_limit(
    kernel: &FiniteKernel,
    pi: &StationaryDistribution,
    g: &DMatrix<f64>,
) -> Result<PoissonSolution> {
    for (coord, mean) in pi.mean(g).into_iter().enumerate() {
        if mean.abs() > CENTERING_TOL {
            return Err(Error::NotCentered { coord, mean });
        }
    }
    let n = kernel.n_states();
    let pis = pi.as_slice();
    let a = DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - kernel.prob(i, j) + pis[j]
    });
    let h = lu_solve(a, g, "fundamental matrix")?;

    let eps = 1e-6;
    let h_eps = solve_resolvent(kernel, g, eps)?.h;
    let scale = max_abs(&h).max(max_abs(g));
    let continuation_error =
        if scale == 0.0 { 0.0 } else { max_abs(&(&h_eps - &h)) / scale };
    Ok(PoissonSolution { h, continuation_error })
}

/// `H(x0, x1) = h(x1) - (Q h)(x0)` with the pair measure
/// `pi_1(x0, x1) = pi(x0) P(x0, x1)`.
#[derive(Debug, Clone)]
pub struct MartingaleKernel {
    n_states: usize,
    dim: usize,
    values: Vec<f64>,
    support: Vec<bool>,
    pair_measure: DMatrix<f64>,
    transition: DMatrix<f64>,
}

impl MartingaleKernel {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `H(x0, x1)`.
    pub fn value(&self, x0: usize, x1: usize) -> &[f64] {
        let o = (x0 * self.n_states + x1) * self.dim;
        &self.values[o..o + self.dim]
    }

    pub fn pair_measure(&self) -> &DMatrix<f64> {
        &self.pair_measure
    }

    /// Whether `P(x0, x1) > 0`.
    pub fn in_support(&self, x0: usize, x1: usize) -> bool {
        self.support[x0 * self.n_states + x1]
    }

    /// `max_x0 |sum_x1 P(x0, x1) H(x0, x1)|`.
    pub fn max_conditional_mean(&self) -> f64 {
        (0..self.n_states)
            .map(|x0| {
                let mut acc = vec![0.0; self.dim];
                for x1 in 0..self.n_states {
                    let p = self.transition[(x0, x1)];
                    for (a, v) in acc.iter_mut().zip(self.value(x0, x1)) {
                        *a += p * v;
                    }
                }
                crate::stats::norm(&acc)
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|H(x0, x1)|` over pairs the chain can actually traverse.
    pub fn max_norm_on_support(&self) -> f64 {
        let mut best: f64 = 0.0;
        for x0 in 0..self.n_states {
            for x1 in 0..self.n_states {
                if self.in_support(x0, x1) {
                    best = best.max(crate::stats::norm(self.value(x0, x1)));
                }
            }
        }
        best
    }

    /// `||H||^2` in `L^2(pi_1)`.
    pub fn l2_norm_sq(&self) -> f64 {
        let mut acc = 0.0;
        for x0 in 0..self.n_states {
            for x1 in 0..self.n_states {
                let w = self.pair_measure[(x0, x1)];
                if w > 0.0 {
                    acc += w * self.value(x0, x1).iter().map(|v| v * v).sum::<f64>();
                }
            }
        }
        acc
    }

    /// `||self - other||` in `L^2(pi_1)`.
    pub fn l2_distance(&self, other: &MartingaleKernel) -> f64 {
        let mut acc = 0.0;
        for x0 in 0..self.n_states {
            for x1 in 0..self.n_states {
                let w = self.pair_measure[(x0, x1)];
                if w > 0.0 {
                    acc += w * self
                        .value(x0, x1)
                        .iter()
                        .zip(other.value(x0, x1))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>();
                }
            }
        }
        acc.sqrt()
    }
}

/// Builds `H(x0, x1) = h(x1) - (Q h)(x0)`.
pub fn martingale_kernel(
    kernel: &FiniteKernel,
    pi: &StationaryDistribution,
    h: &DMatrix<f64>,
) -> MartingaleKernel {
    let n = kernel.n_states();
    let d = h.ncols();
    let qh = kernel.apply(h);
    let mut values = Vec::with_capacity(n * n * d);
    for x0 in 0..n {
        for x1 in 0..n {
            for c in 0..d {
                values.push(h[(x1, c)] - qh[(x0, c)]);
            }
        }
    }
    let pair_measure = DMatrix::from_fn(n, n, |i, j| pi.get(i) * kernel.prob(i, j));
    let support = (0..n * n).map(|k| kernel.prob(k / n, k % n) > 0.0).collect();
    MartingaleKernel {
        n_states: n,
        dim: d,
        values,
        support,
        pair_measure,
        transition: kernel.matrix().clone(),
    }
}

/// Martingale decomposition of a path, both at fixed `eps` and in the limit.
///
/// The decomposed sum is the forward sum `T_k = g(X_1) + ... + g(X_k)`, the
/// indexing under which `T_k = M_k(eps) + eps T_k(h_eps) + R_k(eps)` holds with
/// `R_k(eps) = (Q h_eps)(X_0) - (Q h_eps)(X_k)`. It differs from the path's
/// `S_k` by the bounded term `g(X_0) - g(X_k)`. All arrays have `n + 1` rows of
/// `d` entries, row `k` holding the value at index `k`.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub epsilon: f64,
    pub dim: usize,
    pub forward_sum: Vec<f64>,
    pub m_eps: Vec<f64>,
    pub eps_sum_h: Vec<f64>,
    pub r_eps: Vec<f64>,
    pub m_lim: Vec<f64>,
    pub r_lim: Vec<f64>,
}

impl Decomposition {
    pub fn len(&self) -> usize {
        self.forward_sum.len() / self.dim - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row<'a>(&self, series: &'a [f64], k: usize) -> &'a [f64] {
        &series[k * self.dim..(k + 1) * self.dim]
    }

    /// `max_k max_c |T_k - M_k(eps) - eps T_k(h_eps) - R_k(eps)|`.
    pub fn max_identity_deviation(&self) -> f64 {
        (0..self.forward_sum.len())
            .map(|i| (self.forward_sum[i] - self.m_eps[i] - self.eps_sum_h[i] - self.r_eps[i]).abs())
            .fold(0.0, f64::max)
    }
}

/// Decomposes a sample path along `h_eps` and along the Poisson limit `h`.
pub fn decompose_path(
    path: &SamplePath,
    kernel: &FiniteKernel,
    pi: &StationaryDistribution,
    g: &Observable,
    epsilon: f64,
) -> Result<Decomposition> {
    let gm = g.matrix();
    let d = g.dim();
    let h_eps = solve_resolvent(kernel, gm, epsilon)?.h;
    let qh_eps = kernel.apply(&h_eps);
    let h_lim = poisson_limit(kernel, pi, gm)?.h;
    let mk = martingale_kernel(kernel, pi, &h_lim);

    let n = path.len();
    let size = (n + 1) * d;
    let mut out = Decomposition {
        epsilon,
        dim: d,
        forward_sum: vec![0.0; size],
        m_eps: vec![0.0; size],
        eps_sum_h: vec![0.0; size],
        r_eps: vec![0.0; size],
        m_lim: vec![0.0; size],
        r_lim: vec![0.0; size],
    };
    let x0 = path.state(0);
    for k in 1..=n {
        let (prev, cur) = (path.state(k - 1), path.state(k));
        let m = mk.value(prev, cur);
        for c in 0..d {
            let i = k * d + c;
            let j = i - d;
            out.forward_sum[i] = out.forward_sum[j] + gm[(cur, c)];
            out.m_eps[i] = out.m_eps[j] + (h_eps[(cur, c)] - qh_eps[(prev, c)]);
            out.eps_sum_h[i] = out.eps_sum_h[j] + epsilon * h_eps[(cur, c)];
            out.r_eps[i] = qh_eps[(x0, c)] - qh_eps[(cur, c)];
            out.m_lim[i] = out.m_lim[j] + m[c];
            out.r_lim[i] = out.forward_sum[i] - out.m_lim[i];
        }
    }
    Ok(out)
}

/// Growth fit of `V_n = ||sum_{i<n} Q^i g||_{L^2(pi)}`.
#[derive(Debug, Clone)]
pub struct MwFit {
    pub n_grid: Vec<usize>,
    pub v: Vec<f64>,
    /// `V_1 = ||g||_2`.
    pub v1: f64,
    pub alpha_hat: f64,
    pub alpha_ok: bool,
    pub degenerate: bool,
    pub margin: f64,
}

/// `V_1, ..., V_{n_max}` by the recursion `u_n = g + P u_{n-1}`.
pub fn mw_partial_norms(
    kernel: &FiniteKernel,
    pi: &StationaryDistribution,
    g: &DMatrix<f64>,
    n_max: usize,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max);
    let mut u = g.clone();
    for n in 1..=n_max {
        if n > 1 {
            u = g + kernel.apply(&u);
        }
        out.push(pi.l2_norm(&u));
    }
    out
}

/// Fits the exponent `alpha` in `V_n = O(n^alpha)` over the dyadic grid
/// `2, 4, ..., <= n_max`; `alpha_ok` means `alpha_hat < 1/2 - margin`.
pub fn mw_fit(
    kernel: &FiniteKernel,
    pi: &StationaryDistribution,
    g: &DMatrix<f64>,
    n_max: usize,
    margin: f64,
) -> Result<MwFit> {
    if n_max < 8 {
        return Err(Error::InvalidArgument(format!("n_max must be at least 8, got {n_max}")));
    }
    let all = mw_partial_norms(kernel, pi, g, n_max);
    let n_grid = dyadic_grid(n_max);
    let v: Vec<f64> = n_grid.iter().map(|&n| all[n - 1]).collect();
    let degenerate = all.iter().all(|&x| x == 0.0);
    let alpha_hat = if degenerate { 0.0 } else { loglog_slope(&n_grid, &v) };
    Ok(MwFit {
        n_grid,
        v,
        v1: all[0],
        alpha_hat,
        alpha_ok: alpha_hat < 0.5 - margin,
        degenerate,
        margin,
    })
}

/// One row of the `h_eps -> h` convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsConvergence {
    pub epsilon: f64,
    /// `||h_eps - h||_{L^2(pi)}`.
    pub h_error: f64,
    /// `||H_eps - H||_{L^2(pi_1)}`.
    pub kernel_error: f64,
    /// `||h_eps||_{L^2(pi)}`.
    pub h_norm: f64,
    /// `||h_eps||_2 * eps^alpha_hat`, bounded when `||h_eps|| = O(eps^-alpha)`.
    pub scaled_h_norm: f64,
}

pub fn h_eps_convergence(
    kernel: &FiniteKernel,
    pi: &StationaryDistribution,
    g: &DMatrix<f64>,
    eps_grid: &[f64],
    alpha_hat: f64,
) -> Result<Vec<EpsConvergence>> {
    if eps_grid.is_empty()
        || eps_grid.iter().any(|&e| !(e > 0.0 && e.is_finite()))
        || eps_grid.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::InvalidArgument(
            "eps grid must be strictly decreasing positive values".into(),
        ));
    }
    let h = poisson_limit(kernel, pi, g)?.h;
    let big_h = martingale_kernel(kernel, pi, &h);
    eps_grid
        .iter()
        .map(|&epsilon| {
            let h_eps = solve_resolvent(kernel, g, epsilon)?.h;
            let big_h_eps = martingale_kernel(kernel, pi, &h_eps);
            let h_norm = pi.l2_norm(&h_eps);
            Ok(EpsConvergence {
                epsilon,
                h_error: pi.l2_norm(&(&h_eps - &h)),
                kernel_error: big_h_eps.l2_distance(&big_h),
                h_norm,
                scaled_h_norm: h_norm * epsilon.powf(alpha_hat),
            })
        })
        .collect()
}
