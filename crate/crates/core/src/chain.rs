//! Finite-state kernels, stationary laws, centered observables and seeded
//! path simulation.

use std::collections::{HashSet, VecDeque};
use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Row-sum tolerance for a stochastic matrix.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Componentwise tolerance for `pi P = pi`.
pub const STATIONARY_TOL: f64 = 1e-10;
/// Tolerance on the stationary mean of a centered observable.
pub const CENTERING_TOL: f64 = 1e-10;

/// JSON chain-spec document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainSpec {
    pub states: Vec<String>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub d: usize,
    #[serde(default)]
    pub center: bool,
}

impl ChainSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))
    }
}

/// Row-stochastic, irreducible transition matrix over labelled states.
#[derive(Debug, Clone)]
pub struct FiniteKernel {
    states: Vec<String>,
    p: DMatrix<f64>,
    cumulative: Vec<Vec<f64>>,
}

impl FiniteKernel {
    pub fn new(states: Vec<String>, p: DMatrix<f64>) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::Malformed("no states".into()));
        }
        let mut seen = HashSet::new();
        for s in &states {
            if !seen.insert(s.as_str()) {
                return Err(Error::Malformed(format!("duplicate state label '{s}'")));
            }
        }
        if p.nrows() != n || p.ncols() != n {
            return Err(Error::Malformed(format!(
                "P is {}x{} but there are {n} states",
                p.nrows(),
                p.ncols()
            )));
        }
        for i in 0..n {
            let row = p.row(i);
            if row.iter().any(|&x| !x.is_finite() || !(0.0..=1.0).contains(&x)) {
                return Err(Error::NonStochasticRow(i));
            }
            if (row.sum() - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::NonStochasticRow(i));
            }
        }
        check_irreducible(&states, &p)?;

        let cumulative = (0..n).map(|i| cumulative_row(p.row(i).iter().copied())).collect();
        Ok(Self { states, p, cumulative })
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.p[(from, to)]
    }

    /// `(Q u)(x) = sum_y P(x, y) u(y)`, applied column-wise.
    pub fn apply(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        &self.p * u
    }

    fn next_state(&self, from: usize, u: f64) -> usize {
        draw(&self.cumulative[from], u)
    }
}

fn cumulative_row(probs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = probs
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    // Pin the last positive mass to exactly 1 so that every u in [0, 1)
    // lands on a state with positive probability.
    let total = acc;
    for c in cdf.iter_mut() {
        *c /= total;
    }
    if let Some(last_pos) = (0..cdf.len()).rev().find(|&j| j == 0 || cdf[j] > cdf[j - 1]) {
        for c in cdf[last_pos..].iter_mut() {
            *c = 1.0;
        }
    }
    cdf
}

fn draw(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn check_irreducible(states: &[String], p: &DMatrix<f64>) -> Result<()> {
    let n = states.len();
    let reach = |forward: bool| -> Vec<bool> {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                let w = if forward { p[(i, j)] } else { p[(j, i)] };
                if w > 0.0 && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen
    };
    if let Some(j) = reach(true).iter().position(|&r| !r) {
        return Err(Error::Reducible { from: states[0].clone(), to: states[j].clone() });
    }
    if let Some(j) = reach(false).iter().position(|&r| !r) {
        return Err(Error::Reducible { from: states[j].clone(), to: states[0].clone() });
    }
    Ok(())
}

/// Stationary probability vector of a kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pi: Vec<f64>,
    cumulative: Vec<f64>,
}

impl StationaryDistribution {
    pub fn as_slice(&self) -> &[f64] {
        &self.pi
    }

    pub fn get(&self, i: usize) -> f64 {
        self.pi[i]
    }

    /// Stationary mean of each column of `u`.
    pub fn mean(&self, u: &DMatrix<f64>) -> Vec<f64> {
        (0..u.ncols())
            .map(|c| self.pi.iter().enumerate().map(|(x, p)| p * u[(x, c)]).sum())
            .collect()
    }

    /// `L^2(pi)` norm `sqrt(sum_x pi(x) |u(x)|^2)`.
    pub fn l2_norm(&self, u: &DMatrix<f64>) -> f64 {
        self.pi
            .iter()
            .enumerate()
            .map(|(x, p)| p * u.row(x).norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    pub(crate) fn draw(&self, u: f64) -> usize {
        draw(&self.cumulative, u)
    }
}

/// Solves `(P^t - I) pi = 0` together with `sum pi = 1` by dense LU, then
/// applies one power-iteration step `pi <- pi P`.
pub fn stationary(kernel: &FiniteKernel) -> Result<StationaryDistribution> {
    let n = kernel.n_states();
    let p = kernel.matrix();
    let mut a = p.transpose() - DMatrix::<f64>::identity(n, n);
    // The rows of P^t - I sum to zero, so one of them is redundant; the
    // normalisation constraint takes its place.
    a.row_mut(n - 1).fill(1.0);
    let mut b = DMatrix::<f64>::zeros(n, 1);
    b[(n - 1, 0)] = 1.0;
    let sol = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Singular("stationary system".into()))?;

    let pi_row = sol.transpose();
    let refined = &pi_row * p;
    let mut pi: Vec<f64> = refined.iter().map(|&x| if x < 0.0 && x > -1e-12 { 0.0 } else { x }).collect();
    let total: f64 = pi.iter().sum();
    if !total.is_finite() || total <= 0.0 || pi.iter().any(|&x| x < 0.0) {
        return Err(Error::Singular("stationary vector has negative mass".into()));
    }
    for x in pi.iter_mut() {
        *x /= total;
    }

    let row = DMatrix::from_row_slice(1, n, &pi);
    let moved = &row * p;
    let drift = moved.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if drift > STATIONARY_TOL {
        return Err(Error::Singular(format!("pi P differs from pi by {drift:e}")));
    }
    let cumulative = cumulative_row(pi.iter().copied());
    Ok(StationaryDistribution { pi, cumulative })
}

/// Centered `R^d`-valued function on the state space, one row per state.
#[derive(Debug, Clone)]
pub struct Observable {
    g: DMatrix<f64>,
}

impl Observable {
    /// Accepts `g` only if its stationary mean vanishes.
    pub fn new(g: DMatrix<f64>, pi: &StationaryDistribution) -> Result<Self> {
        check_shape(&g, pi)?;
        for (coord, mean) in pi.mean(&g).into_iter().enumerate() {
            if mean.abs() > CENTERING_TOL {
                return Err(Error::NotCentered { coord, mean });
            }
        }
        Ok(Self { g })
    }

    /// Subtracts the stationary mean; returns the observable and the shift.
    pub fn centered(mut g: DMatrix<f64>, pi: &StationaryDistribution) -> Result<(Self, Vec<f64>)> {
        check_shape(&g, pi)?;
        let mean = pi.mean(&g);
        for (c, m) in mean.iter().enumerate() {
            g.column_mut(c).add_scalar_mut(-m);
        }
        Ok((Self { g }, mean))
    }

    pub fn dim(&self) -> usize {
        self.g.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// Largest Euclidean norm `|g(x)|` over states.
    pub fn max_norm(&self) -> f64 {
        (0..self.g.nrows()).map(|x| self.g.row(x).norm()).fold(0.0, f64::max)
    }
}

fn check_shape(g: &DMatrix<f64>, pi: &StationaryDistribution) -> Result<()> {
    if g.nrows() != pi.as_slice().len() || g.ncols() == 0 {
        return Err(Error::Malformed(format!(
            "observable has shape {}x{}, expected {}xd with d >= 1",
            g.nrows(),
            g.ncols(),
            pi.as_slice().len()
        )));
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::Malformed("observable has non-finite entries".into()));
    }
    Ok(())
}

/// A validated chain: kernel, stationary law and centered observable.
#[derive(Debug, Clone)]
pub struct Chain {
    pub kernel: FiniteKernel,
    pub stationary: StationaryDistribution,
    pub observable: Observable,
    /// Mean subtracted by auto-centering, if it was requested.
    pub centering_shift: Option<Vec<f64>>,
}

impl Chain {
    pub fn dim(&self) -> usize {
        self.observable.dim()
    }
}

/// Validates a chain spec into a kernel, its stationary law and a centered
/// observable.
pub fn load_chain(spec: &ChainSpec) -> Result<Chain> {
    let n = spec.states.len();
    if n == 0 {
        return Err(Error::Malformed("states must be non-empty".into()));
    }
    if spec.p.len() != n {
        return Err(Error::Malformed(format!("P has {} rows, expected {n}", spec.p.len())));
    }
    for (i, row) in spec.p.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Malformed(format!("P row {i} has {} entries, expected {n}", row.len())));
        }
    }
    if spec.d == 0 {
        return Err(Error::Malformed("d must be at least 1".into()));
    }
    if spec.g.len() != n {
        return Err(Error::Malformed(format!("g has {} rows, expected {n}", spec.g.len())));
    }
    for (i, row) in spec.g.iter().enumerate() {
        if row.len() != spec.d {
            return Err(Error::Malformed(format!(
                "g row {i} has {} entries, expected d = {}",
                row.len(),
                spec.d
            )));
        }
    }

    let p = DMatrix::from_fn(n, n, |i, j| spec.p[i][j]);
    let kernel = FiniteKernel::new(spec.states.clone(), p)?;
    let stationary = stationary(&kernel)?;
    let g = DMatrix::from_fn(n, spec.d, |i, c| spec.g[i][c]);
    let (observable, centering_shift) = if spec.center {
        let (obs, shift) = Observable::centered(g, &stationary)?;
        (obs, Some(shift))
    } else {
        (Observable::new(g, &stationary)?, None)
    };
    Ok(Chain { kernel, stationary, observable, centering_shift })
}

/// Incremental stationary walker; the building block of every simulation.
pub struct Walker<'a> {
    kernel: &'a FiniteKernel,
    rng: ChaCha8Rng,
    state: usize,
}

impl<'a> Walker<'a> {
    /// Starts at `X_0 ~ pi` on stream `(seed, replica)`.
    pub fn stationary(
        kernel: &'a FiniteKernel,
        pi: &StationaryDistribution,
        seed: u64,
        replica: u64,
    ) -> Self {
        let mut rng = rng::stream(seed, replica);
        let state = pi.draw(rng.gen::<f64>());
        Self { kernel, rng, state }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    /// Advances one step and returns the new state.
    pub fn step(&mut self) -> usize {
        let u = self.rng.gen::<f64>();
        self.state = self.kernel.next_state(self.state, u);
        self.state
    }
}

/// Realisation `X_0..X_n` with partial sums `S_k = g(X_0) + ... + g(X_{k-1})`.
#[derive(Debug, Clone)]
pub struct SamplePath {
    pub seed: u64,
    pub replica: u64,
    states: Vec<usize>,
    sums: Vec<f64>,
    dim: usize,
}

impl SamplePath {
    /// Number of steps `n`.
    pub fn len(&self) -> usize {
        self.states.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn state(&self, k: usize) -> usize {
        self.states[k]
    }

    /// `S_k`.
    pub fn partial_sum(&self, k: usize) -> &[f64] {
        &self.sums[k * self.dim..(k + 1) * self.dim]
    }

    /// Writes `k,state,S_1..S_d`.
    pub fn write_csv<W: Write>(&self, kernel: &FiniteKernel, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["k".to_string(), "state".to_string()];
        header.extend((1..=self.dim).map(|c| format!("S_{c}")));
        w.write_record(&header)?;
        for k in 0..=self.len() {
            let mut rec = vec![k.to_string(), kernel.states()[self.states[k]].clone()];
            rec.extend(self.partial_sum(k).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Simulates a stationary path of `n` steps on stream `(seed, 0)`.
pub fn simulate(
    kernel: &FiniteKernel,
    pi: &StationaryDistribution,
    g: &Observable,
    n: usize,
    seed: u64,
) -> Result<SamplePath> {
    simulate_replica(kernel, pi, g, n, seed, 0)
}

/// Simulates replica `replica` of the ensemble keyed by `seed`.
pub fn simulate_replica(
    kernel: &FiniteKernel,
    pi: &StationaryDistribution,
    g: &Observable,
    n: usize,
    seed: u64,
    replica: u64,
) -> Result<SamplePath> {
    if n < 1 {
        return Err(Error::InvalidArgument("path length must be at least 1".into()));
    }
    let d = g.dim();
    let gm = g.matrix();
    let mut walker = Walker::stationary(kernel, pi, seed, replica);
    let mut states = Vec::with_capacity(n + 1);
    let mut sums = vec![0.0; (n + 1) * d];
    states.push(walker.state());
    for k in 0..n {
        let x = states[k];
        for c in 0..d {
            sums[(k + 1) * d + c] = sums[k * d + c] + gm[(x, c)];
        }
        states.push(walker.step());
    }
    Ok(SamplePath { seed, replica, states, sums, dim: d })
}
