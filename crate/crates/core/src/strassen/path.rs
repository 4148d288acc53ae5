use crate::chain::SamplePath;
use crate::error::{Error, Result};
use crate::stats::{lil_scale, norm};

/// Piecewise-linear map `[0, 1] -> R^d` through `(t_i, f_i)` with
/// `0 = t_0 < ... < t_m = 1` and `f_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFunction {
    times: Vec<f64>,
    values: Vec<f64>,
    dim: usize,
}

impl PathFunction {
    pub fn new(times: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("path dimension must be at least 1".into()));
        }
        if times.len() < 2 || values.len() != times.len() * dim {
            return Err(Error::InvalidArgument(format!(
                "need at least two knots and {} values per knot",
                dim
            )));
        }
        if times[0] != 0.0 || *times.last().unwrap() != 1.0 {
            return Err(Error::InvalidArgument("grid must run from t = 0 to t = 1".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("grid must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("path values must be finite".into()));
        }
        if values[..dim].iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidArgument("path must start at f(0) = 0".into()));
        }
        Ok(Self { times, values, dim })
    }

    /// Uniform grid `t_i = i / m` with `m + 1` knots.
    pub fn uniform(values: Vec<f64>, dim: usize) -> Result<Self> {
        let knots = values.len() / dim.max(1);
        if knots < 2 {
            return Err(Error::InvalidArgument("need at least two knots".into()));
        }
        let m = knots - 1;
        let times = (0..=m).map(|i| i as f64 / m as f64).collect();
        Self::new(times, values, dim)
    }

    /// `f(t) = t v`.
    pub fn linear(v: &[f64], m: usize) -> Self {
        let d = v.len();
        let mut values = Vec::with_capacity((m + 1) * d);
        for i in 0..=m {
            let t = i as f64 / m as f64;
            values.extend(v.iter().map(|x| t * x));
        }
        Self::uniform(values, d).expect("valid linear path")
    }

    pub fn zero(m: usize, dim: usize) -> Self {
        Self::uniform(vec![0.0; (m + 1) * dim], dim).expect("valid zero path")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of knots `m + 1`.
    pub fn knots(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn knot(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Linear interpolation at `t` in `[0, 1]`.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let t = t.clamp(0.0, 1.0);
        let i = self.times.partition_point(|&s| s <= t).clamp(1, self.times.len() - 1);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        self.knot(i - 1).iter().zip(self.knot(i)).map(|(a, b)| a + w * (b - a)).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            times: self.times.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
            dim: self.dim,
        }
    }

    /// `sup_t |f(t)|`, attained at a knot.
    pub fn sup_norm(&self) -> f64 {
        (0..self.knots()).map(|i| norm(self.knot(i))).fold(0.0, f64::max)
    }

    /// Sup-norm distance to another path on the same grid.
    pub fn sup_distance(&self, other: &PathFunction) -> f64 {
        (0..self.knots())
            .map(|i| {
                let diff: Vec<f64> =
                    self.knot(i).iter().zip(other.knot(i)).map(|(a, b)| a - b).collect();
                norm(&diff)
            })
            .fold(0.0, f64::max)
    }
}

/// `sum_i |f_i - f_{i-1}|^2 / (t_i - t_{i-1})`, the exact `int |f'|^2` of a
/// piecewise-linear path.
pub fn energy(f: &PathFunction) -> f64 {
    (1..f.knots())
        .map(|i| {
            let dt = f.times[i] - f.times[i - 1];
            let sq: f64 = f.knot(i).iter().zip(f.knot(i - 1)).map(|(a, b)| (a - b) * (a - b)).sum();
            sq / dt
        })
        .sum()
}

/// `max_i (|f(t_i)| - sqrt(tr_d t_i))`; non-positive when the envelope holds.
pub fn envelope_check(f: &PathFunction, tr_d: f64) -> f64 {
    (0..f.knots())
        .map(|i| norm(f.knot(i)) - (tr_d * f.times[i]).sqrt())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `xi_n(t) = [S_k + (n t - k) g(X_k)] / sqrt(2 n log log n)` for
/// `t in [k/n, (k+1)/n)`, sampled at `t_j = j / m`.
pub fn xi_path(path: &SamplePath, n: usize, m: usize) -> Result<PathFunction> {
    if n == 0 || n > path.len() {
        return Err(Error::InvalidArgument(format!(
            "n = {n} must lie in 1..={} (path length)",
            path.len()
        )));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("output grid needs m >= 1".into()));
    }
    let d = path.dim();
    let scale = lil_scale(n);
    let mut values = Vec::with_capacity((m + 1) * d);
    for j in 0..=m {
        values.extend(interpolate_knot(n, m, j, |k| path.partial_sum(k)).into_iter().map(|v| v / scale));
    }
    PathFunction::uniform(values, d)
}

/// `S_k + (n t_j - k)(S_{k+1} - S_k)` at `t_j = j / m`, with `k = floor(n j / m)`
/// computed in integer arithmetic.
pub(crate) fn interpolate_knot<'a>(
    n: usize,
    m: usize,
    j: usize,
    sum_at: impl Fn(usize) -> &'a [f64],
) -> Vec<f64> {
    let (k, rem) = knot_index(n, m, j);
    let s = sum_at(k);
    if rem == 0 {
        return s.to_vec();
    }
    let w = rem as f64 / m as f64;
    let s1 = sum_at(k + 1);
    s.iter().zip(s1).map(|(a, b)| a + w * (b - a)).collect()
}

/// `(floor(n j / m), (n j) mod m)`.
pub(crate) fn knot_index(n: usize, m: usize, j: usize) -> (usize, usize) {
    let x = n as u128 * j as u128;
    ((x / m as u128) as usize, (x % m as u128) as usize)
}
