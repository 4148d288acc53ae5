//! Small numerical helpers shared by the diagnostics.

use std::f64::consts::E;

/// `log log x` with the convention `log log x = 1` for `0 < x <= e^e`.
pub fn loglog(x: f64) -> f64 {
    if x <= E.powf(E) {
        1.0
    } else {
        x.ln().ln()
    }
}

/// LIL normalisation `sqrt(2 n log log n)`.
pub fn lil_scale(n: usize) -> f64 {
    (2.0 * n as f64 * loglog(n as f64)).sqrt()
}

/// Least-squares slope of `ys` against `xs`. Returns 0 for fewer than two
/// points or a degenerate abscissa.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return 0.0;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs[..n].iter().zip(&ys[..n]) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Slope of `log max(v, 1e-300)` against `log n`.
pub fn loglog_slope(ns: &[usize], values: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = values.iter().map(|&v| v.max(1e-300).ln()).collect();
    ls_slope(&xs, &ys)
}

/// Powers of two `2, 4, ..., <= n_max`.
pub fn dyadic_grid(n_max: usize) -> Vec<usize> {
    std::iter::successors(Some(2usize), |&n| n.checked_mul(2))
        .take_while(|&n| n <= n_max)
        .collect()
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Euclidean norm of a coordinate slice.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
