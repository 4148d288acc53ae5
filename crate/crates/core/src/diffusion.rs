//! Diffusion matrix `D = E[m_0 m_0^t] = sum pi_1 H H^t`, exactly and from
//! simulated increments.

use nalgebra::DMatrix;

use crate::chain::SamplePath;
use crate::error::{Error, Result};
use crate::poisson::MartingaleKernel;

/// Eigenvalues above `-PSD_FLOOR` count as non-negative.
pub const PSD_FLOOR: f64 = 1e-10;
/// Number of batches used for batch-means standard errors.
pub const BATCHES: usize = 100;
/// Minimum number of increments for an empirical estimate.
pub const MIN_STEPS: usize = 10_000;

#[derive(Debug, Clone)]
pub struct DiffusionMatrix {
    pub matrix: DMatrix<f64>,
    pub trace: f64,
    pub min_eigenvalue: f64,
}

impl DiffusionMatrix {
    fn from_matrix(matrix: DMatrix<f64>) -> Self {
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let min_eigenvalue = sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        Self { trace: matrix.trace(), matrix, min_eigenvalue }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue >= -PSD_FLOOR
    }

    /// Largest `|D_ij - D_ji|`.
    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).iter().fold(0.0, |a, &b| a.max(b.abs()))
    }
}

/// `D = sum_{x0, x1} pi_1(x0, x1) H(x0, x1) H(x0, x1)^t`.
pub fn diffusion_exact(mk: &MartingaleKernel) -> DiffusionMatrix {
    let d = mk.dim();
    let n = mk.n_states();
    let mut m = DMatrix::zeros(d, d);
    for x0 in 0..n {
        for x1 in 0..n {
            let w = mk.pair_measure()[(x0, x1)];
            if w == 0.0 {
                continue;
            }
            let h = mk.value(x0, x1);
            for i in 0..d {
                for j in i..d {
                    m[(i, j)] += w * h[i] * h[j];
                }
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    DiffusionMatrix::from_matrix(m)
}

/// Empirical `D` with batch-means standard errors.
#[derive(Debug, Clone)]
pub struct EmpiricalDiffusion {
    pub estimate: DiffusionMatrix,
    pub stderr: DMatrix<f64>,
    pub steps: usize,
    pub batches: usize,
}

impl EmpiricalDiffusion {
    /// Largest `|D_hat - D| / stderr` over entries; entries with zero standard
    /// error contribute 0 when they match exactly and infinity otherwise.
    pub fn max_z_score(&self, exact: &DiffusionMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, (&est, &ex)) in self.estimate.matrix.iter().zip(exact.matrix.iter()).enumerate() {
            let diff = (est - ex).abs();
            let se = self.stderr.as_slice()[i];
            let z = if se > 0.0 {
                diff / se
            } else if diff <= 1e-12 * (1.0 + ex.abs()) {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(z);
        }
        worst
    }
}

/// `D_hat = (1/N) sum m_i m_i^t` over every increment of every path, in
/// replica order. Standard errors come from `BATCHES` contiguous batches of
/// the concatenated increment stream.
pub fn diffusion_empirical(paths: &[SamplePath], mk: &MartingaleKernel) -> Result<EmpiricalDiffusion> {
    let steps: usize = paths.iter().map(SamplePath::len).sum();
    if steps == 0 {
        return Err(Error::DegenerateEnsemble("no increments".into()));
    }
    if steps < MIN_STEPS {
        return Err(Error::InvalidArgument(format!(
            "empirical diffusion needs at least {MIN_STEPS} increments, got {steps}"
        )));
    }
    let d = mk.dim();
    let batch_len = steps / BATCHES;
    let mut batch_sums = vec![DMatrix::<f64>::zeros(d, d); BATCHES];
    let mut batch_counts = vec![0usize; BATCHES];
    let mut idx = 0usize;
    for path in paths {
        for k in 0..path.len() {
            let m = mk.value(path.state(k), path.state(k + 1));
            let b = (idx / batch_len).min(BATCHES - 1);
            let acc = &mut batch_sums[b];
            for i in 0..d {
                for j in 0..d {
                    acc[(i, j)] += m[i] * m[j];
                }
            }
            batch_counts[b] += 1;
            idx += 1;
        }
    }
    let total: DMatrix<f64> = batch_sums.iter().fold(DMatrix::zeros(d, d), |a, b| a + b);
    let mean = total / steps as f64;
    let means: Vec<DMatrix<f64>> =
        batch_sums.iter().zip(&batch_counts).map(|(s, &c)| s / c as f64).collect();
    let grand = means.iter().fold(DMatrix::zeros(d, d), |a, b| a + b) / BATCHES as f64;
    let mut stderr = DMatrix::zeros(d, d);
    for m in &means {
        let dev = m - &grand;
        stderr += dev.component_mul(&dev);
    }
    let stderr = (stderr / ((BATCHES - 1) * BATCHES) as f64).map(f64::sqrt);
    Ok(EmpiricalDiffusion {
        estimate: DiffusionMatrix::from_matrix(mean),
        stderr,
        steps,
        batches: BATCHES,
    })
}
