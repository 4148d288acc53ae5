use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mwlil::coboundary::{FRAC_MAX_TERMS, FRAC_TAIL_TOL};
use mwlil::poisson::ALPHA_MARGIN;
use mwlil::DIST_TOL;
use serde::Serialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "mwlil", version, about = "Martingale approximation and LIL diagnostics for finite Markov chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a chain spec against every chain invariant
    Validate {
        /// Chain-spec JSON file
        spec: PathBuf,
    },
    /// Resolvent, Poisson, diffusion, growth and remainder report
    Analyze(AnalyzeArgs),
    /// Monte Carlo law of the iterated logarithm run
    Lil(LilArgs),
    /// Distance of a path read from CSV to the Strassen ball
    DistK(DistKArgs),
    /// Apply (I - Q)^alpha to the observable
    Frac(FracArgs),
}

/// Overridable numerical tolerances.
#[derive(Debug, Clone, Args, Serialize)]
pub struct Tolerances {
    /// Absolute tolerance of the Strassen-ball distance
    #[arg(long = "tol.dist", default_value_t = DIST_TOL)]
    pub dist: f64,
    /// Relative truncation tolerance of the fractional-power series
    #[arg(long = "tol.frac", default_value_t = FRAC_TAIL_TOL)]
    pub frac: f64,
    /// Maximum number of fractional-power series terms
    #[arg(long = "tol.frac-terms", default_value_t = FRAC_MAX_TERMS)]
    pub frac_terms: usize,
    /// Required margin of the growth exponent below 1/2
    #[arg(long = "tol.alpha-margin", default_value_t = ALPHA_MARGIN)]
    pub alpha_margin: f64,
}

impl Tolerances {
    pub fn check(&self) -> CliResult<()> {
        positive("tol.dist", self.dist)?;
        positive("tol.frac", self.frac)?;
        if self.frac_terms == 0 {
            return Err(CliError::config("tol.frac-terms must be at least 1"));
        }
        if !(0.0..0.5).contains(&self.alpha_margin) {
            return Err(CliError::config("tol.alpha-margin must lie in [0, 0.5)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    /// Chain-spec JSON file
    pub spec: PathBuf,
    /// Resolvent parameter for resolvent.csv and decomp.csv
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Decreasing epsilons for the h_eps convergence table
    #[arg(long, value_delimiter = ',', default_value = "1,0.1,0.01,0.001,0.0001,0.00001,0.000001")]
    pub eps_grid: Vec<f64>,
    /// Largest n of the growth fit and the remainder grid
    #[arg(long, default_value_t = 16384)]
    pub n_max: usize,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Paths in the remainder ensemble
    #[arg(long, default_value_t = 200)]
    pub replicas: usize,
    /// Length of the path used for decomp.csv and maxinc.csv
    #[arg(long, default_value_t = 10_000)]
    pub path_len: usize,
    /// Total steps of the empirical diffusion estimate
    #[arg(long, default_value_t = 1_000_000)]
    pub diffusion_steps: usize,
    /// Exponent of (I - Q)^alpha g in fracpower.csv
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Exponent of the fractional-coboundary membership scan
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub tol: Tolerances,
}

impl AnalyzeArgs {
    pub fn check(&self) -> CliResult<()> {
        self.tol.check()?;
        positive("eps", self.eps)?;
        if self.eps_grid.is_empty() || self.eps_grid.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(CliError::config("eps-grid must hold positive values"));
        }
        if self.eps_grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(CliError::config("eps-grid must be strictly decreasing"));
        }
        if self.n_max < 64 {
            return Err(CliError::config(format!("n-max must be at least 64, got {}", self.n_max)));
        }
        if self.replicas < 100 {
            return Err(CliError::config(format!("replicas must be at least 100, got {}", self.replicas)));
        }
        if self.path_len < 16 {
            return Err(CliError::config(format!("path-len must be at least 16, got {}", self.path_len)));
        }
        if self.diffusion_steps < mwlil::diffusion::MIN_STEPS {
            return Err(CliError::config(format!(
                "diffusion-steps must be at least {}, got {}",
                mwlil::diffusion::MIN_STEPS,
                self.diffusion_steps
            )));
        }
        unit_interval("alpha", self.alpha, true)?;
        unit_interval("beta", self.beta, false)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LilArgs {
    /// Chain-spec JSON file
    pub spec: PathBuf,
    #[arg(long, default_value_t = 10_000_000)]
    pub n_max: usize,
    /// Geometric checkpoint ratio
    #[arg(long, default_value_t = 1.05)]
    pub rho: f64,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Independent runs on streams (seed, 0..replicas)
    #[arg(long, default_value_t = 1)]
    pub replicas: usize,
    /// Subtract the conditional mean E_{X0} S_n
    #[arg(long)]
    pub centered: bool,
    /// Checkpoints below this n are left out of the running maximum
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    /// Intervals of the snapshot grid
    #[arg(long, default_value_t = 1024)]
    pub grid: usize,
    /// Also write paths.svg
    #[arg(long)]
    pub svg: bool,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub tol: Tolerances,
}

impl LilArgs {
    pub fn check(&self) -> CliResult<()> {
        self.tol.check()?;
        if self.n_max < 1000 {
            return Err(CliError::config(format!("n-max must be at least 1000, got {}", self.n_max)));
        }
        if !(self.rho > 1.0 && self.rho.is_finite()) {
            return Err(CliError::config(format!("rho must exceed 1, got {}", self.rho)));
        }
        if self.replicas == 0 {
            return Err(CliError::config("replicas must be at least 1"));
        }
        if self.grid == 0 {
            return Err(CliError::config("grid must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DistKArgs {
    /// CSV file with columns t,f_1..f_d
    pub path: PathBuf,
    /// Trace of the diffusion matrix; the ball has radius sqrt(trace)
    #[arg(long)]
    pub trace: f64,
    #[command(flatten)]
    pub tol: Tolerances,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FracArgs {
    /// Chain-spec JSON file
    pub spec: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Fixed number of series terms instead of the automatic rule
    #[arg(long)]
    pub terms: Option<usize>,
    /// Exponent of the membership scan
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// Largest n of the membership scan
    #[arg(long, default_value_t = 4096)]
    pub n_max: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub tol: Tolerances,
}

impl FracArgs {
    pub fn check(&self) -> CliResult<()> {
        self.tol.check()?;
        unit_interval("alpha", self.alpha, true)?;
        unit_interval("beta", self.beta, false)?;
        if self.terms == Some(0) {
            return Err(CliError::config("terms must be at least 1"));
        }
        if self.n_max < 4 {
            return Err(CliError::config("n-max must be at least 4"));
        }
        Ok(())
    }
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(format!("{name} must be positive, got {v}")))
    }
}

fn unit_interval(name: &str, v: f64, closed: bool) -> CliResult<()> {
    let ok = v > 0.0 && (v < 1.0 || (closed && v == 1.0));
    if ok {
        Ok(())
    } else {
        let range = if closed { "(0, 1]" } else { "(0, 1)" };
        Err(CliError::config(format!("{name} must lie in {range}, got {v}")))
    }
}
