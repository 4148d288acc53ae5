//! Martingale approximation toolkit for vector-valued additive functionals of
//! finite-state Markov chains.
//!
//! The pipeline runs from a validated transition kernel and a centered
//! observable `g` through the resolvent / Poisson solutions, the martingale
//! kernel `H(x0, x1) = h(x1) - (Qh)(x0)`, the diffusion matrix `E[H H^t]`,
//! fractional-coboundary operators `(I - Q)^alpha`, and finally Monte Carlo
//! checks of the functional law of the iterated logarithm against the
//! Strassen ball `sqrt(tr D) * K`.

pub mod chain;
pub mod coboundary;
pub mod diffusion;
mod error;
pub mod poisson;
pub mod rng;
pub mod stats;
pub mod strassen;

pub use chain::{
    load_chain, simulate, stationary, Chain, ChainSpec, FiniteKernel, Observable, SamplePath,
    StationaryDistribution,
};
pub use coboundary::{
    frac_membership, frac_power_apply, max_increment_stat, remainder_growth, FracApplication,
    FracMembership, FracOperator, RemainderConfig, RemainderDiagnostics, Truncation,
};
pub use diffusion::{diffusion_empirical, diffusion_exact, DiffusionMatrix, EmpiricalDiffusion};
pub use error::{Error, Result};
pub use poisson::{
    decompose_path, h_eps_convergence, martingale_kernel, mw_fit, poisson_limit, solve_resolvent,
    Decomposition, EpsConvergence, MartingaleKernel, MwFit, PoissonSolution, ResolventSolution,
};
pub use strassen::{
    checkpoints, cluster_probe, dist_to_k, energy, envelope_check, lil_run, min_energy_in_tube,
    xi_path, ClusterProbe, KDistance, LilCheckpoint, LilConfig, LilReport, LilVerdict, PathFunction,
    DIST_TOL,
};
