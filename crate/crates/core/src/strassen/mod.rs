//! Rescaled path functionals, distance to the Strassen ball, and the LIL
//! harness.

mod dist;
mod lil;
mod path;

pub use dist::{dist_to_k, min_energy_in_tube, KDistance, DIST_TOL};
pub use lil::{checkpoints, cluster_probe, lil_run, ClusterProbe, LilCheckpoint, LilConfig, LilReport, LilVerdict};
pub use path::{energy, envelope_check, xi_path, PathFunction};
