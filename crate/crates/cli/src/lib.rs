//! Command-line front end: chain validation, static analysis, LIL runs,
//! Strassen-ball distances and fractional powers.
//!
//! Exit codes are 0 on success, 2 for an invalid chain spec or input file,
//! 3 for numerical failures and 4 for bad configuration.

pub mod analyze;
pub mod args;
pub mod error;
pub mod lil;
pub mod output;
pub mod svg;
pub mod tools;

pub use args::{Cli, Command};
pub use error::{CliError, CliResult};

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Validate { spec } => tools::validate(spec),
        Command::Analyze(args) => analyze::run(args),
        Command::Lil(args) => lil::run(args),
        Command::DistK(args) => tools::dist_k(args),
        Command::Frac(args) => tools::frac(args),
    }
}
