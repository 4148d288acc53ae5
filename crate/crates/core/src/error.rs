use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed chain spec: {0}")]
    Malformed(String),

    #[error("non-stochastic row {0}")]
    NonStochasticRow(usize),

    #[error("reducible chain: state '{to}' is not reachable from state '{from}'")]
    Reducible { from: String, to: String },

    #[error("observable is not centered: coordinate {coord} has stationary mean {mean:e}")]
    NotCentered { coord: usize, mean: f64 },

    #[error("numerically singular system: {0}")]
    Singular(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("projection did not converge; distance lies in [{lower}, {upper}]")]
    NonConvergence { lower: f64, upper: f64 },

    #[error("degenerate ensemble: {0}")]
    DegenerateEnsemble(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that mean the chain spec itself is invalid.
    pub fn is_spec_error(&self) -> bool {
        matches!(
            self,
            Error::Malformed(_)
                | Error::NonStochasticRow(_)
                | Error::Reducible { .. }
                | Error::NotCentered { .. }
                | Error::Json(_)
        )
    }
}
