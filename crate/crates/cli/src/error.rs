use std::fmt;

/// Exit codes shared by every subcommand.
pub const EXIT_OK: u8 = 0;
pub const EXIT_SPEC: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_CONFIG: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }

    pub fn spec(message: impl Into<String>) -> Self {
        Self { code: EXIT_SPEC, message: message.into() }
    }

    /// Errors raised while reading user-supplied input count as invalid input
    /// rather than bad configuration.
    pub fn input(err: mwlil::Error) -> Self {
        match err {
            mwlil::Error::InvalidArgument(msg) => Self::spec(msg),
            mwlil::Error::Csv(e) => Self::spec(e.to_string()),
            other => other.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<mwlil::Error> for CliError {
    fn from(err: mwlil::Error) -> Self {
        use mwlil::Error as E;
        let code = match &err {
            e if e.is_spec_error() => EXIT_SPEC,
            E::Singular(_) | E::NonConvergence { .. } | E::DegenerateEnsemble(_) => EXIT_NUMERIC,
            _ => EXIT_CONFIG,
        };
        let message = match &err {
            E::Malformed(_) => err.to_string(),
            _ if code == EXIT_SPEC => format!("invalid chain spec: {err}"),
            _ => err.to_string(),
        };
        Self { code, message }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        Self::config(err.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        Self::config(err.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        Self::config(err.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
