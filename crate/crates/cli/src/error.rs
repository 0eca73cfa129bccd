use std::fmt;

/// Failures mapped to process exit codes: usage and configuration problems
/// exit with 2, numerical and sampling failures with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<rpareto::Error> for CliError {
    fn from(e: rpareto::Error) -> Self {
        use rpareto::Error as E;
        match e {
            E::InvalidInput(_) | E::DimensionMismatch { .. } => CliError::Usage(e.to_string()),
            E::Numerical(_) | E::NotPositiveDefinite { .. } | E::NonConvergence { .. } | E::Sampling(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Usage(format!("csv error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(format!("json error: {e}"))
    }
}
