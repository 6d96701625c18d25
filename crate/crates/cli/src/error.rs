use thiserror::Error;

/// Failures surfaced by a command, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error(transparent)]
    Domain(#[from] contractivity::Error),
}

impl CliError {
    /// `1` for usage, IO and malformed input; `2` for a negative outcome.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(e) if is_negative(e) => 2,
            _ => 1,
        }
    }
}

/// Outcomes that describe the mathematics rather than bad input.
pub fn is_negative(e: &contractivity::Error) -> bool {
    use contractivity::Error::*;
    matches!(
        e,
        NotFound(_)
            | InfeasibleAtAllRates
            | ReCheckFailed(_)
            | SlopeBoundViolated(_)
            | DegenerateRate
            | NoConvergence(_)
            | NonFiniteState(_)
            | SingularA
            | SingularP
            | NotPositiveDefinite { .. }
            | AlphaOutOfRange(_)
            | NoRealRoot(_)
            | RankDeficientV(_)
            | DegenerateTraces(_)
            | NumericalFailure(_)
    )
}

pub type CliResult<T> = std::result::Result<T, CliError>;
