use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid run configuration or problem setup. `path` names the
    /// offending config field (or parameter) when known.
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("slice {slice}: no convergence after {iterations} iterations (last increment {increment:.3e})")]
    Convergence {
        slice: usize,
        iterations: usize,
        increment: f64,
    },

    /// A caller broke an operation's precondition (e.g. asked for the
    /// terminal payoff of an interior state).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("trajectory {trajectory}: strategy proposed a move of length {distance:.6e} > eps = {eps:.6e}")]
    StrategyContract {
        trajectory: usize,
        distance: f64,
        eps: f64,
    },

    #[error("trajectory {trajectory}: step cap {cap} exceeded")]
    Runaway { trajectory: usize, cap: u64 },

    #[error("point {point:?} at t = {time} is outside the solved field")]
    Coverage { point: Vec<f64>, time: f64 },

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Numeric(_) => 3,
            Error::Convergence { .. } => 4,
            Error::Format { .. } | Error::Io { .. } => 5,
            Error::Contract(_)
            | Error::StrategyContract { .. }
            | Error::Runaway { .. }
            | Error::Coverage { .. } => 6,
        }
    }
}
