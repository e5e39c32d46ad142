use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no admissible 2-shock: {0}")]
    NoAdmissibleShock(String),

    #[error("inadmissible connection: Lax margins ({plus:.3e}, {minus:.3e})")]
    Inadmissible { plus: f64, minus: f64 },

    #[error("internal consistency failure: {0}")]
    Internal(String),

    #[error("profile integration failed at xi = {xi:.6e}, u = {u:.16e}: {reason}")]
    Integration { xi: f64, u: f64, reason: String },

    #[error("tail verification failed: {0}")]
    TailFit(String),

    #[error("density {value:.6e} below floor at t = {t:.6e}, cell {cell} (x = {x:.6e})")]
    Positivity {
        t: f64,
        cell: usize,
        x: f64,
        value: f64,
        dump: Option<PathBuf>,
    },

    #[error("shock left the domain at t = {t:.6e}: position {position:.6e} > {limit:.6e}")]
    ShockExit { t: f64, position: f64, limit: f64 },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// The part of the pipeline that raised the error.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Domain(_) | Error::NoAdmissibleShock(_) | Error::Inadmissible { .. } => "hugoniot",
            Error::Internal(_) => "internal",
            Error::Integration { .. } | Error::TailFit(_) => "profile",
            Error::Positivity { .. } | Error::ShockExit { .. } => "solver",
            Error::Config { .. } => "config",
            Error::Io { .. } | Error::Csv(_) | Error::Json(_) => "output",
        }
    }

    /// Process exit code for the CLI: 2 for configuration problems, 3 for
    /// everything that aborts a run.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            _ => 3,
        }
    }
}
