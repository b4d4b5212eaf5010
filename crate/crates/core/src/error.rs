use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("angle {theta} rad outside the allowed range [-{theta_max}, {theta_max}]")]
    Domain { theta: f64, theta_max: f64 },

    #[error("integration error: {0}")]
    Integration(String),

    #[error("numerical failure at t = {t} s (theta = {theta}, omega = {omega}): {reason}")]
    Numerical {
        t: f64,
        theta: f64,
        omega: f64,
        reason: String,
    },

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("no pull-in below the {cap} V search cap")]
    NoPullIn { cap: f64 },

    #[error("experiment failed: {0}")]
    Experiment(String),

    #[error("quadrature did not converge on [{a}, {b}] (estimate {estimate}, error {error})")]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        error: f64,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Schedule(_) | Error::Io { .. } => 1,
            Error::Domain { .. }
            | Error::Integration(_)
            | Error::Numerical { .. }
            | Error::NoPullIn { .. }
            | Error::Quadrature { .. } => 2,
            Error::Experiment(_) => 3,
        }
    }
}
