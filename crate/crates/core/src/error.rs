use thiserror::Error;

/// Errors produced while loading or analysing a system.
#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { name: String, position: usize },

    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error("{path}: {message}")]
    Grid { path: String, message: String },

    #[error("impulses[{index}]: I + C_{k} is not invertible (|det| = {det:e})", k = index + 1)]
    SingularImpulse { index: usize, det: f64 },

    #[error("{field}: not periodic with period {omega} (max deviation {deviation:e})")]
    NotPeriodic {
        field: String,
        omega: f64,
        deviation: f64,
    },

    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("integrator step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("{0}")]
    Unsupported(String),
}

impl Error {
    /// True for errors caused by the input document rather than by numerics.
    pub fn is_input(&self) -> bool {
        matches!(
            self,
            Error::Syntax { .. }
                | Error::UnknownIdentifier { .. }
                | Error::Schema { .. }
                | Error::Grid { .. }
                | Error::SingularImpulse { .. }
                | Error::NotPeriodic { .. }
                | Error::Json(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
