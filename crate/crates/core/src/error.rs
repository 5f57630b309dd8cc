use thiserror::Error;

/// Errors raised by the numerical routines and the command surface.
#[derive(Debug, Error)]
pub enum Error {
    /// Parameters outside the admissible region.
    #[error("domain error: {0}")]
    Domain(String),

    /// Evaluation at a point where a potential or a coordinate map is singular.
    #[error("singularity: {0}")]
    Singularity(String),

    /// A numerical procedure could not reach the requested accuracy.
    #[error("accuracy error: {message} (best estimate {best_estimate:e})")]
    Accuracy { message: String, best_estimate: f64 },

    /// Step-size underflow, step budget exhaustion or a refused approach.
    #[error("integration failed at tau = {tau}: {message}")]
    Integration { tau: f64, message: String },

    /// The centre lies on or outside the turning-point ellipse.
    #[error("placement error: {0}")]
    Placement(String),

    /// The centre is too close to a primary-colliding configuration.
    #[error("unsafe centre: {0}")]
    UnsafeCentre(String),

    /// No bracket exists for the requested energy.
    #[error("range error: {0}")]
    Range(String),

    /// A combinatorial construction has no valid continuation.
    #[error("structural error: {0}")]
    Structural(String),

    /// Inputs rejected by an operation's preconditions.
    #[error("refused: {0}")]
    Refused(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn singular(msg: impl Into<String>) -> Self {
        Error::Singularity(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Placement(_) | Error::Range(_) | Error::Config(_) => 2,
            Error::UnsafeCentre(_) => 3,
            Error::Singularity(_)
            | Error::Accuracy { .. }
            | Error::Integration { .. }
            | Error::Structural(_)
            | Error::Refused(_) => 4,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => 1,
        }
    }
}
