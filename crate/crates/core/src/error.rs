use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),

    #[error("input error at {pointer}: {message}")]
    InputAt { pointer: String, message: String },

    #[error("singular matrix ({what}); condition estimate {condition:.3e}")]
    Singular { what: String, condition: f64 },

    #[error("not positive definite ({what}); min eigenvalue {min_eig:.3e}")]
    NotPositive { what: String, min_eig: f64 },

    #[error("model error: {0}")]
    Model(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("cone condition lost at t = {t:.6}, grid point {point}, q_min = {q_min:.3e}")]
    ConeExit { t: f64, point: usize, q_min: f64 },

    #[error("solver stagnated at t = {t:.6}: {reason}")]
    Stagnation { t: f64, reason: String },

    #[error("gluing refused: {count} boundary points violate domination (first at {first})")]
    Domination { count: usize, first: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
