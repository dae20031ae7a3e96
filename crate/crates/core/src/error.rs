use thiserror::Error;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("particle index ({i}, {j}) out of range for N = {n}")]
    IndexOutOfRange { i: usize, j: usize, n: usize },

    #[error("communication kernel contract violated: {0}")]
    KernelContract(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("numerical divergence at t = {t}: particle {particle} has a non-finite component")]
    Divergence { t: f64, particle: usize },

    #[error("reference oracle did not converge within {steps} steps (last sup-norm gap {gap:e})")]
    OracleBudget { steps: usize, gap: f64 },

    #[error("quadrature did not converge on [{a}, {b}]")]
    Quadrature { a: f64, b: f64 },

    #[error("audit not applicable: {0}")]
    NotApplicable(String),

    #[error("undefined quantity: {0}")]
    Undefined(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("no decay rate available: {0}")]
    NoRate(String),

    #[error("scenario invalid at `{path}`: {message}")]
    Scenario { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn scenario(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Scenario {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by the numerical flow blowing up rather than by bad input.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Divergence { .. })
    }
}
