use thiserror::Error;

use crate::fit::FitResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad or missing physical data, unknown labels.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("constants file line {line}: {message}")]
    ConstantsParse { line: usize, message: String },

    /// A temperature outside the vapor-pressure model's validity interval.
    #[error("temperature {temperature} K outside vapor-pressure validity range [{min}, {max}] K")]
    OutOfRange { temperature: f64, min: f64, max: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate Voigt profile: Gaussian and Lorentzian widths are both zero")]
    DegenerateProfile,

    #[error("expected a {expected} trace, got {found}")]
    WrongKind { expected: &'static str, found: &'static str },

    #[error(
        "quadrature did not converge: estimate {estimate:.6e}, error {error:.3e} after {evaluations} evaluations"
    )]
    Quadrature {
        estimate: f64,
        error: f64,
        evaluations: usize,
    },

    #[error("model parameters are not identifiable from the data: {0}")]
    Unidentifiable(String),

    #[error("fit did not converge after {} iterations (residual norm {:.6e})", .best.n_iterations, .best.residual_norm)]
    NotConverged { best: Box<FitResult> },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("malformed trace data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
