use thiserror::Error;

/// Errors raised anywhere in the kernel.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at column {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("domain error in `{subtree}`: {reason}")]
    Domain { subtree: String, reason: String },

    #[error("singular matrix ({context})")]
    SingularMatrix { context: String },

    #[error("singular Jacobian in chart `{chart}`")]
    SingularJacobian { chart: String },

    #[error("turning point in row {row} at λ = {lambda}: radicand {radicand}")]
    TurningPoint { row: usize, lambda: f64, radicand: f64 },

    #[error("quadrature failed to reach tolerance {tol:e} (estimate {estimate:e})")]
    QuadratureFailure { tol: f64, estimate: f64 },

    #[error("bad partition: {0}")]
    BadPartition(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid system: {0}")]
    Validation(String),

    #[error("not a quadratic-in-momenta system: {0}")]
    NotQuadratic(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn singular(context: impl Into<String>) -> Self {
        Error::SingularMatrix {
            context: context.into(),
        }
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    /// True for errors caused by the numerical domain (poles, branch cuts,
    /// singular solves) rather than by malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. }
                | Error::SingularMatrix { .. }
                | Error::SingularJacobian { .. }
                | Error::TurningPoint { .. }
                | Error::QuadratureFailure { .. }
                | Error::Sampling(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
