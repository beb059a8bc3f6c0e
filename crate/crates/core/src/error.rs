use thiserror::Error;

pub(crate) const NON_FINITE: &str = "non-finite result";

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at offset {position}: expected one of {}", expected.join(", "))]
    Syntax {
        position: usize,
        expected: Vec<String>,
    },

    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),

    /// Evaluation left the domain of a subexpression (log of a non-positive
    /// value, division by zero, a pole of coth, or a non-finite result).
    #[error("domain error at r = {r}: {reason} in `{subexpr}`")]
    Domain {
        r: f64,
        subexpr: String,
        reason: String,
    },

    #[error("quadrature did not converge after {intervals} subintervals (worst [{a}, {b}])")]
    Quadrature { intervals: usize, a: f64, b: f64 },

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid constellation: {0}")]
    InvalidConstellation(String),

    #[error("invalid warping function: {0}")]
    InvalidWarping(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(r: f64, subexpr: impl ToString, reason: impl Into<String>) -> Self {
        Error::Domain {
            r,
            subexpr: subexpr.to_string(),
            reason: reason.into(),
        }
    }

    /// True when an evaluation overflowed rather than left its domain.
    pub fn is_non_finite(&self) -> bool {
        matches!(self, Error::Domain { reason, .. } if reason == NON_FINITE)
    }

    /// True for failures of the numerics (as opposed to malformed input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. } | Error::Quadrature { .. } | Error::Overflow(_)
        )
    }
}
