use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("series truncated in {op} after {terms} terms; tail mass {tail:e} exceeds tolerance")]
    Truncation {
        op: &'static str,
        terms: usize,
        tail: f64,
    },

    #[error("quadrature did not converge in {layer}: estimate {estimate:e}, error {error:e}")]
    Quadrature {
        layer: String,
        estimate: f64,
        error: f64,
    },

    #[error("sampler failure in {op}: {detail}")]
    Sampler { op: &'static str, detail: String },
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }

    /// Prefix the failing layer of a quadrature error with an outer context.
    pub fn within(self, outer: &str) -> Self {
        match self {
            Error::Quadrature {
                layer,
                estimate,
                error,
            } => Error::Quadrature {
                layer: format!("{outer} / {layer}"),
                estimate,
                error,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
