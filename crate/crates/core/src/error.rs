use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The two levels of a k-mode coincide, so the eigenbasis is undefined.
    #[error("degenerate k-mode Hamiltonian at k = {k}, t = {t}")]
    Degenerate { k: f64, t: f64 },

    #[error("integration failed at k = {k}, t = {t}: {reason}")]
    Integration { k: f64, t: f64, reason: String },

    /// A density-matrix invariant (trace, positivity, purity decay) broke down.
    #[error("invariant violated at k = {k}, t = {t}: {reason}")]
    Invariant { k: f64, t: f64, reason: String },

    #[error("fit error: {0}")]
    Fit(String),

    /// The minimum of n_W(τ) sits on the edge of the τ grid.
    #[error("minimum at grid boundary (index {index} of {len}); widen the τ window")]
    BoundaryMinimum { index: usize, len: usize },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Attach a momentum to errors raised before the mode was known.
    pub(crate) fn at_k(self, k: f64) -> Self {
        match self {
            Error::Integration { t, reason, .. } => Error::Integration { k, t, reason },
            Error::Invariant { t, reason, .. } => Error::Invariant { k, t, reason },
            Error::Degenerate { t, .. } => Error::Degenerate { k, t },
            other => other,
        }
    }
}
