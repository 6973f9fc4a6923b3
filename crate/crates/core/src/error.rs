use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{what} is outside the domain: {reason}")]
    Domain { what: &'static str, reason: String },

    #[error("unknown {registry} kind `{kind}` (known: {known})")]
    UnknownKind {
        registry: &'static str,
        kind: String,
        known: String,
    },

    #[error("malformed descriptor for `{kind}`: {reason}")]
    Descriptor { kind: String, reason: String },

    #[error("fixed-point iteration did not converge at t = {t} after {iterations} iterations (last change {change:e}); try a smaller dt")]
    FixedPoint {
        t: f64,
        iterations: usize,
        change: f64,
    },

    #[error("root finding failed: {0}")]
    Root(String),

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error("dominating rate violated at t = {t}: intensity {intensity} > bound {bound}")]
    Dominance { t: f64, intensity: f64, bound: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
