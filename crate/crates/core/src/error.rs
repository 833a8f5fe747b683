use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    /// `β_P*ᵀ Σ_Q β_P* = 0`, so `μ` is undefined.
    #[error("degenerate shift: restricted ground-truth energy under Σ_Q is zero")]
    DegenerateShift,
    #[error("target κ/γ = {target} is outside the reachable range [{low}, {high}]")]
    UnreachableRatio { target: f64, low: f64, high: f64 },
    #[error("non-finite numeric input: {0}")]
    NumericInput(String),
    /// A decision function has zero variance, so its correlation is undefined.
    #[error("degenerate decision function: E[Z*²]·E[Ẑ²] = 0")]
    DegenerateDecision,
    #[error("covariance is not positive semidefinite: {0}")]
    Covariance(String),
    #[error("relation inapplicable: {0}")]
    RelationInapplicable(String),
    #[error("argument outside domain: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

macro_rules! invalid_dim {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidDimension(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid_dim;
