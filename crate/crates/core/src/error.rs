use alloc::string::String;

/// Errors raised by the engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Two objects that must share a grid (Δt, τ, T, d) do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(&'static str),

    /// An argument lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration or model parameter violates its rule.
    #[error("invalid parameter `{field}`: {rule}")]
    InvalidParameter { field: &'static str, rule: String },

    /// The neutral-term fixed point did not settle.
    #[error("fixed-point iteration did not converge after {iterations} iterations (last change {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    /// NaN or infinity produced by a coefficient or integrator stage.
    #[error("non-finite value produced by {0}")]
    Numeric(&'static str),

    /// The exact assignment solver was asked for more points than its cap.
    #[error("assignment size {n} exceeds the exact-solver cap {cap}; use the entropic solver")]
    SizeCap { n: usize, cap: usize },

    /// A sampling-based estimate had no usable samples.
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// A declared regularity constant is falsified by the checkers.
    #[error("assumption {assumption} failed: {detail}")]
    Assumption {
        assumption: &'static str,
        detail: String,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn param(field: &'static str, rule: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            rule: rule.into(),
        }
    }
}
