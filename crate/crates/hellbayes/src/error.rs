use crate::family::BoundsReport;

/// Errors shared across the crate.
///
/// Configuration mistakes (bad bounds, empty data, malformed settings) are
/// reported as [`Error::InvalidArgument`] or a more specific variant;
/// numerical contract violations detected at run time (negative density
/// values, mass escaping the quadrature range) get their own variants so
/// callers can distinguish "fix the input" from "the computation went bad".
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input slice that must be nonempty was empty.
    #[error("empty data: {0}")]
    EmptyData(&'static str),

    /// A scalar or structural argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A parameter vector fell outside the family's domain.
    #[error("parameter out of bounds: {0}")]
    ParamOutOfBounds(BoundsReport),

    /// A density evaluator returned a negative or non-finite value.
    #[error("density evaluated to {value} at x = {x}; densities must be finite and nonnegative")]
    BadDensityValue { x: f64, value: f64 },

    /// A density restricted to a grid did not integrate close enough to one.
    #[error("density mass {mass} on the grid is outside [{lo}, {hi}]; widen the grid range")]
    MassOutOfRange { mass: f64, lo: f64, hi: f64 },

    /// Two grid-bound quantities were built on different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(&'static str),

    /// Too few posterior draws to summarize.
    #[error("sample pool holds {len} draws; at least {min} are required")]
    PoolTooSmall { len: usize, min: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

/// Rejects non-finite entries; `what` names the offending input in the error.
pub(crate) fn ensure_finite(data: &[f64], what: &str) -> Result<()> {
    for (i, &x) in data.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::invalid(format!("{what}[{i}] = {x} is not finite")));
        }
    }
    Ok(())
}
