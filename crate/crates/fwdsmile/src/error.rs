use core::fmt;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A model parameter failed validation at construction.
    InvalidParam { name: &'static str, value: f64 },
    /// An input lies outside the mathematical domain of the operation.
    Domain(&'static str),
    /// The requested expansion is excluded by the degeneracy
    /// `v = theta * Upsilon(a)` at the strike `V'(a)`.
    Degenerate(&'static str),
    /// An iterative scheme (quadrature, root bracketing) failed to converge
    /// to the requested tolerance.
    Convergence(&'static str),
    /// An internal invariant was violated; indicates a bug or an unsupported
    /// parameter corner.
    Internal(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParam { name, value } => {
                write!(f, "invalid parameter {name} = {value}")
            }
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Degenerate(msg) => write!(f, "degenerate configuration: {msg}"),
            Error::Convergence(msg) => write!(f, "convergence failure: {msg}"),
            Error::Internal(msg) => write!(f, "internal error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
