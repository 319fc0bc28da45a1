use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Argument outside the domain of the operation.
    Domain(String),
    /// Integrand returned NaN or infinity at a quadrature node.
    NonFinite { node: usize, x: f64 },
    /// Determinant is not a positive real number to working tolerance.
    Conditioning { re: f64, im: f64 },
    /// Pivot vanished during factorization.
    Singular { pivot: usize },
    /// Truncation window leaves a boundary contribution above tolerance.
    Window { boundary: f64 },
    /// Input samples inconsistent with the requested transform.
    Consistency { index: usize, value: f64 },
    /// Value too close to a singular point of a formula.
    Range { index: usize, value: f64 },
    /// Not enough samples or nodes.
    Insufficient { got: usize, need: usize },
    /// Point placement incompatible with the mesh.
    Placement(String),
    /// Iterative solver did not reach tolerance.
    NoConvergence { iterations: usize, residual: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::NonFinite { node, x } => {
                write!(f, "non-finite integrand at node {node} (x = {x:e})")
            }
            Error::Conditioning { re, im } => {
                write!(f, "determinant not a positive real: {re:e} + {im:e}i")
            }
            Error::Singular { pivot } => write!(f, "matrix singular at pivot {pivot}"),
            Error::Window { boundary } => {
                write!(f, "quadrature window too small: boundary integrand {boundary:e}")
            }
            Error::Consistency { index, value } => {
                write!(f, "inconsistent data at index {index}: {value:e}")
            }
            Error::Range { index, value } => {
                write!(f, "value out of range at index {index}: {value:e}")
            }
            Error::Insufficient { got, need } => {
                write!(f, "insufficient size: got {got}, need at least {need}")
            }
            Error::Placement(m) => write!(f, "placement error: {m}"),
            Error::NoConvergence { iterations, residual } => {
                write!(f, "no convergence after {iterations} iterations (residual {residual:e})")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
