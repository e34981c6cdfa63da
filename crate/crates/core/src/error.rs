use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes do not agree.
    Dimension { operand: &'static str, expected: usize, found: usize },
    /// A value is outside the domain of the operation.
    Domain(String),
    /// A non-finite value appeared during a computation.
    Numeric(String),
    /// Unknown or inconsistent configuration.
    Config(String),
    /// A combinatorial search would exceed its size guard.
    Size { requested: u128, limit: u128 },
    /// An iterative solver did not converge.
    Convergence { iterations: usize, last_change: f64 },
    /// Training loss blew up.
    Divergence { epoch: usize, loss: f64 },
    /// An oracle failed on one instance of a batch.
    Oracle { index: usize, source: alloc::boxed::Box<Error> },
}

impl Error {
    pub fn dim(operand: &'static str, expected: usize, found: usize) -> Self {
        Error::Dimension { operand, expected, found }
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn at_index(self, index: usize) -> Self {
        Error::Oracle { index, source: alloc::boxed::Box::new(self) }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension { operand, expected, found } => {
                write!(f, "dimension mismatch in `{operand}`: expected {expected}, found {found}")
            }
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Size { requested, limit } => {
                write!(f, "search size {requested} exceeds guard {limit}")
            }
            Error::Convergence { iterations, last_change } => write!(
                f,
                "no convergence after {iterations} iterations (last change {last_change:e})"
            ),
            Error::Divergence { epoch, loss } => {
                write!(f, "training diverged at epoch {epoch} (loss {loss})")
            }
            Error::Oracle { index, source } => write!(f, "instance {index}: {source}"),
        }
    }
}

impl core::error::Error for Error {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            Error::Oracle { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}
