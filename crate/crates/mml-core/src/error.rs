use alloc::string::String;
use core::fmt;

/// Errors produced by the core kernels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MmlError {
    /// A precondition on an argument was violated (shape mismatch, out-of-range
    /// neighbour count, insufficient classes or images, ...). The message names
    /// the offending quantity.
    InvalidArgument(String),
    /// A computation left its numerical domain: a covariance that is not
    /// positive definite, or an eigensolver that failed to converge. The
    /// message tells the caller how to recover (usually: raise shrinkage).
    NumericalDomain(String),
}

impl fmt::Display for MmlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MmlError::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            MmlError::NumericalDomain(msg) => write!(f, "numerical domain error: {msg}"),
        }
    }
}

#[cfg(any(test, feature = "std"))]
impl std::error::Error for MmlError {}

pub type Result<T> = core::result::Result<T, MmlError>;

macro_rules! invalid_arg {
    ($($arg:tt)*) => {
        $crate::MmlError::InvalidArgument(alloc::format!($($arg)*))
    };
}

macro_rules! numerical {
    ($($arg:tt)*) => {
        $crate::MmlError::NumericalDomain(alloc::format!($($arg)*))
    };
}

pub(crate) use {invalid_arg, numerical};
