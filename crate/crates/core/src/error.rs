use alloc::string::String;
use core::fmt;

/// Errors raised by the histogram core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A point or rectangle falls outside the domain.
    DomainViolation(String),
    /// A region has zero volume where a positive one is required.
    DegenerateRegion(String),
    /// Two inputs disagree on domain, dimension, or grid.
    Configuration(String),
    /// A structural precondition failed (non-dyadic rectangle, off-grid vertex, ...).
    Structure(String),
    /// An argument is out of range.
    Argument(String),
    /// The operation is not defined for this domain kind.
    UnsupportedDomain(String),
    /// A brute-force enumeration exceeded its guard.
    OracleTooLarge { what: &'static str, limit: u64, needed: u64 },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DomainViolation(msg) => write!(f, "domain violation: {msg}"),
            Error::DegenerateRegion(msg) => write!(f, "degenerate region: {msg}"),
            Error::Configuration(msg) => write!(f, "configuration error: {msg}"),
            Error::Structure(msg) => write!(f, "structure error: {msg}"),
            Error::Argument(msg) => write!(f, "invalid argument: {msg}"),
            Error::UnsupportedDomain(msg) => write!(f, "unsupported domain: {msg}"),
            Error::OracleTooLarge { what, limit, needed } => {
                write!(f, "oracle guard exceeded: {what} needs {needed} > limit {limit}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$variant(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
