use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A polygon has fewer vertices than the scheme's stencils need.
    TooFewPoints { required: usize, got: usize },
    /// The region enclosed by the snake is empty, inverted, or not smaller
    /// than the bounding box.
    DegenerateRegion { area: f64 },
    /// A table or polygon was paired with a different subdivision scheme.
    SchemeMismatch,
    InvalidInput(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::TooFewPoints { required, got } => {
                write!(f, "polygon needs at least {required} points, got {got}")
            }
            Error::DegenerateRegion { area } => {
                write!(f, "degenerate snake region (area {area})")
            }
            Error::SchemeMismatch => f.write_str("subdivision scheme mismatch"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
