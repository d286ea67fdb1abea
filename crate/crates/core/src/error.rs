//! Error type shared by all core modules.

use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("row {row}: {message}")]
    InvalidRow { row: usize, message: String },
    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("Likert response {value} outside 1..=5")]
    LikertOutOfRange { value: i64 },
    #[error("bin edges must be non-empty and strictly ascending")]
    InvalidBinEdges,
    #[error("no available alternative")]
    NoAvailableAlternative,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("{latents} latent units exceed the enumeration guard of {guard}")]
    EnumerationGuard { latents: usize, guard: usize },
}
