use thiserror::Error;

/// Errors raised by the combinatorial operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("a delta-system needs at least two members, got {0}")]
    DegenerateSize(usize),

    #[error("pairwise intersections disagree")]
    NotDeltaSystem,

    #[error("{what}: {actual} exceeds the exhaustive cap {cap}")]
    CapExceeded {
        what: &'static str,
        actual: usize,
        cap: usize,
    },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("element {element} outside ground set of size {ground_size}")]
    ElementOutOfRange { element: usize, ground_size: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("invalid product instance: {0}")]
    InvalidInstance(String),

    #[error("malformed certificate: {0}")]
    MalformedCertificate(String),

    #[error("witness plan invalid: {0}")]
    PlanInvalid(String),

    #[error("domain clash: {0}")]
    DomainClash(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
