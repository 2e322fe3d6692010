use crate::lattice::{FieldKind, Instant};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    Lattice(String),
    #[error("TERMINAL has no instant sigma-field")]
    TerminalField,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{what} is not {kind}-measurable at {at}")]
    NotMeasurable {
        what: String,
        kind: FieldKind,
        at: Instant,
    },
    #[error("{what} is not a {kind} stopping time")]
    NotStoppingTime { what: String, kind: FieldKind },
    #[error("slice at {0} is not a Lambda-set")]
    NotLambdaSet(Instant),
    #[error("{what} is negative at path {path}, {at}")]
    Negative {
        what: String,
        path: usize,
        at: Instant,
    },
    #[error("{0} must have terminal value 0")]
    NonzeroTerminal(String),
    #[error("enumeration exceeds the limit of {limit} stopping times (count {count})")]
    TooLarge { count: u128, limit: u128 },
    #[error("invalid divided stopping time: {0}")]
    Divided(String),
    #[error("lambda must lie in (0,1), got {0}")]
    LambdaRange(String),
    #[error("not a Lambda-supermartingale at path {path}, {at}")]
    NotSupermartingale { path: usize, at: Instant },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("X not representable with this (g, mu): {0}")]
    NotRepresentable(String),
    #[error("root equation has zero total weight")]
    ZeroWeight,
    #[error("{0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
