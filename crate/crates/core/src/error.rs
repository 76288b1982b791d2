use std::io;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch for {param}: expected {expected} bits, got {actual}")]
    LengthMismatch {
        param: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("counter overflow")]
    CounterOverflow,

    #[error("k-time signing key exhausted")]
    KTimeExhausted,

    #[error("precomputed nonce pool exhausted")]
    PoolExhausted,

    #[error("reader already has an open session")]
    SessionOpen,

    #[error("no open session")]
    NoOpenSession,

    #[error("tag lifetime of {0} sessions exceeded")]
    LifetimeExceeded(u64),

    #[error("unknown tag index {0}")]
    UnknownTag(usize),

    #[error("unknown snapshot {0}")]
    UnknownSnapshot(usize),

    #[error("oracle budget exceeded for {0}")]
    BudgetExceeded(&'static str),

    #[error("oracle {0} is not available in this stage")]
    OracleUnavailable(&'static str),

    #[error("invalid challenge tag {0}")]
    InvalidChallenge(usize),

    #[error("unknown adversary {0:?}")]
    UnknownAdversary(String),

    #[error("malformed encoding: {0}")]
    Malformed(String),

    #[error("unknown frame type 0x{0:02x}")]
    UnknownFrameType(u8),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
