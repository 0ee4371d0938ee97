use thiserror::Error;

use crate::types::QueryId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,

    #[error("percentile {0} is outside (0, 1]")]
    PercentileRange(String),

    #[error("duplicate query id {0}")]
    DuplicateId(QueryId),

    #[error("unknown query id {0}")]
    UnknownId(QueryId),

    #[error("query {0} is not pending")]
    NotPending(QueryId),

    #[error("schedule is not a permutation of the stream: {0}")]
    NotAPermutation(String),

    #[error("no pending queries")]
    NoPending,

    #[error("radix index is empty")]
    EmptyIndex,

    #[error("id {0} is already indexed")]
    AlreadyIndexed(QueryId),

    #[error("id {0} is not indexed")]
    NotIndexed(QueryId),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A problem instance that violates its defining invariants.
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("instance too large for exact search ({n} queries, limit {limit})")]
    TooLarge { n: usize, limit: usize },

    /// Neither a certificate nor a witness could be produced.
    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("numeric overflow")]
    Overflow,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
