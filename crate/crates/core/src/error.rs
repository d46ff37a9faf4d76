use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    MalformedLine { line: u64, reason: String },

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("workload has no records")]
    EmptyWorkload,

    #[error("series has no values")]
    EmptySeries,

    #[error("no slice contains any access")]
    NoActivity,

    #[error("slice has no accesses")]
    EmptySlice,

    #[error("invalid synthetic trace spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("tier-1 capacity infeasible: need {required} bytes, have {available}")]
    CapacityInfeasible { required: u64, available: u64 },

    #[error(transparent)]
    Io(#[from] io::Error),
}
