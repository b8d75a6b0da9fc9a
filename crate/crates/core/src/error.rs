use thiserror::Error;

use crate::graph::NodeId;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{}edge weight must be finite and > 0, got {weight}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    InvalidWeight { line: Option<usize>, weight: f64 },
    #[error("node {0} out of range")]
    NodeOutOfRange(u64),
    #[error("graph has too many nodes ({0})")]
    TooManyNodes(usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, PartialEq)]
pub enum BuildError {
    #[error("node {0} does not survive pruning and has no PSPT")]
    NotSurviving(NodeId),
    #[error("PSPT size must be at least 1")]
    ZeroBeta,
    #[error("alpha must be finite and > 0, got {0}")]
    InvalidAlpha(f64),
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("truncated stream")]
    Truncated,
    #[error("checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("index is partial ({present} of {expected} blocks) and cannot be serialized")]
    Incomplete { present: usize, expected: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum QueryError {
    #[error("unknown node id {0}")]
    UnknownId(u64),
    #[error("index has no PSPT block for node {0}")]
    MissingBlock(u64),
    #[error("node {0} is not a member of the block")]
    NotAMember(NodeId),
    #[error("node {0} has degree <= 1 and no PSPT of its own")]
    NotSurviving(u64),
    #[error("index and graph disagree: {0}")]
    Mismatch(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum BatchError {
    #[error("empty query set")]
    EmptyQuery,
    #[error("machine count must be at least 1")]
    NoMachines,
    #[error("key {key} received {fan_in} values, above the cap of {cap}")]
    FanInOverflow { key: u64, fan_in: usize, cap: usize },
    #[error(transparent)]
    Query(#[from] QueryError),
}

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("all-pairs oracle limited to {max} nodes, graph has {n}")]
    TooLarge { n: usize, max: usize },
}
