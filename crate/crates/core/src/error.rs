use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while reading, validating or generating a navigation graph.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("duplicate node id {0}")]
    DuplicateNode(usize),
    #[error("duplicate edge between {0} and {1}")]
    DuplicateEdge(usize, usize),
    #[error("unknown node id {0}")]
    UnknownNode(usize),
    #[error("unknown exit node id {0}")]
    UnknownExit(usize),
    #[error("graph has no exit node")]
    NoExit,
    #[error("graph has more than one exit node")]
    MultipleExits,
    #[error("node ids are not contiguous: expected {expected} nodes, found {found}")]
    MissingNodes { expected: usize, found: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("edge {a}-{b} has non-positive length {length}")]
    NonPositiveLength { a: usize, b: usize, length: f64 },
    #[error("graph is disconnected: {unreachable} node(s) cannot reach the exit")]
    Disconnected { unreachable: usize },
    #[error("graph must contain at least one node")]
    Empty,
    #[error("infeasible generator parameters: {0}")]
    Infeasible(String),
}

/// Invalid scenario or experiment parameters.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("non-positive deadline: T_S - T_A - T_EL = {0} s")]
    NonPositiveDeadline(f64),
    #[error("{name} must be a probability in [0, 1], got {value}")]
    Probability { name: &'static str, value: f64 },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("worst-case speed {worst} exceeds nominal speed {nominal}")]
    SpeedOrder { worst: f64, nominal: f64 },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: cannot parse value for `{key}`: {value}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("line {line}: expected key=value")]
    Malformed { line: usize },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RingError {
    #[error("table epoch {got} does not follow ring head epoch {head}")]
    EpochGap { head: u64, got: u64 },
    #[error("snapshot ring is empty")]
    Empty,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("ideal evacuation time must be positive, got {0}")]
    NonPositiveIdeal(f64),
    #[error("no samples to aggregate")]
    Empty,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("start node {0} is not in the graph")]
    UnknownStart(usize),
    #[error("simulation exceeded the time cap of {cap} s with {remaining} evacuee(s) still moving")]
    TimeCap { cap: f64, remaining: usize },
}

/// Top-level error for the experiment runner and CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the filesystem rather than by inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
