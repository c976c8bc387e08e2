use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unstable discretization: {0}")]
    UnstableDiscretization(String),

    #[error("coloring filter of node {node} is not stationary: AR coefficient {coefficient} has magnitude >= 1")]
    NonStationaryFilter { node: usize, coefficient: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("malformed file {}: {detail}", path.display())]
    MalformedFile { path: PathBuf, detail: String },

    #[error("insufficient samples: need at least {required}, have {available}")]
    InsufficientSamples { required: usize, available: usize },

    #[error("solver diverged: {0}")]
    SolverDiverged(String),

    #[error("no filter for ordered pair (target {target}, source {source_node})")]
    UnknownPair { target: usize, source_node: usize },

    #[error("I - H(e^{{iw}}) is numerically singular at w = {omega} (condition number {condition:e})")]
    SingularAtFrequency { omega: f64, condition: f64 },

    #[error("reference edge set is empty")]
    EmptyTruth,

    #[error("graphical lasso did not converge after {sweeps} sweeps")]
    NonConvergence { sweeps: usize },

    #[error("target node {node}: {inner}")]
    AtNode {
        node: usize,
        #[source]
        inner: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
