use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A time that should sit on a grid node does not.
    #[error("time {time} is not a node of the grid (spacing {dt})")]
    GridAlignment { time: f64, dt: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// The horizontal derivative is one-sided and undefined at the horizon.
    #[error("boundary error: {0}")]
    Boundary(String),

    #[error("non-finite value while evaluating {context} (offset {offset:?})")]
    NonFinite { context: String, offset: Vec<f64> },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("ramp sequence did not converge: trace {trace:?}")]
    RampDivergence { trace: Vec<(u32, f64)> },

    #[error("solution blew up at node {node}")]
    BlowUp { node: usize },

    #[error("path {path}: {source}")]
    Ensemble {
        path: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
