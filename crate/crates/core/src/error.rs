use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("no terminal pair: {0}")]
    NoTerminals(String),

    #[error("network too large for exhaustive enumeration: {edges} edges (limit {limit})")]
    TooLarge { edges: usize, limit: usize },

    #[error("network is not series-parallel; vertex {blocking_vertex} cannot be reduced")]
    NotSeriesParallel { blocking_vertex: usize },

    #[error("star-mesh solve failed at vertex {vertex} (degree {degree}): residual {residual:.3e} after {iterations} iterations; eliminated so far: {eliminated:?}")]
    StarMeshFailed {
        vertex: usize,
        degree: usize,
        residual: f64,
        iterations: usize,
        eliminated: Vec<usize>,
    },

    #[error("nonlinear solve failed: residual {residual:.3e} after {iterations} iterations")]
    SolverFailed { residual: f64, iterations: usize },

    #[error("no sign change in [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("path enumeration cap of {cap} reached for pair ({source_node}, {target_node})")]
    EnumerationCap {
        cap: u64,
        source_node: usize,
        target_node: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of an iterative numerical method, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StarMeshFailed { .. }
                | Error::SolverFailed { .. }
                | Error::NoBracket { .. }
                | Error::InsufficientData(_)
                | Error::EnumerationCap { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
