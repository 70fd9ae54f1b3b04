use thiserror::Error;

/// Errors raised by the workbench engines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("quadrature needs at least 2 nodes per slit, got {0}")]
    TooFewNodes(usize),
    #[error("at least {min} realizations required, got {got}")]
    TooFewRealizations { min: usize, got: usize },
    #[error("samples do not bracket a minimum next to the central maximum")]
    InsufficientSpan,
    #[error("degenerate intensity series: {0}")]
    DegenerateSeries(String),
    #[error("event streams cover different durations ({0} ns vs {1} ns)")]
    MismatchedDurations(f64, f64),
    #[error("stream {0} has no events")]
    ZeroRate(String),
    #[error("engine {engine} cannot simulate a {source_kind} source")]
    EngineSourceMismatch {
        engine: &'static str,
        source_kind: &'static str,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
