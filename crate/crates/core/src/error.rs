use thiserror::Error;

/// Errors raised by the library. Diagnostic operations report problems as
/// data instead and never return these.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is empty")]
    EmptyMatrix,

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric: |S[{row},{col}] - S[{col},{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fit window [{start}, {end}] has fewer than 3 points")]
    WindowTooShort { start: usize, end: usize },

    #[error("series value at t = {index} is not strictly positive ({value:e})")]
    NonPositive { index: usize, value: f64 },

    #[error("graph must have at least one node")]
    EmptyGraph,

    #[error("edge ({0}, {1}) references a node outside [0, {2})")]
    NodeOutOfRange(usize, usize, usize),

    #[error("self-pair ({0}, {0}) given but self-loops are disabled")]
    UnexpectedSelfPair(usize),

    #[error("node {0} has no neighbours")]
    IsolatedNode(usize),

    #[error("{spec} with seed {seed}: no connected sample after {attempts} attempts")]
    ResampleBudget { spec: String, seed: u64, attempts: usize },

    #[error("graph violates A1 (connected and non-bipartite, or connected with self-loops): {0}")]
    A1Violated(String),

    #[error("nonlinearity violates A4 at entry ({row}, {col}): x = {x:e}, sigma(x)/x = {ratio:e}")]
    A4Violated { row: usize, col: usize, x: f64, ratio: f64 },

    #[error("state overflow at layer {layer}: max |X| = {value:e}")]
    Overflow { layer: usize, value: f64 },

    #[error("epsilon {eps} exceeds 1/d_max = {bound}")]
    EpsilonTooLarge { eps: f64, bound: f64 },

    #[error("computation budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("failed to converge: {0}")]
    NoConvergence(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("seed {seed}: {inner}")]
    Seeded { seed: u64, inner: Box<Error> },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
