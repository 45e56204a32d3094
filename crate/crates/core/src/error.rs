use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("non-conforming mesh: {0}")]
    NonConforming(String),
    #[error("degenerate cell {cell}: signed area {area:e}")]
    DegenerateCell { cell: usize, area: f64 },
    #[error("index out of range: {what} {index} (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },
    #[error("non-finite vertex coordinate at vertex {0}")]
    NonFiniteVertex(usize),
    #[error("quadrature order {configured} too low, need at least {required}")]
    QuadratureOrderTooLow { required: usize, configured: usize },
    #[error("coefficient is not symmetric positive definite at ({x}, {y})")]
    CoefficientNotSpd { x: f64, y: f64 },
    #[error("singular system: zero pivot at row {row}")]
    SingularSystem { row: usize },
    #[error("relative residual {residual:e} exceeds tolerance {tolerance:e}")]
    ToleranceNotMet { residual: f64, tolerance: f64 },
    #[error("time grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("time {t} outside the grid domain [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },
    #[error("not enough history for a difference of order {order} at node {node}")]
    InsufficientHistory { order: usize, node: usize },
    #[error("unsupported Raviart-Thomas index {0}")]
    UnsupportedIndex(usize),
    #[error("missing series: {0}")]
    MissingSeries(String),
    #[error("incompatible spaces: {0}")]
    SpaceMismatch(String),
    #[error("invalid study: {0}")]
    InvalidStudy(String),
}
