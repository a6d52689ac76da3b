use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("operation supports 2D grids only (got dim={0})")]
    UnsupportedDim(usize),

    #[error("ghost-fluid factor requested for a non-liquid cell (phi_liquid = {0})")]
    NotLiquid(f64),

    #[error("invalid moving region {index}: {reason}")]
    InvalidRegion { index: usize, reason: String },

    #[error("moving region {index} would leave the valid margin (window shift {shift:?})")]
    RegionOutOfBounds { index: usize, shift: [i64; 2] },

    #[error("element at node {node} is inverted (|J| = {det_j:e})")]
    InvertedElement { node: usize, det_j: f64 },

    #[error("element at node {node} produced a non-finite quadrature value")]
    NonFiniteElement { node: usize },

    #[error("Newton inversion did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("sparse entry ({row}, {col}) out of range for n = {n}")]
    IndexOutOfRange { row: usize, col: usize, n: usize },

    #[error("{solver} did not converge in {iterations} iterations (relative residual {residual:e})")]
    SolverDiverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{solver} broke down at iteration {iteration}")]
    SolverBreakdown { solver: &'static str, iteration: usize },

    #[error("scene config: {0}")]
    Config(String),

    #[error("dump format: {0}")]
    Dump(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
