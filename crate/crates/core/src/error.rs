use thiserror::Error;

/// Failures while reading a table document.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("malformed table document: {0}")]
    Malformed(String),
    #[error("negative count {value} at cell {cell}")]
    NegativeCount { cell: usize, value: i64 },
    #[error("dims {dims:?} imply {expected} cells but {found} counts were given")]
    CellCountMismatch {
        dims: Vec<usize>,
        expected: usize,
        found: usize,
    },
    #[error("axis {axis} has {categories} categories; at least 2 are required")]
    DegenerateAxis { axis: usize, categories: usize },
    #[error("table has zero total count")]
    EmptyTable,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("operation requires a square two-way table, got dims {0:?}")]
    NotSquare(Vec<usize>),
    #[error("index {index} out of range for {len} categories")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("parameter point lies on the boundary of the parameter space")]
    BoundaryPoint,
    #[error("log-likelihood is not finite at the starting point")]
    NonFiniteLikelihood,
    #[error("line search failed after {0} bisections")]
    LineSearchFailed(usize),
    #[error("point ({alpha11}, {beta11}) lies outside the domain of the surface")]
    OutOfDomain { alpha11: f64, beta11: f64 },
    #[error("infeasible pinned coordinates: {0}")]
    InfeasiblePins(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("matrix does not admit the requested decomposition: {0}")]
    Decomposition(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit status for the command-line tool: 2 for malformed input
    /// or arguments, 3 for numerical failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_)
            | Error::ShapeMismatch(_)
            | Error::NotSquare(_)
            | Error::IndexOutOfRange { .. }
            | Error::InvalidPermutation(_)
            | Error::OutOfDomain { .. }
            | Error::InfeasiblePins(_)
            | Error::InvalidArgument(_)
            | Error::Json(_)
            | Error::Csv(_) => 2,
            Error::BoundaryPoint
            | Error::NonFiniteLikelihood
            | Error::LineSearchFailed(_)
            | Error::Decomposition(_) => 3,
            Error::Io(_) => 1,
        }
    }
}
