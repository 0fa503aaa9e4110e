use thiserror::Error;

/// Errors raised by mesh construction, assembly, solvers and the experiment driver.
#[derive(Debug, Error)]
pub enum FemError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("triangle {index} is degenerate (signed area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("mesh construction failed: {0}")]
    MeshConstruction(String),

    #[error("entry ({row}, {col}) is out of range for a {nrows}x{ncols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("missing callback: {0}")]
    MissingCallback(&'static str),

    #[error("lookup failed: {0}")]
    Lookup(String),

    #[error("undefined convergence rate for errors ({0:e}, {1:e})")]
    UndefinedRate(f64, f64),

    #[error("zero reference norm for {0}")]
    ZeroNorm(&'static str),

    #[error("unknown example `{0}`")]
    UnknownExample(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FemError>;
