use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("curvature magnitude must be positive and finite, got {0}")]
    InvalidCurvature(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("curvature mismatch: {0} vs {1}")]
    CurvatureMismatch(f64, f64),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("point is off the hyperboloid (residual {0:e})")]
    OffManifold(f64),
    #[error("point lies on the lower sheet (time component {0})")]
    LowerSheet(f64),
    #[error("vector is not tangent to its base point (residual {0:e})")]
    NotTangent(f64),
    #[error("vector is timelike (squared Minkowski norm {0:e})")]
    Timelike(f64),
    #[error("vector is not spacelike (squared Minkowski norm {0:e})")]
    NotSpacelike(f64),
    #[error("weight row {row} has degenerate norm {norm:e}")]
    DegenerateWeight { row: usize, norm: f64 },
    #[error("cache row {0} has a zero spatial part")]
    ZeroSpatialPart(usize),
    #[error("empty batch in training mode")]
    EmptyBatch,
    #[error("no forward pass has been recorded")]
    MissingForward,
    #[error("non-finite gradient entry at index {0}")]
    NonFiniteGradient(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
