use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("group element not normalized (|g| = {0})")]
    NotNormalized(f64),
    #[error("point is off the embedding (constraint residual {0:.3e})")]
    OffManifold(f64),
    #[error("vector is not tangent at the point (normal component {0:.3e})")]
    NotTangent(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("singular metric Gram matrix (smallest eigenvalue {0:.3e})")]
    SingularMetric(f64),
    #[error("degenerate plane (Gram determinant {0:.3e})")]
    DegeneratePlane(f64),
    #[error("action not free at point (orbit Gram eigenvalue {0:.3e})")]
    ActionNotFree(f64),
    #[error("deformation parameter out of range: {0}")]
    InvalidParameter(String),
    #[error("curve is not horizontal (vertical speed {0:.3e})")]
    NotHorizontal(f64),
    #[error("curve is not vertical (horizontal speed {0:.3e})")]
    NotVertical(f64),
    #[error("vector is not horizontal (vertical component {0:.3e})")]
    VectorNotHorizontal(f64),
    #[error("vector is not vertical (horizontal component {0:.3e})")]
    VectorNotVertical(f64),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("basis is not orthonormal (deviation {0:.3e})")]
    NotOrthonormal(f64),
    #[error("step count must be at least 2, got {0}")]
    TooFewSteps(usize),
    #[error("function is not basic (fiber variation {0:.3e})")]
    NotBasic(f64),
    #[error("metrics are not adapted to the same horizontal distribution: {0}")]
    NotAdapted(String),
    #[error("unknown bundle `{0}` (expected one of: hopf, trivial3x2, trivial3x4)")]
    UnknownBundle(String),
    #[error("unknown suite `{name}`; registry: {registry}")]
    UnknownSuite { name: String, registry: String },
    #[error("invalid metric descriptor `{0}`")]
    InvalidMetric(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("report serialization failed: {0}")]
    Serialize(String),
}

pub type Result<T> = std::result::Result<T, Error>;
