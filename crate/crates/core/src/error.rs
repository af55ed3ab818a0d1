use thiserror::Error;

/// Errors raised by operator construction, functionals and the flow.
///
/// Indices carried in messages are 1-based, matching the file formats.
#[derive(Debug, Error)]
pub enum CurvError {
    #[error("index out of range in entry {entry:?}: indices must lie in 1..={n}")]
    IndexOutOfRange { entry: [usize; 4], n: usize },

    #[error("inconsistent symmetry at {entry:?}: {detail}")]
    InconsistentSymmetry { entry: [usize; 4], detail: String },

    #[error("first Bianchi identity violated at {quadruple:?}: residual {residual:e} exceeds {tolerance:e}")]
    BianchiViolation {
        quadruple: [usize; 4],
        residual: f64,
        tolerance: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate plane: |X^Y|^2 = {area2:e}")]
    DegeneratePlane { area2: f64 },

    #[error("pole is not a unit vector (|e| = {norm})")]
    NotUnit { norm: f64 },

    #[error("negative sectional curvature: flag eigenvalue {value:e} below {threshold:e}")]
    NegativeSectional { value: f64, threshold: f64 },

    #[error("dimension {n} too small (need at least {min})")]
    DimensionTooSmall { n: usize, min: usize },

    #[error("bad frame: {0}")]
    BadFrame(String),

    #[error("dimension {0} is even; an odd dimension is required")]
    EvenDimension(usize),

    #[error("unknown checker `{0}`")]
    UnknownChecker(String),

    #[error("invalid flow configuration: {0}")]
    ConfigInvalid(String),

    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("hypothesis not met: {0}")]
    HypothesisNotMet(String),

    #[error("sampler failed: final bracket [{lo}, {hi}] with pinching [{lambda_lo}, {lambda_hi}]")]
    SamplerFailed {
        lo: f64,
        hi: f64,
        lambda_lo: f64,
        lambda_hi: f64,
    },

    #[error("malformed operator file: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CurvError>;
