use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("subcritical exponent required: p = {0} is outside (2, 6)")]
    NonSubcriticalExponent(f64),
    #[error("lambda must be positive (got {0})")]
    NonPositiveLambda(f64),
    #[error("no sign change found for U(0) up to {ceiling}")]
    BracketFailure { ceiling: f64 },
    #[error("Green identity violated: int gamma U^2 = {direct}, (1/q) int |grad gamma|^2 = {gradient}")]
    GreenIdentityViolation { direct: f64, gradient: f64 },

    #[error("unknown metric family `{0}`")]
    UnknownMetric(String),
    #[error("bad metric parameters: {0}")]
    BadParams(String),
    #[error("metric is singular at ({0}, {1}, {2})")]
    SingularMetric(f64, f64, f64),
    #[error("geodesic integrator failed: {0}")]
    StepFailure(String),
    #[error("point lies outside the normal ball of radius {radius}")]
    OutsideBall { radius: f64 },
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("solver hit {iterations} iterations with relative residual {residual:e}")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("field map left its admissible range by {excess:e} at node {node}")]
    BoundViolation { node: usize, excess: f64 },
    #[error("grid too coarse: {0}")]
    ResolutionTooCoarse(String),

    #[error("kernel Gram matrix is singular (condition number {0:e})")]
    SingularGram(f64),
    #[error("input is not orthogonal to the kernel fields (relative leakage {0:e})")]
    NotOrthogonal(f64),
    #[error("fixed-point increments grew for 3 consecutive iterations (last ratio {0})")]
    NoContraction(f64),
    #[error("degenerate fit design: {0}")]
    DegenerateDesign(String),
    #[error("no critical point found: {0}")]
    NoCriticalPoint(String),

    #[error("parse error at line {line}, field `{field}`: {message}")]
    ParseError { line: usize, field: String, message: String },
    #[error("invalid configuration: {0}")]
    ValidationError(String),
    #[error("missing pipeline stage output `{0}`")]
    MissingStage(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
