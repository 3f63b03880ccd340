use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("metric is not positive definite at {point:?}")]
    SingularMetric { point: Vec<f64> },
    #[error("tangent/cotangent vectors are based at different points")]
    BasePointMismatch,
    #[error("curve left the chart domain at {point:?}")]
    ChartEscape { point: Vec<f64> },
    #[error("geodesic distance {distance} exceeds trust radius {trust}")]
    OutOfInjectivityTrust { distance: f64, trust: f64 },
    #[error("shooting did not converge after {iterations} iterations (residual {residual:e})")]
    ShootingDiverged { iterations: usize, residual: f64 },
    #[error("state became non-finite at step {step}")]
    NonFiniteState { step: usize },
    #[error("point is not in the control set (distance {distance:e})")]
    PointNotInSet { distance: f64 },
    #[error("direction is not in the adjacent cone (margin {margin:e})")]
    DirectionNotInCone { margin: f64 },
    #[error("lifted correction exceeds its bound at node {node}")]
    BoundViolated { node: usize },
    #[error("direction leaves the adjacent cone at node {node}")]
    ConeViolation { node: usize },
    #[error("endpoint row {index} violated (value {value:e})")]
    EndpointRowViolation { index: usize, value: f64 },
    #[error("second-order correction not in the second-order set at node {node}")]
    SigmaNotInB { node: usize },
    #[error("quadratic distance bound failed at node {node}")]
    BoundNotVerified { node: usize },
    #[error("no nonzero multiplier satisfies the first-order conditions")]
    NoMultiplier,
    #[error("cone computation is degenerate: {0}")]
    DegenerateCone(String),
    #[error("second-order tangent set is empty")]
    EmptySecondCone,
    #[error("direction is not critical: {0}")]
    DirectionNotCritical(String),
    #[error("grid too coarse: no feasible point near the candidate")]
    ResolutionTooCoarse,
    #[error("perturbation norm {norm:e} exceeds cap {cap:e}")]
    SigmaCapExceeded { norm: f64, cap: f64 },
    #[error("{what}: expected dimension {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("invalid set: {0}")]
    InvalidSet(String),
    #[error("expression error at byte {pos}: {message}")]
    Expr { pos: usize, message: String },
    #[error("{path}: {message}")]
    Input { path: String, message: String },
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub fn input(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Input {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn dim(what: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch {
            what: what.into(),
            expected,
            got,
        }
    }

    /// True for errors caused by malformed or inconsistent input rather than by
    /// a numerical failure during the analysis.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Input { .. }
                | Error::Expr { .. }
                | Error::Io(_)
                | Error::InvalidSet(_)
                | Error::DimensionMismatch { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
