use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("grid dimension must be 2 or 3, got {0}")]
    InvalidDimension(usize),
    #[error("resolution below minimum on axis {axis}: {resolution} < 8")]
    ResolutionTooSmall { axis: usize, resolution: usize },
    #[error("extent on axis {axis} must be positive and finite, got {extent}")]
    NonPositiveExtent { axis: usize, extent: f64 },
    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("field shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    #[error("non-finite value at lattice point {point}")]
    NonFinite { point: usize },
    #[error("tensor not symmetric at lattice point {point} (relative residual {residual:e})")]
    NotSymmetric { point: usize, residual: f64 },
    #[error("metric not positive definite at lattice point {point}")]
    NotPositiveDefinite { point: usize },
    #[error("flow singularity at t = {t}: metric lost positivity at lattice point {point}")]
    FlowSingularity { t: f64, point: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("ball of radius {radius} contains no lattice point besides its centre")]
    EmptyBall { radius: f64 },
    #[error("profile must be positive, got minimum {min}")]
    NonPositiveProfile { min: f64 },
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
