use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid is not strictly increasing at index {index}")]
    InvalidGrid { index: usize },
    #[error("lift failed: weak-geometric residual {residual:e} after order doubling")]
    LiftFailure { residual: f64 },
    #[error("time {time} is not a grid node")]
    OffGrid { time: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("shape error: {0}")]
    ShapeError(String),
    #[error("explosion after last valid time {t}")]
    Explosion { t: f64 },
    #[error("left chart domain at time {t}")]
    ChartExit { t: f64 },
    #[error("logarithm failed to converge: {0}")]
    LogFailure(String),
    #[error("point pair too close to the cut locus (|log| = {norm})")]
    NearCutLocus { norm: f64 },
    #[error("chart differential is singular: {0}")]
    ChartSingular(String),
    #[error("outside gauge domain: {0}")]
    DomainError(String),
    #[error("one-form is controlled against a different parallelism: {0}")]
    GaugeMismatch(String),
    #[error("sample {index} at t = {t} is off the manifold (distance {distance:e})")]
    NotOnManifold { index: usize, t: f64, distance: f64 },
    #[error("no chart contains the point reached at t = {t}")]
    AtlasGap { t: f64 },
    #[error("vector fields are not related (worst residual {residual:e} at sample {index})")]
    NotRelated { index: usize, residual: f64 },
    #[error("order estimation needs at least 4 levels, got {got}")]
    InsufficientLevels { got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
