//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("axis {axis} out of range for a grid with {axes} real axes")]
    AxisOutOfRange { axis: usize, axes: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite value at grid point {point}")]
    NonFinite { point: usize },
    #[error(
        "matrix not positive definite at grid point {point} \
         (least relative eigenvalue {least:.3e})"
    )]
    NotPositiveDefinite { point: usize, least: f64 },
    #[error("inadmissible state: least relative eigenvalue {least:.3e} at grid point {point}")]
    Inadmissible { point: usize, least: f64 },
    #[error("factor multiplicities sum to {got}, expected {expected}")]
    MultiplicitySum { got: usize, expected: usize },
    #[error("symmetric-function order {k} out of range for {n} eigenvalues")]
    OrderOutOfRange { k: usize, n: usize },
    #[error("cone condition violated: margin {margin:.3e} at grid point {point}")]
    ConeViolated { margin: f64, point: usize },
    #[error("singular linearization at grid point {point}")]
    SingularLinearization { point: usize },
    #[error("step rejected {retries} times (least relative eigenvalue {least:.3e}); aborting")]
    ConeExit { retries: usize, least: f64 },
    #[error("non-finite field values during time integration at t = {t}")]
    Instability { t: f64 },
    #[error("flow did not converge before t_max = {t_max}")]
    NotConverged { t_max: f64 },
    #[error("path needs at least {needed} nodes, got {got}")]
    PathTooShort { got: usize, needed: usize },
    #[error("not enough usable data: {got} rows, need {needed}")]
    InsufficientData { got: usize, needed: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("continuity solver: {0}")]
    Continuity(String),
    #[error("snapshot format: {0}")]
    SnapshotFormat(String),
    #[error("unsupported snapshot version tag {0:?}")]
    SnapshotVersion(String),
    #[error("report schema version {got}, expected {expected}")]
    ReportVersion { got: u32, expected: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
