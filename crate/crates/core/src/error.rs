use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("{what} needs {needed} grid points but the dense limit is {limit}")]
    Capacity {
        what: &'static str,
        needed: usize,
        limit: usize,
    },

    /// Probability reached the periodic edge of the grid.
    #[error("probability {mass:.3e} in the grid edge band exceeds {limit:.1e} (wrap-around)")]
    Leakage { mass: f64, limit: f64 },

    /// The no-click projection left (numerically) nothing behind.
    #[error("no-click branch has vanishing norm {norm_sq:.3e}: detection is certain")]
    CertainDetection { norm_sq: f64 },

    #[error(
        "measurement period too short: v*dt = {step:.4} is below {min_cells} cells ({min_length:.4}); \
         set zeno_study to run this regime"
    )]
    RegimeGuard {
        step: f64,
        min_cells: f64,
        min_length: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("insufficient accuracy: {0}")]
    Accuracy(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Configuration-class failures, as opposed to numerical ones.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::RegimeGuard { .. } | Error::InvalidGrid(_) | Error::Json(_)
        )
    }
}
