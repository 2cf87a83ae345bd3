use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model or numerical parameter is outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// An operation was called outside the time or space domain it is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// Wavefunction content would leave the periodic grid.
    #[error("grid overflow: {message} (needs half-width >= {required_half_width:.3}, points >= {required_points})")]
    Overflow {
        message: String,
        required_half_width: f64,
        required_points: usize,
    },

    #[error("usage error: {0}")]
    Usage(String),

    /// Gaussian transport hit a near-caustic map; the interval must be split.
    #[error("caustic: |a + b w| = {0:e}, split the interval")]
    Caustic(f64),

    #[error("interaction window: {0}")]
    Window(String),

    #[error("insufficient coverage: need at least {required_angles} angles and {required_offsets} offsets")]
    Coverage {
        required_angles: usize,
        required_offsets: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("scan failed: {holes} of {total} samples are holes")]
    ScanHoles { holes: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::Config(_) | Error::Json(_) | Error::Usage(_) => 2,
            Error::ScanHoles { .. } => 4,
            Error::Io(_) => 1,
            _ => 3,
        }
    }

    pub(crate) fn overflow(message: impl Into<String>, required_half_width: f64, required_points: usize) -> Self {
        Error::Overflow {
            message: message.into(),
            required_half_width,
            required_points,
        }
    }
}
