use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("cell ({w}, {h}) is outside the {tw}x{th} grid")]
    CellOutOfBounds { w: usize, h: usize, tw: usize, th: usize },

    #[error("change point ({tau_w}, {tau_h}) is outside 1..={tw} x 1..={th}")]
    ChangePointOutOfBounds {
        tau_w: usize,
        tau_h: usize,
        tw: usize,
        th: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quadrant Q{0} is nonempty but has no mean estimate")]
    MissingQuadrantMean(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty search range")]
    EmptySearch,

    #[error("inference refused: {0}")]
    InferenceRefused(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
