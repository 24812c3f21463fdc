use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate gaze: left and right gaze directions cancel out")]
    DegenerateGaze,

    #[error("timestamps must be strictly increasing (frame {index})")]
    NonIncreasingTimestamps { index: usize },

    #[error("surface `{surface}`: {reason}")]
    InvalidSurface { surface: String, reason: String },

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("cell ({r}, {c}) is outside the {w}x{h} grid of surface `{surface}`")]
    CellOutOfRange {
        surface: String,
        r: i64,
        c: i64,
        w: usize,
        h: usize,
    },

    #[error("grid shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unknown surface `{0}`")]
    UnknownSurface(String),

    #[error("unknown key object `{0}`")]
    UnknownKeyObject(String),

    #[error("unknown step `{0}`")]
    UnknownStep(String),

    #[error("step `{0}` has no assigned key object")]
    UnassignedStep(String),

    #[error("steps `{0}` and `{1}` are not adjacent")]
    NonAdjacentMerge(String, String),

    #[error("document is empty")]
    EmptyDocument,

    #[error("the set of available key objects is empty")]
    EmptyAvailableSet,

    #[error("trace script produces no frames")]
    EmptyTrace,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
