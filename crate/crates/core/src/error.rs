use thiserror::Error;

/// Errors produced anywhere in the recognition stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty SRT")]
    EmptySrt,

    #[error("invalid SRT: {0}")]
    InvalidTree(String),

    #[error("overlapping symbol segmentation: stroke {0} is the first stroke of more than one symbol")]
    OverlappingSegmentation(u32),

    #[error("inconsistent paths: {0}")]
    InconsistentPaths(String),

    #[error("paths do not cover a tree: {0}")]
    PathsNotATree(String),

    #[error("non-consecutive symbol '{label}': strokes {strokes:?} are interleaved with another symbol")]
    NonConsecutiveSymbol { label: String, strokes: Vec<u32> },

    #[error("unknown label(s): {}", .0.join(", "))]
    UnknownLabel(Vec<String>),

    #[error("LG parse error at line {line}: {msg}")]
    LgParse { line: usize, msg: String },

    #[error("InkML parse error: {0}")]
    InkMl(String),

    #[error("invalid ink: {0}")]
    InvalidInk(String),

    #[error("sample '{0}' has no ground truth")]
    MissingGroundTruth(String),

    #[error("target too long for T frames: target needs {needed} frames, have {frames}")]
    TargetTooLong { needed: usize, frames: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("training diverged: {0}")]
    NonFinite(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("alphabet hash mismatch: checkpoint has {found}, this build expects {expected}")]
    AlphabetMismatch { expected: String, found: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
