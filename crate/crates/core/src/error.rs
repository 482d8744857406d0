use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("unknown video id `{0}`")]
    MissingId(String),
    #[error("need at least {need} distinct treatment groups, found {have}")]
    InsufficientGroups { have: usize, need: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unknown config key `{0}`")]
    UnknownConfigKey(String),
    #[error("video too short: {len} frames, need at least {min}")]
    TooShortVideo { len: usize, min: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("positional encoding width must be even, got {0}")]
    OddWidth(usize),
    #[error("sequence of length {len} exceeds maximum {max}")]
    Overlength { len: usize, max: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("cannot normalize a zero vector")]
    ZeroVector,
    #[error("need at least two views, got {0}")]
    TooFewViews(usize),
    #[error("only one class present")]
    SingleClass,
    #[error("missing viability label for `{0}`")]
    MissingLabel(String),
    #[error("no labeled videos available")]
    NoLabels,
    #[error("all sampled labels are identical")]
    DegenerateLabels,
    #[error("spatial encoder checkpoint required")]
    MissingSpatialCheckpoint,
    #[error("corrupt checkpoint: {0}")]
    Corruption(String),
    #[error("checkpoint version or architecture mismatch: {0}")]
    Version(String),
}

impl Error {
    /// Stable one-word category used in machine-readable error lines.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Integrity(_) => "integrity",
            Error::MissingId(_) => "missing-id",
            Error::InsufficientGroups { .. } => "insufficient-groups",
            Error::InvalidConfig(_) | Error::UnknownConfigKey(_) => "config-schema",
            Error::TooShortVideo { .. } => "too-short-video",
            Error::ShapeMismatch(_) | Error::OddWidth(_) | Error::LengthMismatch(_) => "shape",
            Error::Overlength { .. } => "overlength",
            Error::NonFinite(_) => "non-finite",
            Error::ZeroVector => "zero-vector",
            Error::TooFewViews(_) => "too-few-views",
            Error::SingleClass | Error::DegenerateLabels => "single-class",
            Error::MissingLabel(_) | Error::NoLabels => "no-labels",
            Error::MissingSpatialCheckpoint => "missing-checkpoint",
            Error::Corruption(_) => "corruption",
            Error::Version(_) => "version",
        }
    }
}
