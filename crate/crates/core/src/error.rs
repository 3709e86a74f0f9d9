use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("BehindCamera: point has camera depth {0} <= 0")]
    BehindCamera(f64),
    #[error("NonPositiveDepth: depth {0} <= 0")]
    NonPositiveDepth(f64),
    #[error("UnknownPreset: {0:?} (expected nuscenes, lyft_fleet1, lyft_fleet2 or waymo)")]
    UnknownPreset(String),
    #[error("UnknownCamera: no camera named {0:?} in rig")]
    UnknownCamera(String),
    #[error("InvalidIntrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("InvalidExtrinsics: {0}")]
    InvalidExtrinsics(String),
    #[error("InvalidRig: {0}")]
    InvalidRig(String),
    #[error("DegenerateSamples: ground samples are collinear or too few")]
    DegenerateSamples,
    #[error("InvalidFov: {0} degrees is outside (0, 180)")]
    InvalidFov(f64),
    #[error("InvalidHeight: camera height {0} must be positive")]
    InvalidHeight(f64),
    #[error("TooFewRows: map has {0} rows, need at least 2")]
    TooFewRows(usize),
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("WeightDimMismatch: {0}")]
    WeightDimMismatch(String),
    #[error("EmptyInput: no valid samples")]
    EmptyInput,
    #[error("ColorOutOfRange: point {0} has a color channel outside [0, 1]")]
    ColorOutOfRange(usize),
    #[error("InvalidSpec: {0}")]
    InvalidSpec(String),
    #[error("NonPositiveScale: {0}")]
    NonPositiveScale(f64),
    #[error("OutOfRange: {0}")]
    OutOfRange(String),
    #[error("Format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}
