use alloc::string::String;

/// Errors raised by the core tracker pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid bounding box {w}x{h}: width and height must be positive and finite")]
    InvalidBox { w: f64, h: f64 },
    #[error("not enough data: {available} patches for {required} clusters")]
    InsufficientData { available: usize, required: usize },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid shrinkage threshold {0}: must be finite and non-negative")]
    InvalidThreshold(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("tracker initialisation failed: {0}")]
    Init(String),
}

pub type Result<T> = core::result::Result<T, Error>;
