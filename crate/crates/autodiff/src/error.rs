use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdError {
    #[error("{op}: shape mismatch ({detail})")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("{op}: index out of range ({detail})")]
    IndexOutOfRange { op: &'static str, detail: String },

    #[error("backward requires a scalar, got {numel} elements")]
    NotScalar { numel: usize },

    #[error("checkpoint format error at byte offset {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AdError>;
