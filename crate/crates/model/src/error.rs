use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("bad image size: got {got}, model wants {want} (or an integer divisor)")]
    BadImageSize { got: usize, want: usize },

    #[error("too many bricks: {n} exceeds the model cap {cap}")]
    TooManyBricks { n: usize, cap: usize },

    #[error("query index out of range: {what} = {got} (table size {cap})")]
    IndexOutOfRange { what: &'static str, got: usize, cap: usize },

    #[error("checkpoint is missing tensor {0}")]
    MissingTensor(String),

    #[error("checkpoint tensor {name} has shape {got:?}, expected {want:?}")]
    TensorShape { name: String, got: Vec<usize>, want: Vec<usize> },

    #[error("unexpected tensor {0} in checkpoint")]
    UnexpectedTensor(String),

    #[error("bad record {id}: {msg}")]
    Data { id: String, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] brickforge_core::CoreError),

    #[error(transparent)]
    Ad(#[from] brickforge_autodiff::AdError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;
