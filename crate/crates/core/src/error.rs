use thiserror::Error;

/// Errors raised by the geometry, tree and dataset layers.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("pose out of bounds: ({x},{y},{z},r{r}) does not fit in a {size}^3 grid")]
    OutOfBounds { x: i32, y: i32, z: i32, r: u8, size: usize },

    #[error("collision at cell ({x},{y},{z})")]
    Collision { x: i32, y: i32, z: i32 },

    #[error("grid size mismatch: {a} vs {b}")]
    SizeMismatch { a: usize, b: usize },

    #[error("sequence length mismatch: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("brick {index} is unreachable from the root")]
    Disconnected { index: usize },

    #[error("generation stuck after {attempts} attempts with {placed} bricks placed")]
    GenerationStuck { attempts: usize, placed: usize },

    #[error("image {w}x{h} with depth {depth} does not fit in a {size}^3 grid")]
    TooLarge { w: usize, h: usize, depth: usize, size: usize },

    #[error("tree invariant violated: {0}")]
    InvalidTree(String),

    #[error("unknown connection type (dx={dx}, dy={dy}, rot={rot})")]
    UnknownConnection { dx: i32, dy: i32, rot: u8 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("format error at byte offset {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
