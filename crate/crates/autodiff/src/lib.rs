//! Reverse-mode automatic differentiation over dense row-major tensors,
//! with the op set needed by the assembly model: matrix products, the usual
//! activations, layer norm, embedding lookups, index-map ops, threshold and
//! nonzero-mean aggregation, a linear scatter, and masked binary
//! cross-entropy. Plus Adam and a binary checkpoint container.

mod adam;
mod backward;
mod checkpoint;
mod error;
pub mod gradcheck;
mod graph;
mod kernels;
mod ops;
mod real;

pub use adam::{Adam, AdamConfig, Parameter};
pub use checkpoint::{
    decode as decode_checkpoint, encode as encode_checkpoint, read_file as read_checkpoint,
    write_file as write_checkpoint, CheckpointEntry,
};
pub use error::{AdError, Result};
pub use graph::{Graph, Tensor};
pub use ops::{
    bce_with_logits_mean, concat, elementwise_max, nonzero_mean, scatter_sum, stack_rows,
};
pub use real::Real;
