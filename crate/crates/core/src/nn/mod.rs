//! A small sparse-tensor network engine: embeddings, sparse 3D convolution on
//! coordinate sets, pointwise layers, softmax/cross-entropy with hand-written
//! reverse-mode gradients, and Adam.
//!
//! Every row of every layer output is accumulated in a fixed order that does
//! not depend on how rows are split across threads, so forward passes are
//! bitwise reproducible for any thread count.

mod adam;
mod index;
mod layers;
mod loss;
pub mod params_io;
mod tensor;

pub use adam::{Adam, AdamConfig, AdamOutcome};
pub use index::{kernel_offsets, NeighborIndex};
pub use layers::{
    add_assign, relu, relu_backward, sparse_conv3, Embedding, Linear, ResBlock, ResBlockTrace,
    SparseConv,
};
pub use loss::{cross_entropy, softmax_cross_entropy_grad, softmax_rows, CrossEntropy, PROB_FLOOR};
pub use tensor::{Matrix, ParamTensor, SparseFeatureMap};

/// Rows per parallel work item. Fixed so reductions are partitioned the same
/// way regardless of the thread pool size.
pub(crate) const ROW_BLOCK: usize = 256;
