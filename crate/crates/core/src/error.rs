use std::io;

use thiserror::Error;

/// Errors produced anywhere in the codec pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("depth {0} is outside the supported range 1..=21")]
    UnsupportedDepth(u32),
    #[error("geometry depth {geometry} does not match transform depth {transform}")]
    DepthMismatch { geometry: u8, transform: u8 },
    #[error("cannot downscale a depth-0 geometry")]
    DepthUnderflow,
    #[error("depth-0 geometries cannot be encoded")]
    DepthTooSmall,
    #[error("coordinate {child:?} is not a child of {parent:?}")]
    NotAChild { child: [u32; 3], parent: [u32; 3] },
    #[error("occupancy code 0 is not a valid code")]
    InvalidCode,
    #[error("pyramid layer {0} is inconsistent with its predecessor")]
    CorruptPyramid(usize),
    #[error("index {index} out of range for table of {len} rows")]
    IndexError { index: usize, len: usize },
    #[error("child voxel {0:?} has no parent in the lower scale")]
    MissingParent([u32; 3]),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),
    #[error("unexpected end of stream")]
    UnexpectedEof,
    #[error("corrupt stream: {0}")]
    CorruptStream(String),
    #[error("bitstream was produced with model {expected:016x}, decoder has {actual:016x}")]
    ModelMismatch { expected: u64, actual: u64 },
    #[error("parameter file: {0}")]
    ParamFormat(String),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("non-finite loss at step {step}: {detail}")]
    NonFiniteLoss { step: usize, detail: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
