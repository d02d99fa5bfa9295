//! Learned multiscale occupancy coding for sparse point cloud geometry.
//!
//! A voxelized cloud is reduced to a pyramid of 8-bit occupancy codes, one
//! scale per octree level. Codes are entropy coded coarse to fine with
//! probabilities from a small sparse-convolution network that looks at the
//! already decoded coarser scale.
//!
//! The numeric core is generic over [`Scalar`] (`f32` for deployment, `f64`
//! for gradient checks); the aliases below fix the common choices.

pub mod codec;
pub mod entropy;
pub mod error;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod occupancy;
pub mod scalar;
pub mod synth;
pub mod top;
pub mod voxel;

pub use codec::{
    decode, decode_file, decode_with, encode, encode_file, encode_with_summary, CodingMode,
    DecodeOptions, EncodeSummary,
};
pub use error::{Error, Result};
pub use occupancy::{build_pyramid, fcg, fog, OccupancyCode, Pyramid, ScaleLayer};
pub use scalar::Scalar;
pub use top::{TopConfig, TopParams};
pub use voxel::{dequantize, quantize, Coord, PointCloud, QuantizationTransform, SparseGeometry};

/// Deployment precision.
pub type TopParamsF32 = TopParams<f32>;
/// Gradient-check precision.
pub type TopParamsF64 = TopParams<f64>;
pub type MatrixF32 = nn::Matrix<f32>;
pub type MatrixF64 = nn::Matrix<f64>;
