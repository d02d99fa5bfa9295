//! Integer range coding driven by quantized cumulative frequency tables.

mod cdf;
mod range;

pub use cdf::{quantize_probs, CdfTable, FREQ_BITS, FREQ_TOTAL};
pub use range::{range_decode, range_encode, RangeDecoder, RangeEncoder};
