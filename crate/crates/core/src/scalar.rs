//! Floating point abstraction for the network engine.
//!
//! Deployment runs in `f32`; gradient checks run the identical code in `f64`.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar usable by the sparse network engine and the context model.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Default + Debug + Send + Sync + 'static
{
    /// Converts an `f64` literal, saturating through the float conversion.
    fn lit(v: f64) -> Self;

    fn to_f64_lossy(self) -> f64;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline(always)]
            fn lit(v: f64) -> Self {
                v as $t
            }

            #[inline(always)]
            fn to_f64_lossy(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);
