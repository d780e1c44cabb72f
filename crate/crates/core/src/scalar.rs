//! Scalar abstraction shared by the simulation kernels.
//!
//! Everything that evaluates a closed-form physics expression or runs an FFT is
//! generic over [`Real`], which is implemented for `f32` and `f64`. Physical
//! constants are stored as `f64` and converted with [`Real::lit`].

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + rustfft::FftNum + Default + Debug + Display + LowerExp + Sum
{
    /// Converts an `f64` literal or constant into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 converts to every Real")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }

    #[inline]
    fn from_len(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize converts to every Real")
    }
}

impl Real for f32 {}
impl Real for f64 {}
