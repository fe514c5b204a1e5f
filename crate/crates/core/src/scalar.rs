//! Scalar abstraction shared by every real-valued stage.
//!
//! Kernels, gradient fields, feature maps and network weights are generic
//! over [`Real`]; `f32` and `f64` implement it. Pixel storage stays 8-bit.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Name written into persisted model files.
    const NAME: &'static str;

    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 converts to any Real")
    }

    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize converts to any Real")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {
    const NAME: &'static str = "f32";
}

impl Real for f64 {
    const NAME: &'static str = "f64";
}

/// Round half away from zero and clamp into the 8-bit sample range.
#[inline]
pub fn quantize<T: Real>(v: T) -> u8 {
    let r = v.round();
    if r.is_nan() || r <= T::zero() {
        0
    } else if r >= T::of(255.0) {
        255
    } else {
        r.to_u8().unwrap_or(255)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_rounds_half_away_and_clamps() {
        assert_eq!(quantize(127.5f64), 128);
        assert_eq!(quantize(127.49f64), 127);
        assert_eq!(quantize(-3.0f32), 0);
        assert_eq!(quantize(300.0f32), 255);
        assert_eq!(quantize(f64::NAN), 0);
        assert_eq!(quantize(254.5f32), 255);
    }
}
