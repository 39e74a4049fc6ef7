//! Scalar abstraction for the plant and controller math.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the simulator can run on: f32 or f64.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Infallible for the supported float types.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Widens to `f64` for recording and reporting.
    fn to_f64_lossless(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }

    /// Converts a count (step index, SM count) to the scalar type.
    fn from_count(k: usize) -> Self {
        Self::from_usize(k).expect("count representable in scalar type")
    }

    /// 1 for an inserted submodule, 0 for a bypassed one.
    fn from_status(inserted: bool) -> Self {
        if inserted {
            Self::one()
        } else {
            Self::zero()
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Relative closeness used by invariant checks.
pub fn approx_eq_rel<T: Scalar>(a: T, b: T, rel: T) -> bool {
    let scale = a.abs().max(b.abs()).max(T::one());
    (a - b).abs() <= rel * scale
}
