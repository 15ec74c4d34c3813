//! Scalar abstraction shared by the link model and the learning stack.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real-valued scalar the simulator and networks are generic over.
///
/// Implemented for `f32` and `f64`. Constants are written as `f64` literals and
/// narrowed through [`Real::lit`].
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Default + Debug + Display + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Converts a count into this scalar type.
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }

    /// `10^(db/10)`
    fn from_db(db: Self) -> Self {
        Self::lit(10.0).powf(db / Self::lit(10.0))
    }

    /// `10·log10(self)`
    fn to_db(self) -> Self {
        Self::lit(10.0) * self.log10()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Speed of light used throughout the link and radar formulas (m/s).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;
