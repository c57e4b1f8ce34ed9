//! Scalar abstraction: numeric kernels are generic over the float width.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Floating-point scalar the library is generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("float literal must be representable")
    }

    /// Widens to `f64` (exact for `f32` and `f64`).
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar must widen to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_convert_to_both_widths() {
        assert_eq!(f64::of(1.5), 1.5);
        assert_eq!(f32::of(1.5), 1.5f32);
    }
}
