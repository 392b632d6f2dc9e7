//! Floating-point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the clustering pipeline is generic over: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal into this scalar.
    #[inline]
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable in scalar")
    }

    #[inline]
    fn of_usize(value: usize) -> Self {
        Self::from_usize(value).expect("count representable in scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// Rounds half away from zero for non-negative inputs (round-half-up).
    #[inline]
    fn round_half_up(self) -> Self {
        (self + Self::of(0.5)).floor()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Squared Euclidean distance between two equally sized slices.
#[inline]
pub fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

#[inline]
pub fn distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    squared_distance(a, b).sqrt()
}

/// Total order on floats used for every sort in the crate (NaN sorts last).
#[inline]
pub fn total_cmp<T: Scalar>(a: &T, b: &T) -> std::cmp::Ordering {
    a.partial_cmp(b)
        .unwrap_or_else(|| match (a.is_nan(), b.is_nan()) {
            (true, true) => std::cmp::Ordering::Equal,
            (true, false) => std::cmp::Ordering::Greater,
            _ => std::cmp::Ordering::Less,
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_half_up_behaviour() {
        assert_eq!(2.5f64.round_half_up(), 3.0);
        assert_eq!(2.49f64.round_half_up(), 2.0);
        assert_eq!(0.0f32.round_half_up(), 0.0);
    }

    #[test]
    fn distances() {
        assert_eq!(squared_distance(&[0.0f64, 0.0], &[3.0, 4.0]), 25.0);
        assert_eq!(distance(&[0.0f32, 0.0], &[3.0, 4.0]), 5.0);
    }
}
