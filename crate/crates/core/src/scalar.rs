//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar: `f32` or `f64`.
///
/// Everything in the crate is written against this trait. The `f64`
/// instantiation is the one the tolerances in the test-suite are pinned to.
pub trait Real:
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
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// A value just above `self` (a few ulps at most).
    #[inline]
    fn nudge_up(self) -> Self {
        self + self.abs() * Self::epsilon()
    }

    /// A value just below `self` (a few ulps at most).
    #[inline]
    fn nudge_down(self) -> Self {
        self - self.abs() * Self::epsilon()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Order-independent maximum used to combine partial scan results.
#[inline]
pub(crate) fn fmax<T: Real>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nudges_bracket_the_value() {
        for x in [1.0_f64, 0.125, 1.0 / 3.0, 1e-9] {
            assert!(x.nudge_up() > x);
            assert!(x.nudge_down() < x);
        }
        let y = 0.25_f32;
        assert!(y.nudge_up() > y && y.nudge_down() < y);
    }
}
