//! Generic signed-integer scalar for the exact arithmetic layers.
//!
//! Every quantity in the lattice and reduction modules (degrees,
//! multiplicities, pairings, virtual dimensions) is an exact integer, so the
//! scalar parameter ranges over integer-like types rather than floats. Any
//! type satisfying the bounds below works; `i64` is convenient for tests and
//! `num_bigint::BigInt` (re-exported as [`crate::Int`]) is the default alias
//! with no overflow ceiling.

use std::fmt::{Debug, Display};

use num_integer::Integer;
use num_traits::{FromPrimitive, NumAssign, Signed, ToPrimitive};

/// Exact signed integer scalar: ring operations, ordering, Euclidean
/// division, signs, and lossless conversion from small primitives.
pub trait Scalar:
    Integer + Signed + NumAssign + FromPrimitive + ToPrimitive + Clone + Debug + Display
{
}

impl<T> Scalar for T where
    T: Integer + Signed + NumAssign + FromPrimitive + ToPrimitive + Clone + Debug + Display
{
}

/// Converts a small constant into any scalar type.
pub fn from_i64<T: Scalar>(n: i64) -> T {
    T::from_i64(n).expect("i64 constant must be representable in the scalar type")
}

/// Exact halving; panics if the argument is odd (callers only halve provably
/// even quantities such as `d(d+3)` or `m(m+1)`).
pub(crate) fn half<T: Scalar>(n: T) -> T {
    let two = from_i64::<T>(2);
    let (q, r) = n.div_rem(&two);
    assert!(r.is_zero(), "half() called on an odd value");
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    #[test]
    fn constants_convert_across_scalar_types() {
        assert_eq!(from_i64::<i64>(-3), -3);
        assert_eq!(from_i64::<BigInt>(-3), BigInt::from(-3));
        assert_eq!(from_i64::<i128>(1 << 40), 1i128 << 40);
    }

    #[test]
    fn half_is_exact() {
        assert_eq!(half(10i64), 5);
        assert_eq!(half(BigInt::from(-8)), BigInt::from(-4));
    }

    #[test]
    #[should_panic]
    fn half_rejects_odd() {
        let _ = half(7i64);
    }
}
