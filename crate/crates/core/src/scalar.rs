//! Integer scalars for concrete evaluation.
//!
//! The symbolic side of the verifier always carries arbitrary-precision
//! literals. Concrete execution (the interpreter and the bounded oracle) is
//! generic so that enumeration-heavy checks can run on machine integers while
//! exact runs use [`BigInt`]. Machine-width arithmetic is checked; an overflow
//! surfaces as `None` rather than wrapping.

use std::fmt::{Debug, Display};
use std::hash::Hash;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{CheckedAdd, CheckedMul, CheckedSub, FromPrimitive, Signed, ToPrimitive};

pub trait Int:
    Integer
    + Signed
    + CheckedAdd
    + CheckedSub
    + CheckedMul
    + FromPrimitive
    + ToPrimitive
    + Clone
    + Hash
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an arbitrary-precision literal, failing when it does not fit.
    fn from_big(v: &BigInt) -> Option<Self>;

    fn to_big(&self) -> BigInt;

    fn from_i64(v: i64) -> Self {
        <Self as FromPrimitive>::from_i64(v).expect("every scalar type holds i64")
    }
}

impl Int for i64 {
    fn from_big(v: &BigInt) -> Option<Self> {
        v.to_i64()
    }

    fn to_big(&self) -> BigInt {
        BigInt::from(*self)
    }
}

impl Int for i128 {
    fn from_big(v: &BigInt) -> Option<Self> {
        v.to_i128()
    }

    fn to_big(&self) -> BigInt {
        BigInt::from(*self)
    }
}

impl Int for BigInt {
    fn from_big(v: &BigInt) -> Option<Self> {
        Some(v.clone())
    }

    fn to_big(&self) -> BigInt {
        self.clone()
    }
}

/// Floor division; `None` when `den` is zero or the result is unrepresentable.
pub(crate) fn floor_div<Z: Int>(num: &Z, den: &Z) -> Option<Z> {
    if den.is_zero() {
        return None;
    }
    Some(num.div_floor(den))
}
