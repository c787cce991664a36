//! Scalar abstractions.
//!
//! Floating-point code is written against [`Real`], which both `f32` and
//! `f64` implement. Code that only needs ordered field arithmetic (the
//! address products and the case-1 enumeration oracle) asks for
//! [`OrderedField`] instead, so it can also run over exact rationals.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, Num, NumAssign, Signed, ToPrimitive};
use rustfft::FftNum;

/// Floating-point scalar used by the numerical routines.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Signed
    + FftNum
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; total for both supported types.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Real")
    }

    /// Conversion to `f64` for reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real values convert to f64")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize is representable in every Real")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Ordered field arithmetic, implemented by floats and exact rationals.
pub trait OrderedField: Clone + PartialOrd + Num + Signed + ToPrimitive + FromPrimitive + Debug {}

impl<T> OrderedField for T where T: Clone + PartialOrd + Num + Signed + ToPrimitive + FromPrimitive + Debug {}

/// Exact conversion of a binary floating value into a big rational.
///
/// Every finite `f64` is a dyadic rational, so this never rounds.
pub fn exact_rational(x: f64) -> Option<BigRational> {
    BigRational::from_float(x)
}

/// Convenience constructor for small exact rationals.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}
