//! Scalar abstractions.
//!
//! Every numerical routine in the crate is written against [`Real`], which
//! is implemented for `f32` and `f64`. The closed-form exponent formulas are
//! additionally available over exact rationals through [`ExactScalar`].

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_rational::Ratio;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type usable by the solver, the FFT engine and the diagnostics.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + rustfft::FftNum + Default + Display + LowerExp + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only for values the type cannot
    /// represent at all, which never happens for the finite constants used here.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize not representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `(x)_+ = max(x, 0)`.
    #[inline]
    fn pos_part(self) -> Self {
        if self > Self::zero() {
            self
        } else {
            Self::zero()
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Japanese bracket `⟨v⟩ = sqrt(1 + |v|²)`.
#[inline]
pub fn bracket<T: Real>(v: [T; 3]) -> T {
    (T::one() + v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[inline]
pub fn norm3<T: Real>(v: [T; 3]) -> T {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Ordered field in which the Schauder exponent formulas can be evaluated
/// exactly (rationals) or approximately (floats).
pub trait ExactScalar: Clone + PartialOrd + Debug + num_traits::Num + num_traits::Signed {
    fn ratio(num: i64, den: i64) -> Self;

    fn max_of(a: Self, b: Self) -> Self {
        if a >= b {
            a
        } else {
            b
        }
    }

    fn pos_part(self) -> Self {
        Self::max_of(self, Self::zero())
    }

    fn to_f64_approx(&self) -> f64;
}

impl ExactScalar for f64 {
    fn ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn to_f64_approx(&self) -> f64 {
        *self
    }
}

impl ExactScalar for f32 {
    fn ratio(num: i64, den: i64) -> Self {
        (num as f64 / den as f64) as f32
    }

    fn to_f64_approx(&self) -> f64 {
        *self as f64
    }
}

impl ExactScalar for Ratio<i64> {
    fn ratio(num: i64, den: i64) -> Self {
        Ratio::new(num, den)
    }

    fn to_f64_approx(&self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

/// Exact rational used for closed-form exponent bookkeeping.
pub type Rational = Ratio<i64>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracket_at_origin_is_one() {
        assert_eq!(bracket([0.0f64; 3]), 1.0);
        assert!((bracket([1.0f32, 1.0, 1.0]) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn abs_resolves_to_float() {
        let x: f64 = -2.5;
        assert_eq!(Real::pos_part(x), 0.0);
        assert_eq!(x.abs(), 2.5);
    }

    #[test]
    fn rational_max_and_pos_part() {
        let a = Rational::ratio(-26, 3);
        let b = Rational::ratio(2, 9);
        assert_eq!(Rational::max_of(a, b), b);
        assert_eq!(ExactScalar::pos_part(a), Rational::ratio(0, 1));
    }
}
