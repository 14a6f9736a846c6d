use std::fmt::{Debug, Display};
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::error::{Error, Result};
use crate::numerics::PrecisionContext;

/// Real scalar usable by every algorithm in the crate.
///
/// Values are bound to a [`PrecisionContext`]: constructors take the
/// context explicitly, and arbitrary-precision implementations refuse to
/// combine operands of different precision.
pub trait Real:
    Clone
    + Debug
    + Display
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + for<'a> Add<&'a Self, Output = Self>
    + for<'a> Sub<&'a Self, Output = Self>
    + for<'a> Mul<&'a Self, Output = Self>
    + for<'a> Div<&'a Self, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + for<'a> AddAssign<&'a Self>
    + for<'a> SubAssign<&'a Self>
    + for<'a> MulAssign<&'a Self>
    + for<'a> DivAssign<&'a Self>
{
    /// Checks that this scalar type can represent values at `ctx`.
    fn check_context(ctx: &PrecisionContext) -> Result<()>;

    /// The f64 value, rounded to the context precision.
    fn from_f64(x: f64, ctx: &PrecisionContext) -> Self;

    fn from_i64(n: i64, ctx: &PrecisionContext) -> Self;

    /// `num / den`, correctly rounded.
    fn from_ratio(num: i64, den: i64, ctx: &PrecisionContext) -> Self;

    /// Parses a decimal string (optionally signed, optionally with exponent).
    fn parse(s: &str, ctx: &PrecisionContext) -> Result<Self>;

    /// Decimal scientific notation with explicit sign and enough digits to
    /// read the value back exactly.
    fn to_decimal(&self) -> String;

    fn to_f64(&self) -> f64;

    /// Binary precision of this value.
    fn precision_bits(&self) -> u32;

    /// The same value re-rounded to `ctx`.
    fn with_context(&self, ctx: &PrecisionContext) -> Self;

    fn abs(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    /// `self * 2^k`, exact barring overflow.
    fn mul_pow2(&self, k: i32) -> Self;
    fn pi(ctx: &PrecisionContext) -> Self;
    fn is_finite(&self) -> bool;

    fn zero(ctx: &PrecisionContext) -> Self {
        Self::from_i64(0, ctx)
    }

    fn one(ctx: &PrecisionContext) -> Self {
        Self::from_i64(1, ctx)
    }

    /// Zero at the precision of `self`.
    fn zero_like(&self) -> Self {
        Self::zero(&self.context())
    }

    fn is_zero(&self) -> bool {
        *self == self.zero_like()
    }

    /// A context describing this value's precision.
    fn context(&self) -> PrecisionContext {
        PrecisionContext::with_bits(self.precision_bits()).expect("valid precision")
    }

    /// `log10 |self|` as an f64; finite even where `to_f64` underflows.
    fn log10_abs(&self) -> f64 {
        self.abs().ln().to_f64() / std::f64::consts::LN_10
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    /// `self^e` for a real exponent; `self` must be positive.
    fn powf(&self, e: &Self) -> Self {
        (self.ln() * e).exp()
    }
}

macro_rules! impl_real_primitive {
    ($t:ty, $bits:expr) => {
        impl Real for $t {
            fn check_context(ctx: &PrecisionContext) -> Result<()> {
                if ctx.bits() == $bits {
                    Ok(())
                } else {
                    Err(Error::PrecisionMismatch { expected: $bits, found: ctx.bits() })
                }
            }

            fn from_f64(x: f64, _ctx: &PrecisionContext) -> Self {
                <$t as FromPrimitive>::from_f64(x).unwrap_or(<$t>::NAN)
            }

            fn from_i64(n: i64, _ctx: &PrecisionContext) -> Self {
                <$t as FromPrimitive>::from_i64(n).unwrap_or(<$t>::NAN)
            }

            fn from_ratio(num: i64, den: i64, _ctx: &PrecisionContext) -> Self {
                // i64 -> f64 is exact for the small integers used here, so
                // the division is the only rounding.
                ((num as f64) / (den as f64)) as $t
            }

            fn parse(s: &str, _ctx: &PrecisionContext) -> Result<Self> {
                s.trim().parse::<$t>().map_err(|_| Error::Parse { input: s.to_string() })
            }

            fn to_decimal(&self) -> String {
                format!("{:+e}", self)
            }

            fn to_f64(&self) -> f64 {
                ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
            }

            fn precision_bits(&self) -> u32 {
                $bits
            }

            fn with_context(&self, _ctx: &PrecisionContext) -> Self {
                *self
            }

            fn abs(&self) -> Self {
                Float::abs(*self)
            }

            fn sqrt(&self) -> Self {
                Float::sqrt(*self)
            }

            fn exp(&self) -> Self {
                Float::exp(*self)
            }

            fn ln(&self) -> Self {
                Float::ln(*self)
            }

            fn sin(&self) -> Self {
                Float::sin(*self)
            }

            fn cos(&self) -> Self {
                Float::cos(*self)
            }

            fn powi(&self, n: i32) -> Self {
                Float::powi(*self, n)
            }

            fn mul_pow2(&self, k: i32) -> Self {
                *self * Float::powi(2.0 as $t, k)
            }

            fn pi(_ctx: &PrecisionContext) -> Self {
                <$t as num_traits::FloatConst>::PI()
            }

            fn is_finite(&self) -> bool {
                Float::is_finite(*self)
            }

            fn zero_like(&self) -> Self {
                0.0
            }

            fn context(&self) -> PrecisionContext {
                if $bits == 53 {
                    PrecisionContext::ieee_double()
                } else {
                    PrecisionContext::ieee_single()
                }
            }

            fn log10_abs(&self) -> f64 {
                Real::to_f64(&Float::abs(*self)).log10()
            }
        }
    };
}

impl_real_primitive!(f64, 53);
impl_real_primitive!(f32, 24);
