use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;

use crate::error::{Error, Result};
use crate::numerics::{PrecisionContext, Real};

/// Largest precision accepted; far beyond anything an ODE solve can use.
const MAX_BITS: u32 = 1 << 24;

/// Arbitrary-precision binary float, correctly rounded to nearest-even.
///
/// Every value carries its precision. Arithmetic between values of
/// different precision panics instead of silently promoting.
#[derive(Clone, PartialEq, PartialOrd)]
pub struct BigFloat(Float);

impl BigFloat {
    pub fn from_float(value: Float) -> Self {
        Self(value)
    }

    pub fn as_float(&self) -> &Float {
        &self.0
    }

    pub fn into_float(self) -> Float {
        self.0
    }

    #[inline]
    fn check(&self, other: &Self) {
        if self.0.prec() != other.0.prec() {
            panic!(
                "{}",
                Error::PrecisionMismatch { expected: self.0.prec(), found: other.0.prec() }
            );
        }
    }

    fn unary(&self, f: impl FnOnce(Float) -> Float) -> Self {
        Self(f(self.0.clone()))
    }
}

impl fmt::Debug for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BigFloat({}, {} bits)", self.to_decimal(), self.0.prec())
    }
}

impl fmt::Display for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal())
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $assign_trait:ident, $assign_method:ident) => {
        impl $trait for BigFloat {
            type Output = BigFloat;
            #[inline]
            fn $method(self, rhs: BigFloat) -> BigFloat {
                self.check(&rhs);
                BigFloat($trait::$method(self.0, rhs.0))
            }
        }

        impl<'a> $trait<&'a BigFloat> for BigFloat {
            type Output = BigFloat;
            #[inline]
            fn $method(self, rhs: &'a BigFloat) -> BigFloat {
                self.check(rhs);
                BigFloat($trait::$method(self.0, &rhs.0))
            }
        }

        impl<'a, 'b> $trait<&'b BigFloat> for &'a BigFloat {
            type Output = BigFloat;
            #[inline]
            fn $method(self, rhs: &'b BigFloat) -> BigFloat {
                self.check(rhs);
                BigFloat(Float::with_val(self.0.prec(), $trait::$method(&self.0, &rhs.0)))
            }
        }

        impl $assign_trait for BigFloat {
            #[inline]
            fn $assign_method(&mut self, rhs: BigFloat) {
                self.check(&rhs);
                $assign_trait::$assign_method(&mut self.0, rhs.0);
            }
        }

        impl<'a> $assign_trait<&'a BigFloat> for BigFloat {
            #[inline]
            fn $assign_method(&mut self, rhs: &'a BigFloat) {
                self.check(rhs);
                $assign_trait::$assign_method(&mut self.0, &rhs.0);
            }
        }
    };
}

binop!(Add, add, AddAssign, add_assign);
binop!(Sub, sub, SubAssign, sub_assign);
binop!(Mul, mul, MulAssign, mul_assign);
binop!(Div, div, DivAssign, div_assign);

impl Neg for BigFloat {
    type Output = BigFloat;
    fn neg(self) -> BigFloat {
        BigFloat(-self.0)
    }
}

impl<'a> Neg for &'a BigFloat {
    type Output = BigFloat;
    fn neg(self) -> BigFloat {
        BigFloat(-self.0.clone())
    }
}

impl Real for BigFloat {
    fn check_context(ctx: &PrecisionContext) -> Result<()> {
        if ctx.bits() > MAX_BITS {
            return Err(Error::Precision(format!("{} bits exceeds {MAX_BITS}", ctx.bits())));
        }
        Ok(())
    }

    fn from_f64(x: f64, ctx: &PrecisionContext) -> Self {
        Self(Float::with_val(ctx.bits(), x))
    }

    fn from_i64(n: i64, ctx: &PrecisionContext) -> Self {
        Self(Float::with_val(ctx.bits(), n))
    }

    fn from_ratio(num: i64, den: i64, ctx: &PrecisionContext) -> Self {
        let q = rug::Rational::from((num, den));
        Self(Float::with_val(ctx.bits(), &q))
    }

    fn parse(s: &str, ctx: &PrecisionContext) -> Result<Self> {
        let parsed = Float::parse(s.trim()).map_err(|_| Error::Parse { input: s.to_string() })?;
        Ok(Self(Float::with_val(ctx.bits(), parsed)))
    }

    fn to_decimal(&self) -> String {
        let (neg, digits, exp) = self.0.to_sign_string_exp(10, None);
        let sign = if neg { '-' } else { '+' };
        match exp {
            None => {
                if self.0.is_zero() {
                    format!("{sign}0e0")
                } else {
                    format!("{sign}{digits}")
                }
            }
            Some(e) => {
                let digits = digits.trim_end_matches('0');
                let (head, tail) = digits.split_at(1);
                if tail.is_empty() {
                    format!("{sign}{head}e{}", e - 1)
                } else {
                    format!("{sign}{head}.{tail}e{}", e - 1)
                }
            }
        }
    }

    fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }

    fn precision_bits(&self) -> u32 {
        self.0.prec()
    }

    fn with_context(&self, ctx: &PrecisionContext) -> Self {
        Self(Float::with_val(ctx.bits(), &self.0))
    }

    fn abs(&self) -> Self {
        self.unary(Float::abs)
    }

    fn sqrt(&self) -> Self {
        self.unary(Float::sqrt)
    }

    fn exp(&self) -> Self {
        self.unary(Float::exp)
    }

    fn ln(&self) -> Self {
        self.unary(Float::ln)
    }

    fn sin(&self) -> Self {
        self.unary(Float::sin)
    }

    fn cos(&self) -> Self {
        self.unary(Float::cos)
    }

    fn powi(&self, n: i32) -> Self {
        self.unary(|x| x.pow(n))
    }

    fn mul_pow2(&self, k: i32) -> Self {
        self.unary(|x| x << k)
    }

    fn pi(ctx: &PrecisionContext) -> Self {
        Self(Float::with_val(ctx.bits(), Constant::Pi))
    }

    fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    fn zero_like(&self) -> Self {
        Self(Float::new(self.0.prec()))
    }

    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    fn log10_abs(&self) -> f64 {
        let (mantissa, exp) = self.0.to_f64_exp();
        mantissa.abs().log10() + exp as f64 * std::f64::consts::LOG10_2
    }
}

impl BigFloat {
    /// Total order used for sorting; NaN sorts last.
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        self.partial_cmp(other).unwrap_or(Ordering::Greater)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(d: u32) -> PrecisionContext {
        PrecisionContext::new(d).unwrap()
    }

    #[test]
    fn decimal_round_trip_is_identity() {
        let c = ctx(50);
        let third = BigFloat::from_ratio(1, 3, &c);
        let s = third.to_decimal();
        assert!(s.starts_with("+3.333"), "{s}");
        assert_eq!(BigFloat::parse(&s, &c).unwrap(), third);
        let neg = -BigFloat::pi(&c).mul_pow2(-700);
        assert_eq!(BigFloat::parse(&neg.to_decimal(), &c).unwrap(), neg);
        let zero = BigFloat::zero(&c);
        assert_eq!(zero.to_decimal(), "+0e0");
        assert_eq!(BigFloat::parse("+0e0", &c).unwrap(), zero);
        assert_eq!(BigFloat::from_i64(5, &c).to_decimal(), "+5e0");
    }

    #[test]
    #[should_panic(expected = "precision mismatch")]
    fn mixing_contexts_panics() {
        let a = BigFloat::one(&ctx(20));
        let b = BigFloat::one(&ctx(40));
        let _ = a + b;
    }

    #[test]
    fn pythagoras_and_log10() {
        let c = ctx(30);
        let three = BigFloat::from_i64(3, &c);
        let four = BigFloat::from_i64(4, &c);
        let five = (&three * &three + &four * &four).sqrt();
        assert_eq!(five, BigFloat::from_i64(5, &c));
        let tiny = BigFloat::one(&c).mul_pow2(-1408);
        assert!((tiny.log10_abs() + 1408.0 * std::f64::consts::LOG10_2).abs() < 1e-9);
        assert_eq!(tiny.to_f64(), 0.0);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(BigFloat::parse("1.2.3", &ctx(10)).is_err());
    }
}
