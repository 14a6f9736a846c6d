use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Real;

const LIMB_BITS: u32 = 64;
const LOG2_10: f64 = std::f64::consts::LOG2_10;
const LOG10_2: f64 = std::f64::consts::LOG10_2;

/// Working precision: the requested number of significant decimal digits
/// and the binary precision actually used to honour it.
///
/// Requested digits are mapped to `ceil(digits * log2(10))` bits rounded up
/// to whole 64-bit limbs, so the delivered precision is never below the
/// request and is usually somewhat above it. The unit roundoff is
/// `2^-bits`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrecisionContext {
    digits: u32,
    bits: u32,
}

impl PrecisionContext {
    /// Context for `digits` requested significant decimal digits.
    pub fn new(digits: u32) -> Result<Self> {
        if digits == 0 {
            return Err(Error::Precision("digits must be at least 1".into()));
        }
        let needed = (digits as f64 * LOG2_10).ceil() as u32;
        let bits = needed.div_ceil(LIMB_BITS) * LIMB_BITS;
        Ok(Self { digits, bits })
    }

    /// Context with an explicit binary precision. The nominal digit count
    /// is the number of decimal digits the bits guarantee.
    pub fn with_bits(bits: u32) -> Result<Self> {
        if bits < 2 {
            return Err(Error::Precision(format!("{bits} bits is below the minimum of 2")));
        }
        let digits = ((bits as f64 * LOG10_2).floor() as u32).max(1);
        Ok(Self { digits, bits })
    }

    /// IEEE 754 binary64, reported as the conventional "16-digit" precision.
    pub fn ieee_double() -> Self {
        Self { digits: 16, bits: 53 }
    }

    /// IEEE 754 binary32.
    pub fn ieee_single() -> Self {
        Self { digits: 7, bits: 24 }
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Unit roundoff `2^-bits` in the working scalar type.
    pub fn eps<R: Real>(&self) -> R {
        R::one(self).mul_pow2(-(self.bits as i32))
    }

    /// `log10` of the unit roundoff, exact up to f64 rounding.
    pub fn log10_eps(&self) -> f64 {
        -(self.bits as f64) * LOG10_2
    }

    /// Effective number of significant digits, `-log10(eps)`.
    pub fn n_mach(&self) -> f64 {
        -self.log10_eps()
    }

    /// Unit roundoff as an f64, or 0 when it underflows.
    pub fn eps_f64(&self) -> f64 {
        2f64.powi(-(self.bits as i32))
    }

    /// A context with `factor` times the requested digits.
    pub fn scaled(&self, factor: u32) -> Result<Self> {
        Self::new(self.digits * factor.max(1))
    }
}

impl fmt::Display for PrecisionContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} digits ({} bits, eps = 1e{:.2})", self.digits, self.bits, self.log10_eps())
    }
}
