//! Scalar abstractions.
//!
//! Feature math (quantization, training, filtering, metrics) is generic over
//! [`Scalar`], implemented for `f32` and `f64`. Timing math in the latency
//! simulator is generic over [`TimeScalar`], which additionally admits exact
//! rationals so first-packet sums carry no float drift.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar used for feature vectors and codebook entries.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossless-or-rounding conversion from `f64`.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    fn as_f32(self) -> f32 {
        self.to_f32().expect("Scalar converts to f32")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Time quantity used by the block scheduler and the latency simulator.
pub trait TimeScalar:
    Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count is representable")
    }

    /// Parses a decimal or `p/q` literal.
    fn parse_ms(s: &str) -> Option<Self>;

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }
}

impl TimeScalar for f64 {
    fn parse_ms(s: &str) -> Option<Self> {
        match s.split_once('/') {
            Some((p, q)) => Some(p.trim().parse::<f64>().ok()? / q.trim().parse::<f64>().ok()?),
            None => s.trim().parse().ok(),
        }
    }
}

impl TimeScalar for Ratio<i64> {
    fn parse_ms(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Some((p, q)) = s.split_once('/') {
            let q: i64 = q.trim().parse().ok()?;
            if q == 0 {
                return None;
            }
            return Some(Ratio::new(p.trim().parse().ok()?, q));
        }
        // Decimal literal: scale by the power of ten of its fractional part.
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 12 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let negative = int.starts_with('-');
        let den = 10i64.checked_pow(frac.len() as u32)?;
        let whole: i64 = if int.is_empty() || int == "-" { 0 } else { int.parse().ok()? };
        let frac_val: i64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
        let frac_val = if negative { -frac_val } else { frac_val };
        Some(Ratio::new(whole.checked_mul(den)?.checked_add(frac_val)?, den))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_parse() {
        assert_eq!(Ratio::<i64>::parse_ms("125"), Some(Ratio::from_integer(125)));
        assert_eq!(Ratio::<i64>::parse_ms("12.5"), Some(Ratio::new(25, 2)));
        assert_eq!(Ratio::<i64>::parse_ms("-0.25"), Some(Ratio::new(-1, 4)));
        assert_eq!(Ratio::<i64>::parse_ms("56/8"), Some(Ratio::new(7, 1)));
        assert_eq!(Ratio::<i64>::parse_ms("1/0"), None);
        assert_eq!(Ratio::<i64>::parse_ms("abc"), None);
    }

    #[test]
    fn float_parse() {
        assert_eq!(f64::parse_ms("0.5"), Some(0.5));
        assert_eq!(f64::parse_ms("1/4"), Some(0.25));
    }
}
