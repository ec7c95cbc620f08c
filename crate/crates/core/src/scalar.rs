//! Scalar abstraction shared by every probability computation.
//!
//! Everything that manipulates probabilities is generic over [`Scalar`]. The
//! exact instantiation ([`crate::Rational`]) decides zero-leakage questions
//! without tolerance; `f64` is available for quick approximate runs.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};

/// Field-like number type used for probabilities and costs.
pub trait Scalar: Clone + Debug + PartialOrd + Num + Signed + Send + Sync + 'static {
    /// True when equality and zero tests are decided exactly.
    const EXACT: bool;

    fn from_ratio(num: i64, den: i64) -> Self;

    /// Zero test. Exact for rationals, tolerance-based for floats.
    fn is_negligible(&self) -> bool;

    fn to_f64(&self) -> f64;

    /// Parses `"a/b"`, an integer, or a finite decimal such as `"0.125"`.
    fn parse(text: &str) -> Option<Self>;

    /// Textual form accepted by [`Scalar::parse`].
    fn render(&self) -> String;

    fn from_count(n: usize) -> Self {
        Self::from_ratio(n as i64, 1)
    }

    fn approx_eq(&self, other: &Self) -> bool {
        (self.clone() - other.clone()).is_negligible()
    }

    /// `self >= other`, with the float instantiation allowing for rounding.
    fn at_least(&self, other: &Self) -> bool {
        *self >= *other || self.approx_eq(other)
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn is_negligible(&self) -> bool {
        self.is_zero()
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        if let Some((n, d)) = text.split_once('/') {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            return Some(BigRational::new(n, d));
        }
        if let Some((whole, frac)) = text.split_once('.') {
            let negative = whole.starts_with('-');
            let whole = whole.trim_start_matches(['-', '+']);
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            let whole: BigInt = if whole.is_empty() { BigInt::zero() } else { whole.parse().ok()? };
            let scale = num_traits::pow(BigInt::from(10), frac.len());
            let frac: BigInt = frac.parse().ok()?;
            let value = BigRational::new(whole * &scale + frac, scale);
            return Some(if negative { -value } else { value });
        }
        let n: BigInt = text.parse().ok()?;
        Some(BigRational::from_integer(n))
    }

    fn render(&self) -> String {
        if self.denom().is_one() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn is_negligible(&self) -> bool {
        self.abs() <= 1e-9
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn parse(text: &str) -> Option<Self> {
        match text.trim().split_once('/') {
            Some((n, d)) => {
                let d: f64 = d.trim().parse().ok()?;
                if d == 0.0 {
                    return None;
                }
                Some(n.trim().parse::<f64>().ok()? / d)
            }
            None => text.trim().parse().ok(),
        }
    }

    fn render(&self) -> String {
        format!("{self}")
    }
}

pub(crate) fn sum<T: Scalar, I: IntoIterator<Item = T>>(items: I) -> T {
    items.into_iter().fold(T::zero(), |acc, v| acc + v)
}

/// Serde adapters writing rationals as `"a/b"` strings.
pub mod as_text {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    use super::Scalar;
    use crate::Rational;

    pub fn serialize<S: Serializer>(v: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.render())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(d)?;
        Rational::parse(&text).ok_or_else(|| D::Error::custom(format!("not a rational: {text:?}")))
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                seq.serialize_element(&x.render())?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
            Vec::<String>::deserialize(d)?
                .into_iter()
                .map(|t| Rational::parse(&t).ok_or_else(|| D::Error::custom(format!("not a rational: {t:?}"))))
                .collect()
        }
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(x) => s.serialize_some(&x.render()),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
            Option::<String>::deserialize(d)?
                .map(|t| Rational::parse(&t).ok_or_else(|| D::Error::custom(format!("not a rational: {t:?}"))))
                .transpose()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    #[test]
    fn parses_fractions_integers_and_decimals() {
        assert_eq!(Rational::parse("3/8").unwrap(), Rational::from_ratio(3, 8));
        assert_eq!(Rational::parse(" 6/16 ").unwrap(), Rational::from_ratio(3, 8));
        assert_eq!(Rational::parse("2").unwrap(), Rational::from_ratio(2, 1));
        assert_eq!(Rational::parse("0.1").unwrap(), Rational::from_ratio(1, 10));
        assert_eq!(Rational::parse("-1.25").unwrap(), Rational::from_ratio(-5, 4));
        assert!(Rational::parse("1/0").is_none());
        assert!(Rational::parse("abc").is_none());
        assert!(Rational::parse("1.").is_none());
    }

    #[test]
    fn renders_reduced() {
        assert_eq!(Rational::from_ratio(10, 8).render(), "5/4");
        assert_eq!(Rational::from_ratio(4, 4).render(), "1");
        assert_eq!(Rational::from_ratio(0, 7).render(), "0");
    }

    #[test]
    fn float_tolerance() {
        assert!((0.1f64 + 0.2 - 0.3).is_negligible());
        assert!(f64::from_ratio(1, 3).approx_eq(&(1.0 / 3.0)));
        assert_eq!(f64::parse("3/8"), Some(0.375));
    }
}
