//! Exact interval and piece arithmetic on the unit interval.
//!
//! Coordinates are arbitrary-precision rationals. A [`Piece`] is kept in a
//! canonical form: intervals sorted, pairwise disjoint, touching intervals
//! merged and zero-width intervals dropped, so structural equality is
//! point-set equality up to measure zero.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};

/// Exact rational scalar used for every coordinate and every exact value.
pub type Scalar = BigRational;

/// Shorthand for the rational `num/den`.
pub fn rat(num: i64, den: i64) -> Scalar {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(v: i64) -> Scalar {
    BigRational::from_integer(BigInt::from(v))
}

/// Parses `"p/q"` or `"p"` into a rational in lowest terms.
pub fn parse_scalar(s: &str) -> Result<Scalar> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational literal: {s:?}"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(Error::Parse(format!("zero denominator in {s:?}")));
            }
            Ok(BigRational::new(p, q))
        }
        None => Ok(BigRational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

/// Formats a rational as `"p/q"` (or `"p"` for integers), lowest terms, `q > 0`.
pub fn format_scalar(v: &Scalar) -> String {
    v.to_string()
}

/// Lossy conversion used only where a real-valued view is wanted.
pub fn to_f64(v: &Scalar) -> f64 {
    num_traits::ToPrimitive::to_f64(v).unwrap_or(f64::NAN)
}

/// Exact comparison by cross-multiplication; cheaper than `Ord` on
/// `BigRational`, which expands continued fractions.
pub fn cmp_scalar(a: &Scalar, b: &Scalar) -> std::cmp::Ordering {
    (a.numer() * b.denom()).cmp(&(b.numer() * a.denom()))
}

/// Serde adapter storing a [`Scalar`] as its `"p/q"` string.
pub mod scalar_str {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Scalar, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_scalar(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Scalar, D::Error> {
        let s = String::deserialize(d)?;
        parse_scalar(&s).map_err(serde::de::Error::custom)
    }
}

/// A closed subinterval `[left, right]` of `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    left: Scalar,
    right: Scalar,
}

impl Interval {
    pub fn new(left: Scalar, right: Scalar) -> Result<Self> {
        if left.is_negative() || right > Scalar::one() || left > right {
            return Err(invalid(format!(
                "interval [{left}, {right}] must satisfy 0 <= left <= right <= 1"
            )));
        }
        Ok(Self { left, right })
    }

    pub fn unit() -> Self {
        Self {
            left: Scalar::zero(),
            right: Scalar::one(),
        }
    }

    pub fn left(&self) -> &Scalar {
        &self.left
    }

    pub fn right(&self) -> &Scalar {
        &self.right
    }

    pub fn width(&self) -> Scalar {
        &self.right - &self.left
    }

    pub fn is_empty(&self) -> bool {
        self.left == self.right
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.left, self.right)
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [format_scalar(&self.left), format_scalar(&self.right)].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [l, r] = <[String; 2]>::deserialize(d)?;
        let l = parse_scalar(&l).map_err(serde::de::Error::custom)?;
        let r = parse_scalar(&r).map_err(serde::de::Error::custom)?;
        Interval::new(l, r).map_err(serde::de::Error::custom)
    }
}

/// A finite union of disjoint intervals, in canonical form.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Piece {
    intervals: Vec<Interval>,
}

impl Piece {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn unit() -> Self {
        Self {
            intervals: vec![Interval::unit()],
        }
    }

    pub fn from_interval(iv: Interval) -> Self {
        Self::normalize(vec![iv])
    }

    pub fn from_bounds(left: Scalar, right: Scalar) -> Result<Self> {
        Ok(Self::from_interval(Interval::new(left, right)?))
    }

    /// Sorts, merges overlapping or touching intervals and drops empty ones.
    pub fn normalize(mut raw: Vec<Interval>) -> Self {
        raw.retain(|iv| !iv.is_empty());
        raw.sort_by(|a, b| a.left.cmp(&b.left).then_with(|| a.right.cmp(&b.right)));
        let mut out: Vec<Interval> = Vec::with_capacity(raw.len());
        for iv in raw {
            match out.last_mut() {
                Some(last) if iv.left <= last.right => {
                    if iv.right > last.right {
                        last.right = iv.right;
                    }
                }
                _ => out.push(iv),
            }
        }
        Self { intervals: out }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn width(&self) -> Scalar {
        self.intervals
            .iter()
            .map(Interval::width)
            .fold(Scalar::zero(), |a, w| a + w)
    }

    pub fn union(&self, other: &Piece) -> Piece {
        let mut all = self.intervals.clone();
        all.extend(other.intervals.iter().cloned());
        Self::normalize(all)
    }
}

/// Width of a piece; exact.
pub fn piece_width(p: &Piece) -> Scalar {
    p.width()
}

impl fmt::Display for Piece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return write!(f, "{{}}");
        }
        for (i, iv) in self.intervals.iter().enumerate() {
            if i > 0 {
                write!(f, " u ")?;
            }
            write!(f, "{iv}")?;
        }
        Ok(())
    }
}

impl Serialize for Piece {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.intervals.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Piece {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(Piece::normalize(Vec::<Interval>::deserialize(d)?))
    }
}
