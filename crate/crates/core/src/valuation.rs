//! The eval/cut valuation abstraction and the exact piecewise-constant family.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{
    cmp_scalar, format_scalar, int, parse_scalar, rat, scalar_str, Piece, Scalar,
};
use crate::valuetree::TreeSpec;

/// Numeric type a valuation reports values in.
///
/// Piecewise-constant valuations are exact ([`Scalar`]); balanced value trees
/// are irrational-valued and report `f64`.
pub trait Quantity: Clone + PartialEq + PartialOrd + Debug {
    fn nothing() -> Self;
    fn plus(&self, other: &Self) -> Self;
    /// `self / width`, the density of mass `self` spread over `width`.
    fn per_width(&self, width: &Scalar) -> Self;
    fn to_f64(&self) -> f64;
    fn encode(&self) -> String;
    fn decode(s: &str) -> Result<Self>;
}

impl Quantity for Scalar {
    fn nothing() -> Self {
        Zero::zero()
    }
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn per_width(&self, width: &Scalar) -> Self {
        self / width
    }
    fn to_f64(&self) -> f64 {
        crate::geometry::to_f64(self)
    }
    fn encode(&self) -> String {
        format_scalar(self)
    }
    fn decode(s: &str) -> Result<Self> {
        parse_scalar(s)
    }
}

impl Quantity for f64 {
    fn nothing() -> Self {
        0.0
    }
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn per_width(&self, width: &Scalar) -> Self {
        self / crate::geometry::to_f64(width)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn encode(&self) -> String {
        // Shortest round-tripping representation.
        format!("{self:?}")
    }
    fn decode(s: &str) -> Result<Self> {
        s.trim()
            .parse()
            .map_err(|_| Error::Parse(format!("not a real literal: {s:?}")))
    }
}

/// A valuation over `[0, 1]` reachable only through Robertson-Webb queries.
///
/// Implementations must be non-negative, additive, divisible and normalized.
pub trait Valuation {
    type Value: Quantity;

    /// Value of `[x, y]`; requires `0 <= x <= y <= 1`.
    fn eval(&self, x: &Scalar, y: &Scalar) -> Result<Self::Value>;

    /// Smallest `y` with `eval(x, y) == r`, or `None` when `eval(x, 1) < r`.
    fn cut(&self, x: &Scalar, r: &Self::Value) -> Result<Option<Scalar>>;
}

impl<V: Valuation + ?Sized> Valuation for &V {
    type Value = V::Value;
    fn eval(&self, x: &Scalar, y: &Scalar) -> Result<Self::Value> {
        (**self).eval(x, y)
    }
    fn cut(&self, x: &Scalar, r: &Self::Value) -> Result<Option<Scalar>> {
        (**self).cut(x, r)
    }
}

impl<V: Valuation + ?Sized> Valuation for Box<V> {
    type Value = V::Value;
    fn eval(&self, x: &Scalar, y: &Scalar) -> Result<Self::Value> {
        (**self).eval(x, y)
    }
    fn cut(&self, x: &Scalar, r: &Self::Value) -> Result<Option<Scalar>> {
        (**self).cut(x, r)
    }
}

/// Value of a piece: the sum of its interval values (additivity).
pub fn value_of_piece<V: Valuation + ?Sized>(v: &V, p: &Piece) -> Result<V::Value> {
    let mut acc = V::Value::nothing();
    for iv in p.intervals() {
        acc = acc.plus(&v.eval(iv.left(), iv.right())?);
    }
    Ok(acc)
}

/// `v(P) / |P|`; zero-width pieces are rejected.
pub fn density_of_piece<V: Valuation + ?Sized>(v: &V, p: &Piece) -> Result<V::Value> {
    let w = p.width();
    if w.is_zero() {
        return Err(invalid("density of a zero-width piece is undefined"));
    }
    Ok(value_of_piece(v, p)?.per_width(&w))
}

pub(crate) fn check_query_range(x: &Scalar, y: &Scalar) -> Result<()> {
    if x.is_negative() || y > &Scalar::one() || x > y {
        return Err(invalid(format!("eval({x}, {y}) needs 0 <= x <= y <= 1")));
    }
    Ok(())
}

/// Lower and upper density bound; `beta == None` stands for +infinity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensityBounds {
    alpha: Scalar,
    beta: Option<Scalar>,
}

impl DensityBounds {
    pub fn new(alpha: Scalar, beta: Option<Scalar>) -> Result<Self> {
        let one = Scalar::one();
        if alpha.is_negative() || alpha > one || beta.as_ref().is_some_and(|b| *b < one) {
            return Err(invalid("density bounds need 0 <= alpha <= 1 <= beta"));
        }
        Ok(Self { alpha, beta })
    }

    /// `(0, 2)`: the densities the dual reduction starts from.
    pub fn zero_two() -> Self {
        Self {
            alpha: int(0),
            beta: Some(int(2)),
        }
    }

    /// `(1/2, inf)`: what duals of `(0, 2)`-dense valuations satisfy.
    pub fn half_unbounded() -> Self {
        Self {
            alpha: rat(1, 2),
            beta: None,
        }
    }

    pub fn alpha(&self) -> &Scalar {
        &self.alpha
    }

    pub fn beta(&self) -> Option<&Scalar> {
        self.beta.as_ref()
    }

    pub fn contains(&self, density: &Scalar) -> bool {
        *density >= self.alpha && self.beta.as_ref().is_none_or(|b| density <= b)
    }
}

/// A step-density valuation with exact rational breakpoints and densities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PiecewiseConstant {
    /// Right ends of the segments, strictly ascending, last is 1.
    ends: Vec<Scalar>,
    densities: Vec<Scalar>,
    /// Mass of `[0, ends[i]]`.
    cumulative: Vec<Scalar>,
}

impl PiecewiseConstant {
    /// Builds from `(end, density)` segments; normalization is checked exactly.
    pub fn new(segments: Vec<(Scalar, Scalar)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(invalid(
                "a piecewise-constant valuation needs at least one segment",
            ));
        }
        let mut ends = Vec::with_capacity(segments.len());
        let mut densities = Vec::with_capacity(segments.len());
        let mut cumulative = Vec::with_capacity(segments.len());
        let mut start = Scalar::zero();
        let mut mass = Scalar::zero();
        for (i, (end, density)) in segments.into_iter().enumerate() {
            if end <= start {
                return Err(invalid(format!(
                    "segment {i}: end {end} must exceed the previous end {start}"
                )));
            }
            if density.is_negative() {
                return Err(invalid(format!("segment {i}: negative density {density}")));
            }
            mass += &density * (&end - &start);
            cumulative.push(mass.clone());
            start = end.clone();
            ends.push(end);
            densities.push(density);
        }
        if !start.is_one() {
            return Err(invalid(format!("final segment must end at 1, not {start}")));
        }
        if !mass.is_one() {
            return Err(invalid(format!("total mass is {mass}, expected 1")));
        }
        Ok(Self {
            ends,
            densities,
            cumulative,
        })
    }

    pub fn uniform() -> Self {
        Self::new(vec![(int(1), int(1))]).expect("uniform is normalized")
    }

    pub fn len(&self) -> usize {
        self.ends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ends.is_empty()
    }

    /// `(start, end, density)` for each segment, left to right.
    pub fn segments(&self) -> impl Iterator<Item = (Scalar, &Scalar, &Scalar)> + '_ {
        let starts = std::iter::once(Scalar::zero()).chain(self.ends.iter().cloned());
        starts
            .zip(self.ends.iter().zip(&self.densities))
            .map(|(s, (e, d))| (s, e, d))
    }

    pub fn densities(&self) -> &[Scalar] {
        &self.densities
    }

    pub fn ends(&self) -> &[Scalar] {
        &self.ends
    }

    pub fn is_positive(&self) -> bool {
        self.densities.iter().all(Signed::is_positive)
    }

    /// Every subinterval's density lies in `bounds`; for a step function the
    /// extremes are attained on single segments.
    pub fn verify_dense(&self, bounds: &DensityBounds) -> bool {
        self.densities.iter().all(|d| bounds.contains(d))
    }

    /// Cumulative mass `v(0, x)`.
    pub fn mass_until(&self, x: &Scalar) -> Scalar {
        self.mass_until_frac(x).reduce()
    }

    fn mass_until_frac(&self, x: &Scalar) -> Frac {
        let i = self.ends.partition_point(|e| cmp_scalar(e, x).is_lt());
        if i >= self.ends.len() {
            return Frac::of(&Scalar::one());
        }
        if i == 0 {
            return Frac::of(&self.densities[0]).mul(&Frac::of(x));
        }
        let along = Frac::of(x).sub(&Frac::of(&self.ends[i - 1]));
        Frac::of(&self.cumulative[i - 1]).add(&Frac::of(&self.densities[i]).mul(&along))
    }
}

/// Unreduced fraction with a positive denominator. The query hot paths
/// combine several operations and normalize once, since the gcd in every
/// `BigRational` operation dominates their cost.
struct Frac {
    num: BigInt,
    den: BigInt,
}

impl Frac {
    fn of(s: &Scalar) -> Self {
        Self {
            num: s.numer().clone(),
            den: s.denom().clone(),
        }
    }

    fn add(&self, o: &Frac) -> Frac {
        if self.den == o.den {
            return Frac {
                num: &self.num + &o.num,
                den: self.den.clone(),
            };
        }
        Frac {
            num: &self.num * &o.den + &o.num * &self.den,
            den: &self.den * &o.den,
        }
    }

    fn sub(&self, o: &Frac) -> Frac {
        if self.den == o.den {
            return Frac {
                num: &self.num - &o.num,
                den: self.den.clone(),
            };
        }
        Frac {
            num: &self.num * &o.den - &o.num * &self.den,
            den: &self.den * &o.den,
        }
    }

    fn mul(&self, o: &Frac) -> Frac {
        Frac {
            num: &self.num * &o.num,
            den: &self.den * &o.den,
        }
    }

    /// `self / o` for positive `o`.
    fn div_positive(&self, o: &Frac) -> Frac {
        Frac {
            num: &self.num * &o.den,
            den: &self.den * &o.num,
        }
    }

    fn gt_scalar(&self, s: &Scalar) -> bool {
        &self.num * s.denom() > s.numer() * &self.den
    }

    fn gt_one(&self) -> bool {
        self.num > self.den
    }

    fn reduce(self) -> Scalar {
        Scalar::new(self.num, self.den)
    }
}

/// Exact eval on a piecewise-constant valuation.
pub fn eval(v: &PiecewiseConstant, x: &Scalar, y: &Scalar) -> Result<Scalar> {
    check_query_range(x, y)?;
    Ok(v.mass_until_frac(y).sub(&v.mass_until_frac(x)).reduce())
}

/// Exact cut on a piecewise-constant valuation; smallest answer wins.
pub fn cut(v: &PiecewiseConstant, x: &Scalar, r: &Scalar) -> Result<Option<Scalar>> {
    if x.is_negative() || x > &Scalar::one() {
        return Err(invalid(format!("cut position {x} outside [0, 1]")));
    }
    if r.is_negative() {
        return Err(invalid(format!("cut mass {r} is negative")));
    }
    let target = v.mass_until_frac(x).add(&Frac::of(r));
    if target.gt_one() {
        return Ok(None);
    }
    // First segment whose right end carries cumulative mass >= target.
    let i = v.cumulative.partition_point(|c| target.gt_scalar(c));
    let y = if i == 0 {
        if target.num.is_zero() {
            Scalar::zero()
        } else {
            target.div_positive(&Frac::of(&v.densities[0])).reduce()
        }
    } else {
        let rest = target.sub(&Frac::of(&v.cumulative[i - 1]));
        if rest.num.is_zero() {
            v.ends[i - 1].clone()
        } else {
            // cumulative[i - 1] < target <= cumulative[i], so this segment has positive density.
            Frac::of(&v.ends[i - 1])
                .add(&rest.div_positive(&Frac::of(&v.densities[i])))
                .reduce()
        }
    };
    Ok(Some(if cmp_scalar(&y, x).is_lt() {
        x.clone()
    } else {
        y
    }))
}

impl Valuation for PiecewiseConstant {
    type Value = Scalar;

    fn eval(&self, x: &Scalar, y: &Scalar) -> Result<Scalar> {
        eval(self, x, y)
    }

    fn cut(&self, x: &Scalar, r: &Scalar) -> Result<Option<Scalar>> {
        cut(self, x, r)
    }
}

#[derive(Serialize, Deserialize)]
struct SegmentWire {
    #[serde(with = "scalar_str")]
    end: Scalar,
    #[serde(with = "scalar_str")]
    density: Scalar,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum PiecewiseWire {
    PiecewiseConstant { segments: Vec<SegmentWire> },
}

impl Serialize for PiecewiseConstant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PiecewiseWire::PiecewiseConstant {
            segments: self
                .ends
                .iter()
                .zip(&self.densities)
                .map(|(e, d)| SegmentWire {
                    end: e.clone(),
                    density: d.clone(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PiecewiseConstant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let PiecewiseWire::PiecewiseConstant { segments } = PiecewiseWire::deserialize(d)?;
        PiecewiseConstant::new(segments.into_iter().map(|s| (s.end, s.density)).collect())
            .map_err(serde::de::Error::custom)
    }
}

/// Any valuation a JSON file may describe.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ValuationSpec {
    PiecewiseConstant { segments: Vec<SpecSegment> },
    BalancedValueTree(TreeSpec),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpecSegment {
    #[serde(with = "scalar_str")]
    pub end: Scalar,
    #[serde(with = "scalar_str")]
    pub density: Scalar,
}

impl ValuationSpec {
    /// The exact valuation, if this spec describes one.
    pub fn to_piecewise(&self) -> Result<PiecewiseConstant> {
        match self {
            ValuationSpec::PiecewiseConstant { segments } => PiecewiseConstant::new(
                segments
                    .iter()
                    .map(|s| (s.end.clone(), s.density.clone()))
                    .collect(),
            ),
            ValuationSpec::BalancedValueTree(_) => Err(invalid(
                "balanced value trees are real-valued; an exact valuation is required",
            )),
        }
    }
}

impl From<&PiecewiseConstant> for ValuationSpec {
    fn from(v: &PiecewiseConstant) -> Self {
        ValuationSpec::PiecewiseConstant {
            segments: v
                .segments()
                .map(|(_, e, d)| SpecSegment {
                    end: e.clone(),
                    density: d.clone(),
                })
                .collect(),
        }
    }
}

const INITIAL_SPREAD: u32 = 16;
const TRIES_PER_SPREAD: u32 = 32;

/// Seeded random piecewise-constant valuation whose densities lie in `bounds`.
///
/// Breakpoints are distinct multiples of `1 / (8 * n_segments)`. Raw integer
/// densities are rescaled exactly to unit mass and rejected when they leave
/// `bounds`; after repeated rejections the raw range narrows toward uniform,
/// which is always feasible. With `positive` (or `alpha > 0`) every density is
/// strictly positive.
pub fn random_dense_valuation(
    n_segments: usize,
    bounds: &DensityBounds,
    positive: bool,
    seed: u64,
) -> Result<PiecewiseConstant> {
    if n_segments == 0 {
        return Err(invalid("need at least one segment"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = 8 * n_segments;
    let mut cuts: Vec<usize> = sample(&mut rng, grid - 1, n_segments - 1)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    cuts.sort_unstable();
    let ends: Vec<Scalar> = cuts
        .iter()
        .map(|&c| rat(c as i64, grid as i64))
        .chain(std::iter::once(int(1)))
        .collect();
    let widths: Vec<Scalar> = {
        let mut prev = Scalar::zero();
        ends.iter()
            .map(|e| {
                let w = e - &prev;
                prev = e.clone();
                w
            })
            .collect()
    };
    let mut allow_zero = !positive && bounds.alpha().is_zero();
    let mut spread = INITIAL_SPREAD;
    loop {
        for _ in 0..TRIES_PER_SPREAD {
            let lo = if allow_zero { 0 } else { 1 };
            let raw: Vec<Scalar> = (0..n_segments)
                .map(|_| int(rng.random_range(lo..=spread) as i64))
                .collect();
            let mass = raw
                .iter()
                .zip(&widths)
                .fold(Scalar::zero(), |acc, (d, w)| acc + d * w);
            if mass.is_zero() {
                continue;
            }
            let densities: Vec<Scalar> = raw.iter().map(|d| d / &mass).collect();
            if densities.iter().all(|d| bounds.contains(d)) {
                return PiecewiseConstant::new(ends.iter().cloned().zip(densities).collect());
            }
        }
        if spread == 1 {
            allow_zero = false;
        }
        spread = (spread / 2).max(1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_step() -> PiecewiseConstant {
        PiecewiseConstant::new(vec![(rat(1, 2), rat(3, 2)), (int(1), rat(1, 2))]).unwrap()
    }

    #[test]
    fn rejects_unnormalized() {
        let err = PiecewiseConstant::new(vec![(rat(1, 2), int(1)), (int(1), int(2))]).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
        assert!(PiecewiseConstant::new(vec![(rat(1, 2), int(2))]).is_err());
        assert!(PiecewiseConstant::new(vec![(rat(1, 2), int(1)), (rat(1, 2), int(1))]).is_err());
    }

    #[test]
    fn eval_argument_errors() {
        let v = PiecewiseConstant::uniform();
        assert!(eval(&v, &rat(1, 2), &rat(1, 4)).is_err());
        assert!(eval(&v, &int(0), &rat(5, 4)).is_err());
        assert_eq!(eval(&v, &int(0), &int(1)).unwrap(), int(1));
    }

    #[test]
    fn uniform_queries() {
        let v = PiecewiseConstant::uniform();
        assert_eq!(
            eval(&v, &rat(1, 5), &rat(3, 7)).unwrap(),
            rat(3, 7) - rat(1, 5)
        );
        assert_eq!(cut(&v, &rat(1, 5), &rat(1, 3)).unwrap(), Some(rat(8, 15)));
        assert_eq!(cut(&v, &rat(1, 2), &rat(3, 4)).unwrap(), None);
    }

    #[test]
    fn cut_prefers_smallest_answer_over_zero_density() {
        let v = PiecewiseConstant::new(vec![
            (rat(1, 4), int(2)),
            (rat(1, 2), int(0)),
            (int(1), int(1)),
        ])
        .unwrap();
        // Mass 1/2 is reached at 1/4 and stays flat through 1/2.
        assert_eq!(cut(&v, &int(0), &rat(1, 2)).unwrap(), Some(rat(1, 4)));
        // Starting inside the flat part, zero mass is reached immediately.
        assert_eq!(cut(&v, &rat(3, 8), &int(0)).unwrap(), Some(rat(3, 8)));
        assert_eq!(cut(&v, &rat(3, 8), &rat(1, 4)).unwrap(), Some(rat(3, 4)));
        assert!(!v.is_positive());
    }

    #[test]
    fn densities_of_pieces() {
        let v = two_step();
        assert_eq!(
            density_of_piece(&v, &Piece::from_bounds(int(0), rat(1, 2)).unwrap()).unwrap(),
            rat(3, 2)
        );
        assert_eq!(
            density_of_piece(&v, &Piece::from_bounds(rat(1, 2), int(1)).unwrap()).unwrap(),
            rat(1, 2)
        );
        assert!(density_of_piece(&v, &Piece::empty()).is_err());
        let u = PiecewiseConstant::uniform();
        assert_eq!(
            density_of_piece(&u, &Piece::from_bounds(rat(1, 9), rat(2, 7)).unwrap()).unwrap(),
            int(1)
        );
    }

    #[test]
    fn density_verification() {
        let v = two_step();
        assert!(PiecewiseConstant::uniform()
            .verify_dense(&DensityBounds::new(int(1), Some(int(1))).unwrap()));
        assert!(v.verify_dense(&DensityBounds::zero_two()));
        assert!(!v.verify_dense(&DensityBounds::new(int(1), None).unwrap()));
        assert!(DensityBounds::new(rat(3, 2), None).is_err());
        assert!(DensityBounds::new(int(0), Some(rat(1, 2))).is_err());
    }

    #[test]
    fn generator_single_segment_is_uniform() {
        for seed in 0..5 {
            let v = random_dense_valuation(1, &DensityBounds::zero_two(), true, seed).unwrap();
            assert_eq!(v, PiecewiseConstant::uniform());
        }
    }

    #[test]
    fn generator_respects_bounds() {
        let v = random_dense_valuation(8, &DensityBounds::zero_two(), true, 42).unwrap();
        assert_eq!(v.len(), 8);
        assert!(v.verify_dense(&DensityBounds::zero_two()));
        assert!(v.is_positive());
        let w = random_dense_valuation(8, &DensityBounds::half_unbounded(), false, 7).unwrap();
        assert!(w.densities().iter().all(|d| *d >= rat(1, 2)));
        assert_eq!(
            random_dense_valuation(8, &DensityBounds::zero_two(), true, 42).unwrap(),
            v
        );
    }

    #[test]
    fn json_format() {
        let v = two_step();
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(
            s,
            r#"{"type":"piecewise_constant","segments":[{"end":"1/2","density":"3/2"},{"end":"1","density":"1/2"}]}"#
        );
        let back: PiecewiseConstant = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        let bad = r#"{"type":"piecewise_constant","segments":[{"end":"1","density":"2"}]}"#;
        assert!(serde_json::from_str::<PiecewiseConstant>(bad).is_err());
    }
}
