//! Balanced value trees: ternary trees of depth `d = log3 n` whose edge labels
//! define a positive, (0,2)-dense valuation on `[0, 1]`.
//!
//! Every node value is the product of the labels on its root path. A
//! non-critical node has one heavy edge (`beta/3`) and two light edges
//! (`1/2 - beta/6`); a critical node (`D(u) * beta > 2`) has three `1/3`
//! edges, and so do all of its descendants. Leaves are uniform.
//!
//! Queries are answered by walking root-to-leaf paths through a
//! [`Labeling`], so the same engine serves eagerly built trees, the
//! adversary's partially revealed tree and its completions. Coordinates are
//! exact rationals with denominator `3^d`; values are `f64` products of
//! labels, and every value is assembled as a sum of positive terms so
//! narrow intervals keep full relative precision.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Interval, Piece, Scalar};
use crate::valuation::{value_of_piece, Valuation};

/// Smallest depth for which the label ranges hold (`1/3 <= beta/3 < 1/2`).
pub const GUARANTEE_MIN_K: u32 = 11;
/// Smallest depth the permissive mode accepts; below it labels go non-positive.
pub const PERMISSIVE_MIN_K: u32 = 4;
/// Largest depth that is materialized eagerly.
pub const EAGER_MAX_K: u32 = 11;
/// Log-space comparisons closer than this to their threshold are refused.
pub const AMBIGUITY_GUARD: f64 = 1e-9;

/// Depth, `beta = 2^(6 / ln n)` and the derived labels.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeParams {
    depth: u32,
    permissive: bool,
    ln_n: f64,
    beta: f64,
    ln_beta: f64,
    ln_light_density: f64,
}

impl TreeParams {
    /// `n = 3^k` leaves with `k >= 11`.
    pub fn new(k: u32) -> Result<Self> {
        if k < GUARANTEE_MIN_K {
            return Err(invalid(format!(
                "depth {k} is below {GUARANTEE_MIN_K}; use permissive mode for small trees"
            )));
        }
        Self::build(k, false)
    }

    /// Accepts `k >= 4`. For `k < 11` the heavy label exceeds `1/2` and the
    /// lower-bound argument does not apply; the tree is still a valid valuation.
    pub fn permissive(k: u32) -> Result<Self> {
        if k < PERMISSIVE_MIN_K {
            return Err(invalid(format!(
                "depth {k} makes light labels non-positive"
            )));
        }
        Self::build(k, true)
    }

    pub fn with_mode(k: u32, permissive: bool) -> Result<Self> {
        if permissive {
            Self::permissive(k)
        } else {
            Self::new(k)
        }
    }

    fn build(k: u32, permissive: bool) -> Result<Self> {
        let ln_n = k as f64 * 3f64.ln();
        let ln_beta = 6.0 * std::f64::consts::LN_2 / ln_n;
        let beta = ln_beta.exp();
        // ln(3/2 - beta/2) = ln(1 - (beta - 1)/2)
        let ln_light_density = (-(ln_beta.exp_m1()) / 2.0).ln_1p();
        let p = Self {
            depth: k,
            permissive,
            ln_n,
            beta,
            ln_beta,
            ln_light_density,
        };
        if !permissive && !(beta / 3.0 >= 1.0 / 3.0 && beta / 3.0 < 0.5) {
            return Err(Error::Internal(format!(
                "beta/3 = {} outside [1/3, 1/2)",
                beta / 3.0
            )));
        }
        Ok(p)
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn is_permissive(&self) -> bool {
        self.permissive
    }

    pub fn in_guarantee_regime(&self) -> bool {
        self.depth >= GUARANTEE_MIN_K
    }

    pub fn ln_n(&self) -> f64 {
        self.ln_n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn ln_beta(&self) -> f64 {
        self.ln_beta
    }

    /// `ln(3/2 - beta/2)`, the log density factor of a light edge.
    pub fn ln_light_density(&self) -> f64 {
        self.ln_light_density
    }

    pub fn heavy_label(&self) -> f64 {
        self.beta / 3.0
    }

    pub fn light_label(&self) -> f64 {
        0.5 - self.beta / 6.0
    }

    pub fn leaves(&self) -> BigUint {
        BigUint::from(3u32).pow(self.depth)
    }

    pub fn leaf_width(&self) -> Scalar {
        BigRational::new(BigInt::one(), BigInt::from(self.leaves()))
    }

    /// `(ln n)/6 - 1`: rich and critical leaves have more heavy edges than this.
    pub fn heavy_edge_floor(&self) -> f64 {
        self.ln_n / 6.0 - 1.0
    }

    /// Number of queries the adversary strategy is guaranteed to survive.
    pub fn adversary_threshold(&self) -> u32 {
        (self.heavy_edge_floor() / 2.0).floor().max(0.0) as u32
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Heavy,
    Light,
    /// The `1/3` edges below a critical node.
    Neutral,
}

/// The labels of a node's three child edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChildLabels {
    Critical,
    Split { heavy: u8 },
}

impl ChildLabels {
    pub fn kind(self, child: u8) -> EdgeKind {
        match self {
            ChildLabels::Critical => EdgeKind::Neutral,
            ChildLabels::Split { heavy } if heavy == child => EdgeKind::Heavy,
            ChildLabels::Split { .. } => EdgeKind::Light,
        }
    }

    pub fn label(self, params: &TreeParams, child: u8) -> f64 {
        match self.kind(child) {
            EdgeKind::Heavy => params.heavy_label(),
            EdgeKind::Light => params.light_label(),
            EdgeKind::Neutral => 1.0 / 3.0,
        }
    }

    /// `"HLL"`, `"LHL"`, `"LLH"` or `"NNN"`.
    pub fn code(self) -> String {
        (0..3)
            .map(|c| match self.kind(c) {
                EdgeKind::Heavy => 'H',
                EdgeKind::Light => 'L',
                EdgeKind::Neutral => 'N',
            })
            .collect()
    }

    pub fn parse(code: &str) -> Result<Self> {
        match code {
            "NNN" => Ok(ChildLabels::Critical),
            "HLL" => Ok(ChildLabels::Split { heavy: 0 }),
            "LHL" => Ok(ChildLabels::Split { heavy: 1 }),
            "LLH" => Ok(ChildLabels::Split { heavy: 2 }),
            _ => Err(Error::Parse(format!("bad label code {code:?}"))),
        }
    }
}

/// A node named by its base-3 digit string, with heavy/light/neutral edge
/// counts along the root path (`h`, `q`, `z`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NodePath {
    digits: Vec<u8>,
    heavy: u32,
    light: u32,
    neutral: u32,
}

impl NodePath {
    pub fn root() -> Self {
        Self {
            digits: Vec::new(),
            heavy: 0,
            light: 0,
            neutral: 0,
        }
    }

    pub fn child(&self, digit: u8, kind: EdgeKind) -> Self {
        let mut next = self.clone();
        next.digits.push(digit);
        match kind {
            EdgeKind::Heavy => next.heavy += 1,
            EdgeKind::Light => next.light += 1,
            EdgeKind::Neutral => next.neutral += 1,
        }
        next
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn depth(&self) -> usize {
        self.digits.len()
    }

    pub fn h(&self) -> u32 {
        self.heavy
    }

    pub fn q(&self) -> u32 {
        self.light
    }

    pub fn z(&self) -> u32 {
        self.neutral
    }

    /// Position among the `3^depth` nodes of its level.
    pub fn index(&self) -> BigUint {
        digits_to_index(&self.digits)
    }

    /// `I_u`: left end `index / 3^depth`, width `3^-depth`.
    pub fn interval(&self) -> Interval {
        let den = BigInt::from(BigUint::from(3u32).pow(self.depth() as u32));
        let left = BigInt::from(self.index());
        let right = &left + 1;
        Interval::new(
            BigRational::new(left, den.clone()),
            BigRational::new(right, den),
        )
        .expect("node intervals lie in [0, 1]")
    }

    pub fn digit_string(&self) -> String {
        self.digits.iter().map(|d| char::from(b'0' + d)).collect()
    }
}

pub(crate) fn digits_to_index(digits: &[u8]) -> BigUint {
    digits
        .iter()
        .fold(BigUint::zero(), |acc, &d| acc * 3u32 + d)
}

/// `D(u) = beta^h * (3/2 - beta/2)^q`.
pub fn density_from_counts(params: &TreeParams, h: u32, q: u32) -> f64 {
    (h as f64 * params.ln_beta() + q as f64 * params.ln_light_density()).exp()
}

/// `ln(D(u) * beta / 2)`; positive exactly for critical nodes.
pub fn critical_margin(params: &TreeParams, h: u32, q: u32) -> f64 {
    (h as f64 + 1.0) * params.ln_beta() + q as f64 * params.ln_light_density()
        - std::f64::consts::LN_2
}

/// `D(u) * beta > 2`, decided in log space with an ambiguity guard.
pub fn is_critical_counts(params: &TreeParams, h: u32, q: u32) -> Result<bool> {
    let margin = critical_margin(params, h, q);
    if margin.abs() < AMBIGUITY_GUARD {
        return Err(Error::NumericalAmbiguity(format!(
            "criticality of (h={h}, q={q}) is within {AMBIGUITY_GUARD} of the threshold"
        )));
    }
    Ok(margin > 0.0)
}

/// Criticality of a node reached along a path with these counts; any
/// neutral edge means an ancestor was already critical.
pub fn path_is_critical(params: &TreeParams, node: &NodePath) -> Result<bool> {
    if node.z() > 0 {
        return Ok(true);
    }
    is_critical_counts(params, node.h(), node.q())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafClass {
    Rich,
    Critical,
    Neither,
}

/// Critical dominates; otherwise rich iff `D >= 1/2`.
pub fn classify_counts(params: &TreeParams, node: &NodePath) -> Result<LeafClass> {
    if path_is_critical(params, node)? {
        return Ok(LeafClass::Critical);
    }
    let margin = node.h() as f64 * params.ln_beta()
        + node.q() as f64 * params.ln_light_density()
        + std::f64::consts::LN_2;
    if margin.abs() < AMBIGUITY_GUARD {
        return Err(Error::NumericalAmbiguity(format!(
            "richness of leaf {} is within {AMBIGUITY_GUARD} of the threshold",
            node.digit_string()
        )));
    }
    Ok(if margin >= 0.0 {
        LeafClass::Rich
    } else {
        LeafClass::Neither
    })
}

/// Density cap of a non-critical leaf with at most `(ln n)/6` heavy edges:
/// `beta^((ln n)/6) * (3/2 - beta/2)^(log3 n - (ln n)/6)` at `n = 3^k`.
pub fn few_heavy_density_cap(k: f64) -> f64 {
    let ln_n = k * 3f64.ln();
    let ln_beta = 6.0 * std::f64::consts::LN_2 / ln_n;
    let ln_light = (-(ln_beta.exp_m1()) / 2.0).ln_1p();
    let heavy = ln_n / 6.0;
    (heavy * ln_beta + (k - heavy) * ln_light).exp()
}

/// Limit of [`few_heavy_density_cap`] as `n` grows: `2^(3/2 - 3/ln 3)`.
pub fn few_heavy_density_limit() -> f64 {
    2f64.powf(1.5 - 3.0 / 3f64.ln())
}

/// Hint passed with a label request.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Hint {
    /// The walk continues into this child.
    Toward(u8),
    /// A cut descends here and must still place this fraction of the node's value.
    Mass(f64),
}

/// Source of child labels for a tree walk. Implementations may reveal labels
/// lazily, which is why the receiver is mutable.
pub trait Labeling {
    fn params(&self) -> &TreeParams;
    fn child_labels(&mut self, node: &NodePath, hint: Hint) -> Result<ChildLabels>;
}

pub(crate) struct Located {
    pub digits: Vec<u8>,
    pub index: BigUint,
    /// Offset inside the leaf, as a fraction of the leaf width.
    pub frac: Scalar,
}

/// Leaf containing `x`. With `right_closed`, a point on a leaf boundary
/// belongs to the leaf on its left.
pub(crate) fn locate(params: &TreeParams, x: &Scalar, right_closed: bool) -> Located {
    let n = params.leaves();
    let scaled = x * BigRational::from_integer(BigInt::from(n.clone()));
    let (q, r) = scaled.numer().div_mod_floor(scaled.denom());
    let mut index = q.to_biguint().unwrap_or_default();
    let mut frac = BigRational::new(r, scaled.denom().clone());
    if index >= n || (right_closed && frac.is_zero() && !index.is_zero()) {
        index -= 1u32;
        frac = Scalar::one();
    }
    let d = params.depth() as usize;
    let mut digits = vec![0u8; d];
    let mut rest = index.clone();
    for slot in digits.iter_mut().rev() {
        let (q, r) = rest.div_rem(&BigUint::from(3u32));
        *slot = r.to_u8().unwrap_or(0);
        rest = q;
    }
    Located {
        digits,
        index,
        frac,
    }
}

fn leaf_point(params: &TreeParams, index: &BigUint, frac: Scalar) -> Scalar {
    let frac = frac.max(Scalar::zero()).min(Scalar::one());
    (BigRational::from_integer(BigInt::from(index.clone())) + frac) * params.leaf_width()
}

fn float_frac(v: f64) -> Scalar {
    BigRational::from_float(v.clamp(0.0, 1.0)).unwrap_or_else(Scalar::zero)
}

/// Labels and values along one root-to-leaf path.
pub(crate) struct PathWalk {
    pub nodes: Vec<NodePath>,
    pub labels: Vec<ChildLabels>,
    pub values: Vec<f64>,
}

pub(crate) fn walk<L: Labeling + ?Sized>(lab: &mut L, digits: &[u8]) -> Result<PathWalk> {
    let params = lab.params().clone();
    let mut nodes = Vec::with_capacity(digits.len() + 1);
    let mut labels = Vec::with_capacity(digits.len());
    let mut values = Vec::with_capacity(digits.len() + 1);
    let mut node = NodePath::root();
    let mut value = 1.0;
    for &d in digits {
        let l = lab.child_labels(&node, Hint::Toward(d))?;
        let next = node.child(d, l.kind(d));
        nodes.push(node);
        labels.push(l);
        values.push(value);
        value *= l.label(&params, d);
        node = next;
    }
    nodes.push(node);
    values.push(value);
    Ok(PathWalk {
        nodes,
        labels,
        values,
    })
}

/// `V(x, y)` over any labeling.
pub fn tree_eval_with<L: Labeling + ?Sized>(lab: &mut L, x: &Scalar, y: &Scalar) -> Result<f64> {
    crate::valuation::check_query_range(x, y)?;
    let params = lab.params().clone();
    let d = params.depth() as usize;
    let lx = locate(&params, x, false);
    let ly = locate(&params, y, false);
    let wx = walk(lab, &lx.digits)?;
    let wy = walk(lab, &ly.digits)?;
    let common = lx
        .digits
        .iter()
        .zip(&ly.digits)
        .take_while(|(a, b)| a == b)
        .count();
    if common == d {
        return Ok(wx.values[d] * crate::geometry::to_f64(&(&ly.frac - &lx.frac)));
    }
    let mut sum = wx.values[d] * crate::geometry::to_f64(&(Scalar::one() - &lx.frac))
        + wy.values[d] * crate::geometry::to_f64(&ly.frac);
    for j in (common + 1..d).rev() {
        for c in lx.digits[j] + 1..3 {
            sum += wx.values[j] * wx.labels[j].label(&params, c);
        }
        for c in 0..ly.digits[j] {
            sum += wy.values[j] * wy.labels[j].label(&params, c);
        }
    }
    for c in lx.digits[common] + 1..ly.digits[common] {
        sum += wx.values[common] * wx.labels[common].label(&params, c);
    }
    Ok(sum)
}

/// Relative slack allowed when deciding that mass ran out exactly at 1.
const CUT_SLACK: f64 = 1e-12;

/// Smallest `y` with `V(x, y) = r` over any labeling; `None` past the end.
pub fn tree_cut_with<L: Labeling + ?Sized>(
    lab: &mut L,
    x: &Scalar,
    r: f64,
) -> Result<Option<Scalar>> {
    if x.is_negative() || x > &Scalar::one() {
        return Err(invalid(format!("cut position {x} outside [0, 1]")));
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(invalid(format!(
            "cut mass {r} must be finite and non-negative"
        )));
    }
    let params = lab.params().clone();
    let d = params.depth() as usize;
    let lx = locate(&params, x, false);
    let wx = walk(lab, &lx.digits)?;
    let leaf_value = wx.values[d];
    let available = leaf_value * crate::geometry::to_f64(&(Scalar::one() - &lx.frac));
    if r <= available {
        let frac = &lx.frac + float_frac(r / leaf_value);
        return Ok(Some(leaf_point(&params, &lx.index, frac)));
    }
    let mut tail = available;
    for j in 0..d {
        for c in lx.digits[j] + 1..3 {
            tail += wx.values[j] * wx.labels[j].label(&params, c);
        }
    }
    if (r - tail).abs() <= CUT_SLACK * r {
        return Ok(Some(Scalar::one()));
    }
    if r > tail {
        return Ok(None);
    }
    let mut rem = r - available;
    for j in (0..d).rev() {
        for c in lx.digits[j] + 1..3 {
            let child_value = wx.values[j] * wx.labels[j].label(&params, c);
            if rem <= child_value {
                let child = wx.nodes[j].child(c, wx.labels[j].kind(c));
                return descend(lab, &params, child, child_value, rem).map(Some);
            }
            rem -= child_value;
        }
    }
    Ok(Some(Scalar::one()))
}

fn descend<L: Labeling + ?Sized>(
    lab: &mut L,
    params: &TreeParams,
    mut node: NodePath,
    mut value: f64,
    mut rem: f64,
) -> Result<Scalar> {
    let d = params.depth() as usize;
    while node.depth() < d {
        let labels = lab.child_labels(&node, Hint::Mass(rem / value))?;
        for c in 0..3u8 {
            let child_value = value * labels.label(params, c);
            if rem <= child_value || c == 2 {
                node = node.child(c, labels.kind(c));
                value = child_value;
                break;
            }
            rem -= child_value;
        }
    }
    Ok(leaf_point(params, &node.index(), float_frac(rem / value)))
}

/// Reproducible description of a fully labeled tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub k: u32,
    pub seed: u64,
    #[serde(default)]
    pub permissive: bool,
}

impl TreeSpec {
    pub fn build(&self) -> Result<BalancedValueTree> {
        BalancedValueTree::build(TreeParams::with_mode(self.k, self.permissive)?, self.seed)
    }
}

/// An eagerly labeled balanced value tree (`k <= 11`).
#[derive(Clone, Debug)]
pub struct BalancedValueTree {
    params: TreeParams,
    seed: Option<u64>,
    /// Child labels of internal nodes in breadth-first order.
    labels: Vec<ChildLabels>,
}

fn level_offset(depth: usize) -> usize {
    (3usize.pow(depth as u32) - 1) / 2
}

fn small_index(digits: &[u8]) -> usize {
    digits.iter().fold(0usize, |acc, &d| acc * 3 + d as usize)
}

impl BalancedValueTree {
    /// Labels top-down; heavy positions of non-critical nodes are drawn
    /// uniformly from `seed` in breadth-first order.
    pub fn build(params: TreeParams, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tree = Self::materialize(params, |_node, critical| {
            Ok(if critical {
                ChildLabels::Critical
            } else {
                ChildLabels::Split {
                    heavy: rng.random_range(0..3),
                }
            })
        })?;
        tree.seed = Some(seed);
        Ok(tree)
    }

    /// Materializes any labeling. Criticality of each node is recomputed and
    /// must agree with the labels handed out.
    pub fn from_labeling<L: Labeling + ?Sized>(lab: &mut L) -> Result<Self> {
        let params = lab.params().clone();
        Self::materialize(params, |node, critical| {
            let labels = lab.child_labels(node, Hint::Toward(0))?;
            if critical != (labels == ChildLabels::Critical) {
                return Err(invalid(format!(
                    "node {:?} labeled {} but criticality is {critical}",
                    node.digit_string(),
                    labels.code()
                )));
            }
            Ok(labels)
        })
    }

    fn materialize<F>(params: TreeParams, mut label: F) -> Result<Self>
    where
        F: FnMut(&NodePath, bool) -> Result<ChildLabels>,
    {
        if params.depth() > EAGER_MAX_K {
            return Err(invalid(format!(
                "eager trees are capped at depth {EAGER_MAX_K}; depth {} needs the lazy adversary",
                params.depth()
            )));
        }
        let d = params.depth() as usize;
        let mut labels = Vec::with_capacity(level_offset(d));
        let mut level = vec![NodePath::root()];
        for _ in 0..d {
            let mut next = Vec::with_capacity(level.len() * 3);
            for node in &level {
                let critical = path_is_critical(&params, node)?;
                let l = label(node, critical)?;
                labels.push(l);
                for c in 0..3 {
                    next.push(node.child(c, l.kind(c)));
                }
            }
            level = next;
        }
        Ok(Self {
            params,
            seed: None,
            labels,
        })
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Child labels of an internal node.
    pub fn labels_of(&self, digits: &[u8]) -> Result<ChildLabels> {
        if digits.len() >= self.params.depth() as usize || digits.iter().any(|&d| d > 2) {
            return Err(invalid(format!("{digits:?} is not an internal node")));
        }
        Ok(self.labels[level_offset(digits.len()) + small_index(digits)])
    }

    /// The node with its edge counts.
    pub fn path(&self, digits: &[u8]) -> Result<NodePath> {
        if digits.len() > self.params.depth() as usize || digits.iter().any(|&d| d > 2) {
            return Err(invalid(format!("{digits:?} is not a node")));
        }
        let mut node = NodePath::root();
        for (j, &d) in digits.iter().enumerate() {
            let l = self.labels_of(&digits[..j])?;
            node = node.child(d, l.kind(d));
        }
        Ok(node)
    }

    /// `V(u)` as the product of labels on the root path.
    pub fn node_value(&self, digits: &[u8]) -> Result<f64> {
        let mut v = 1.0;
        for (j, &d) in digits.iter().enumerate() {
            v *= self.labels_of(&digits[..j])?.label(&self.params, d);
        }
        Ok(v)
    }

    /// `D(u)` from the closed form in `h` and `q`.
    pub fn node_density(&self, digits: &[u8]) -> Result<f64> {
        let node = self.path(digits)?;
        Ok(density_from_counts(&self.params, node.h(), node.q()))
    }

    pub fn is_critical(&self, digits: &[u8]) -> Result<bool> {
        path_is_critical(&self.params, &self.path(digits)?)
    }

    pub fn classify_leaf(&self, digits: &[u8]) -> Result<LeafClass> {
        if digits.len() != self.params.depth() as usize {
            return Err(invalid("not a leaf"));
        }
        classify_counts(&self.params, &self.path(digits)?)
    }

    /// Depth-first visit of every node with its value (label product) and,
    /// for internal nodes, its child labels.
    pub fn visit<F: FnMut(&NodePath, f64, Option<ChildLabels>)>(&self, mut f: F) {
        let d = self.params.depth() as usize;
        let mut stack = vec![(NodePath::root(), 1.0f64)];
        while let Some((node, value)) = stack.pop() {
            if node.depth() == d {
                f(&node, value, None);
                continue;
            }
            let l = self.labels[level_offset(node.depth()) + small_index(node.digits())];
            f(&node, value, Some(l));
            for c in (0..3).rev() {
                stack.push((node.child(c, l.kind(c)), value * l.label(&self.params, c)));
            }
        }
    }

    /// Largest leaf density, by enumeration.
    pub fn max_leaf_density(&self) -> f64 {
        let n = 3f64.powi(self.params.depth() as i32);
        let mut best = 0.0f64;
        self.visit(|_, value, labels| {
            if labels.is_none() {
                best = best.max(value * n);
            }
        });
        best
    }

    /// Structural check: labels sum to one and criticality matches the rule.
    pub fn validate(&self) -> Result<()> {
        let mut err = None;
        let params = self.params.clone();
        self.visit(|node, _, labels| {
            let Some(l) = labels else { return };
            if err.is_some() {
                return;
            }
            let sum: f64 = (0..3).map(|c| l.label(&params, c)).sum();
            if (sum - 1.0).abs() > 1e-15 {
                err = Some(Error::Internal(format!(
                    "labels at {} sum to {sum}",
                    node.digit_string()
                )));
                return;
            }
            match path_is_critical(&params, node) {
                Ok(c) if c == (l == ChildLabels::Critical) => {}
                Ok(c) => {
                    err = Some(Error::Internal(format!(
                        "node {} labeled {} with criticality {c}",
                        node.digit_string(),
                        l.code()
                    )))
                }
                Err(e) => err = Some(e),
            }
        });
        err.map_or(Ok(()), Err)
    }

    pub fn eval(&self, x: &Scalar, y: &Scalar) -> Result<f64> {
        tree_eval_with(&mut &*self, x, y)
    }

    pub fn cut(&self, x: &Scalar, r: f64) -> Result<Option<Scalar>> {
        tree_cut_with(&mut &*self, x, r)
    }

    /// From a heavy piece, a leaf of density at least 1/2 (hence rich or critical).
    pub fn extract_candidate_leaf(&self, piece: &Piece) -> Result<NodePath> {
        let n = self.params.leaves();
        let n_rat = BigRational::from_integer(BigInt::from(n));
        let width = piece.width();
        let value = value_of_piece(self, piece)?;
        let half_share = 0.5 / 3f64.powi(self.params.depth() as i32);
        if &width * &n_rat > Scalar::one() || value < half_share * (1.0 - 1e-12) {
            return Err(Error::PreconditionViolation(format!(
                "piece of width {width} and value {value:e} is not heavy"
            )));
        }
        // Densest interval; by averaging its density is at least D(P) >= 1/2.
        let mut best: Option<(f64, &Interval)> = None;
        for iv in piece.intervals() {
            let density = self.eval(iv.left(), iv.right())? / crate::geometry::to_f64(&iv.width());
            if best.is_none_or(|(b, _)| density > b) {
                best = Some((density, iv));
            }
        }
        let (_, iv) = best.ok_or_else(|| Error::PreconditionViolation("empty piece".into()))?;
        let first = locate(&self.params, iv.left(), false);
        let last = locate(&self.params, iv.right(), true);
        let mut candidates = vec![self.path(&first.digits)?];
        if last.digits != first.digits {
            candidates.push(self.path(&last.digits)?);
        }
        let leaf = candidates
            .into_iter()
            .map(|c| (density_from_counts(&self.params, c.h(), c.q()), c))
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, c)| c)
            .expect("at least one candidate");
        Ok(leaf)
    }

    pub fn spec(&self) -> Option<TreeSpec> {
        self.seed.map(|seed| TreeSpec {
            k: self.params.depth(),
            seed,
            permissive: self.params.is_permissive(),
        })
    }
}

impl Labeling for &BalancedValueTree {
    fn params(&self) -> &TreeParams {
        &self.params
    }

    fn child_labels(&mut self, node: &NodePath, _hint: Hint) -> Result<ChildLabels> {
        self.labels_of(node.digits())
    }
}

impl Valuation for BalancedValueTree {
    type Value = f64;

    fn eval(&self, x: &Scalar, y: &Scalar) -> Result<f64> {
        BalancedValueTree::eval(self, x, y)
    }

    fn cut(&self, x: &Scalar, r: &f64) -> Result<Option<Scalar>> {
        BalancedValueTree::cut(self, x, *r)
    }
}
