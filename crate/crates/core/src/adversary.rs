//! Interactive adversary over a lazily revealed balanced value tree.
//!
//! The session answers eval and cut queries by revealing child labels only
//! where a query walks. Path edges are always light, so after `m` queries no
//! root-to-leaf path carries more than `2m` revealed heavy edges. Until that
//! count can reach `(ln n)/6 - 1` no leaf is forced rich or critical, and any
//! claimed heavy piece can be refuted by a completion that keeps the claim's
//! leaves on light paths.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{format_scalar, to_f64, Interval, Piece, Scalar};
use crate::referee::{Answer, Query, QueryRecord, QueryRecordWire};
use crate::valuation::Valuation;
use crate::valuetree::{
    digits_to_index, locate, path_is_critical, tree_cut_with, tree_eval_with, BalancedValueTree,
    ChildLabels, Hint, Labeling, NodePath, TreeParams, EAGER_MAX_K,
};

/// Answers replayed against a completion must agree within this.
pub const REPLAY_TOLERANCE: f64 = 1e-9;
/// Seeded completions tried after the targeted one.
pub const REFUTATION_ATTEMPTS: u64 = 16;

type Revealed = HashMap<Vec<u8>, ChildLabels>;

/// One answered query and the labels it revealed.
#[derive(Clone, Debug, PartialEq)]
pub struct TranscriptEntry {
    pub record: QueryRecord<f64>,
    pub reveals: Vec<(Vec<u8>, ChildLabels)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevealWire {
    pub node: String,
    pub labels: String,
}

/// JSON-lines row of a transcript.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptWire {
    pub index: usize,
    #[serde(flatten)]
    pub query: QueryRecordWire,
    pub reveals: Vec<RevealWire>,
}

fn digit_string(digits: &[u8]) -> String {
    digits.iter().map(|d| char::from(b'0' + d)).collect()
}

fn parse_digits(s: &str) -> Result<Vec<u8>> {
    s.bytes()
        .map(|b| match b {
            b'0'..=b'2' => Ok(b - b'0'),
            _ => Err(Error::Parse(format!("bad node path {s:?}"))),
        })
        .collect()
}

impl TranscriptEntry {
    pub fn to_wire(&self, index: usize) -> TranscriptWire {
        TranscriptWire {
            index,
            query: self.record.to_wire(),
            reveals: self
                .reveals
                .iter()
                .map(|(d, l)| RevealWire {
                    node: digit_string(d),
                    labels: l.code(),
                })
                .collect(),
        }
    }

    pub fn from_wire(w: &TranscriptWire) -> Result<Self> {
        let reveals = w
            .reveals
            .iter()
            .map(|r| Ok((parse_digits(&r.node)?, ChildLabels::parse(&r.labels)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            record: QueryRecord::from_wire(&w.query)?,
            reveals,
        })
    }
}

/// Labeling that reveals unseen nodes according to the adversary's rules.
struct Revealer<'a> {
    params: &'a TreeParams,
    revealed: &'a mut Revealed,
    reveals: Vec<(Vec<u8>, ChildLabels)>,
}

impl Labeling for Revealer<'_> {
    fn params(&self) -> &TreeParams {
        self.params
    }

    fn child_labels(&mut self, node: &NodePath, hint: Hint) -> Result<ChildLabels> {
        if let Some(&l) = self.revealed.get(node.digits()) {
            return Ok(l);
        }
        let labels = if path_is_critical(self.params, node)? {
            ChildLabels::Critical
        } else {
            match hint {
                Hint::Toward(c) => ChildLabels::Split {
                    heavy: if c == 0 { 1 } else { 0 },
                },
                Hint::Mass(gamma) if gamma > self.params.heavy_label() => {
                    ChildLabels::Split { heavy: 0 }
                }
                Hint::Mass(_) => ChildLabels::Split { heavy: 2 },
            }
        };
        self.revealed.insert(node.digits().to_vec(), labels);
        self.reveals.push((node.digits().to_vec(), labels));
        Ok(labels)
    }
}

/// Labeling that only reads revealed nodes; used where nothing new may be revealed.
struct Frozen<'a> {
    params: &'a TreeParams,
    revealed: &'a Revealed,
}

/// The adversary's side of the query game.
#[derive(Clone, Debug)]
pub struct AdversarySession {
    params: TreeParams,
    revealed: Revealed,
    queries: u32,
    transcript: Vec<TranscriptEntry>,
    heavy_trace: Vec<u32>,
}

impl AdversarySession {
    pub fn new(params: TreeParams) -> Self {
        Self {
            params,
            revealed: HashMap::new(),
            queries: 0,
            transcript: Vec::new(),
            heavy_trace: Vec::new(),
        }
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn queries(&self) -> u32 {
        self.queries
    }

    /// `floor(((ln n)/6 - 1)/2)`.
    pub fn threshold(&self) -> u32 {
        self.params.adversary_threshold()
    }

    pub fn within_threshold(&self) -> bool {
        self.queries <= self.threshold()
    }

    pub fn revealed(&self) -> &HashMap<Vec<u8>, ChildLabels> {
        &self.revealed
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    /// `max_revealed_heavy` after each answered query.
    pub fn heavy_trace(&self) -> &[u32] {
        &self.heavy_trace
    }

    fn revealer(&mut self) -> Revealer<'_> {
        Revealer {
            params: &self.params,
            revealed: &mut self.revealed,
            reveals: Vec::new(),
        }
    }

    fn record(
        &mut self,
        query: Query<f64>,
        answer: Answer<f64>,
        reveals: Vec<(Vec<u8>, ChildLabels)>,
    ) {
        self.queries += 1;
        self.transcript.push(TranscriptEntry {
            record: QueryRecord {
                player: 0,
                query,
                answer,
            },
            reveals,
        });
        let heavy = self.max_revealed_heavy();
        self.heavy_trace.push(heavy);
    }

    pub fn answer_eval(&mut self, x: &Scalar, y: &Scalar) -> Result<f64> {
        let mut rev = self.revealer();
        let v = tree_eval_with(&mut rev, x, y)?;
        let reveals = rev.reveals;
        self.record(
            Query::Eval {
                x: x.clone(),
                y: y.clone(),
            },
            Answer::Value(v),
            reveals,
        );
        Ok(v)
    }

    pub fn answer_cut(&mut self, x: &Scalar, r: f64) -> Result<Option<Scalar>> {
        let mut rev = self.revealer();
        let p = tree_cut_with(&mut rev, x, r)?;
        let reveals = rev.reveals;
        let answer = p.clone().map_or(Answer::NoAnswer, Answer::Point);
        self.record(Query::Cut { x: x.clone(), r }, answer, reveals);
        Ok(p)
    }

    /// Most revealed heavy edges on any root-to-leaf path.
    pub fn max_revealed_heavy(&self) -> u32 {
        max_heavy_below(&self.revealed, &mut Vec::new())
    }

    /// Connectivity, no critical reveals within the threshold, and the `2m`
    /// heavy-edge budget. All-or-none holds by representation.
    pub fn check_invariants(&self) -> Result<()> {
        for digits in self.revealed.keys() {
            if let Some((_, parent)) = digits.split_last() {
                if !self.revealed.contains_key(parent) {
                    return Err(Error::Internal(format!(
                        "revealed node {:?} has an unrevealed parent",
                        digit_string(digits)
                    )));
                }
            }
        }
        if self.within_threshold() && self.revealed.values().any(|&l| l == ChildLabels::Critical) {
            return Err(Error::Internal(
                "a critical node was revealed within the threshold".into(),
            ));
        }
        let heavy = self.max_revealed_heavy();
        if heavy > 2 * self.queries {
            return Err(Error::Internal(format!(
                "{heavy} heavy edges revealed after {} queries",
                self.queries
            )));
        }
        Ok(())
    }

    /// Full labeling agreeing with every reveal; other nodes get a
    /// seed-determined heavy position.
    pub fn complete_labeling(&self, seed: u64) -> Completion {
        Completion::new(self.params.clone(), self.revealed.clone(), seed, &[])
    }

    /// Completion whose unrevealed nodes route heavy edges away from `targets` (leaf digit strings).
    pub fn targeted_completion(&self, seed: u64, targets: &[Vec<u8>]) -> Completion {
        Completion::new(self.params.clone(), self.revealed.clone(), seed, targets)
    }

    /// Shows the claimed piece is not heavy under some consistent completion.
    pub fn refute_claim(&self, piece: &Piece) -> Result<RefuteOutcome> {
        let n = BigRational::from_integer(BigInt::from(self.params.leaves()));
        let width = piece.width();
        let base = |completion_seed, targeted, value, violated| Refutation {
            completion_seed,
            targeted,
            piece: piece.clone(),
            width: width.clone(),
            value,
            violated,
            queries: self.queries,
            threshold: self.threshold(),
            within_threshold: self.within_threshold(),
        };
        if &width * &n > Scalar::one() {
            return Ok(RefuteOutcome::Refuted(base(
                None,
                false,
                None,
                ViolatedClause::Width,
            )));
        }
        let half_share = 0.5 / 3f64.powi(self.params.depth() as i32);
        let targets = leaves_of(&self.params, piece);
        let attempts =
            std::iter::once((0, true)).chain((1..=REFUTATION_ATTEMPTS).map(|s| (s, false)));
        for (seed, targeted) in attempts {
            let completion = if targeted {
                self.targeted_completion(seed, &targets)
            } else {
                self.complete_labeling(seed)
            };
            let value = completion.value_of(piece)?;
            // A refutation must hold with room for rounding.
            if value < half_share * (1.0 - 1e-9) {
                completion.verify(self.transcript(), &targets)?;
                return Ok(RefuteOutcome::Refuted(base(
                    Some(seed),
                    targeted,
                    Some(value),
                    ViolatedClause::Value,
                )));
            }
        }
        Ok(RefuteOutcome::CannotRefute {
            reason: format!(
                "piece heavy under all {} completions tried",
                REFUTATION_ATTEMPTS + 1
            ),
        })
    }

    pub fn write_transcript_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (i, e) in self.transcript.iter().enumerate() {
            serde_json::to_writer(&mut out, &e.to_wire(i))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn max_heavy_below(revealed: &Revealed, digits: &mut Vec<u8>) -> u32 {
    let Some(&labels) = revealed.get(digits.as_slice()) else {
        return 0;
    };
    let mut best = 0;
    for c in 0..3u8 {
        digits.push(c);
        let here = u32::from(labels.kind(c) == crate::valuetree::EdgeKind::Heavy);
        best = best.max(here + max_heavy_below(revealed, digits));
        digits.pop();
    }
    best
}

/// Leaves overlapped by a piece (boundary points do not count as overlap).
fn leaves_of(params: &TreeParams, piece: &Piece) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for iv in piece.intervals() {
        let first = locate(params, iv.left(), false);
        let last = locate(params, iv.right(), true);
        let mut index = first.index.clone();
        let mut digits = first.digits.clone();
        // Pieces come from width-bounded claims, so each interval covers few leaves.
        loop {
            if seen.insert(digits.clone()) {
                out.push(digits.clone());
            }
            if index >= last.index {
                break;
            }
            index += 1u32;
            increment_digits(&mut digits);
        }
    }
    out
}

fn increment_digits(digits: &mut [u8]) {
    for d in digits.iter_mut().rev() {
        if *d < 2 {
            *d += 1;
            return;
        }
        *d = 0;
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A complete labeling of the (possibly astronomically large) tree, defined
/// lazily node by node.
#[derive(Clone, Debug)]
pub struct Completion {
    params: TreeParams,
    revealed: Revealed,
    seed: u64,
    /// For internal nodes above target leaves: number of targets below each child.
    target_counts: HashMap<Vec<u8>, [u32; 3]>,
}

impl Completion {
    fn new(params: TreeParams, revealed: Revealed, seed: u64, targets: &[Vec<u8>]) -> Self {
        let mut target_counts: HashMap<Vec<u8>, [u32; 3]> = HashMap::new();
        for leaf in targets {
            for j in 0..leaf.len() {
                target_counts.entry(leaf[..j].to_vec()).or_default()[leaf[j] as usize] += 1;
            }
        }
        Self {
            params,
            revealed,
            seed,
            target_counts,
        }
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child labels at a node; deterministic in the node and the seed.
    pub fn labels(&self, node: &NodePath) -> Result<ChildLabels> {
        if let Some(&l) = self.revealed.get(node.digits()) {
            return Ok(l);
        }
        if path_is_critical(&self.params, node)? {
            return Ok(ChildLabels::Critical);
        }
        if let Some(counts) = self.target_counts.get(node.digits()) {
            let heavy = (0..3u8).min_by_key(|&c| counts[c as usize]).unwrap_or(0);
            return Ok(ChildLabels::Split { heavy });
        }
        let mut h = splitmix64(self.seed);
        for &d in node.digits() {
            h = splitmix64(h ^ u64::from(d + 1));
        }
        h = splitmix64(h ^ node.depth() as u64);
        Ok(ChildLabels::Split {
            heavy: (h % 3) as u8,
        })
    }

    pub fn eval(&self, x: &Scalar, y: &Scalar) -> Result<f64> {
        tree_eval_with(&mut &*self, x, y)
    }

    pub fn cut(&self, x: &Scalar, r: f64) -> Result<Option<Scalar>> {
        tree_cut_with(&mut &*self, x, r)
    }

    pub fn value_of(&self, piece: &Piece) -> Result<f64> {
        piece
            .intervals()
            .iter()
            .map(|iv| self.eval(iv.left(), iv.right()))
            .sum()
    }

    /// Indices of transcript entries whose answers this completion does not reproduce.
    pub fn replay(&self, transcript: &[TranscriptEntry]) -> Result<Vec<usize>> {
        let mut bad = Vec::new();
        for (i, e) in transcript.iter().enumerate() {
            let ok = match (&e.record.query, &e.record.answer) {
                (Query::Eval { x, y }, Answer::Value(v)) => {
                    (self.eval(x, y)? - v).abs() <= REPLAY_TOLERANCE
                }
                (Query::Cut { x, r }, Answer::Point(p)) => match self.cut(x, *r)? {
                    Some(q) => to_f64(&(q - p)).abs() <= REPLAY_TOLERANCE,
                    None => false,
                },
                (Query::Cut { x, r }, Answer::NoAnswer) => self.cut(x, *r)?.is_none(),
                _ => false,
            };
            if !ok {
                bad.push(i);
            }
        }
        Ok(bad)
    }

    /// Validity of the labeling on every node it can differ from the plain
    /// rule (revealed nodes and the paths to `leaves`), plus a full transcript
    /// replay. Small trees are additionally materialized and checked whole.
    pub fn verify(&self, transcript: &[TranscriptEntry], leaves: &[Vec<u8>]) -> Result<()> {
        let mut nodes: Vec<&[u8]> = self.revealed.keys().map(|k| k.as_slice()).collect();
        for leaf in leaves {
            nodes.push(leaf.as_slice());
        }
        for digits in nodes {
            let mut node = NodePath::root();
            for &d in digits {
                let l = self.labels(&node)?;
                if path_is_critical(&self.params, &node)? != (l == ChildLabels::Critical) {
                    return Err(Error::Internal(format!(
                        "completion labels node {:?} as {} against the criticality rule",
                        node.digit_string(),
                        l.code()
                    )));
                }
                node = node.child(d, l.kind(d));
            }
        }
        let bad = self.replay(transcript)?;
        if !bad.is_empty() {
            return Err(Error::Internal(format!(
                "completion disagrees with transcript entries {bad:?}"
            )));
        }
        if self.params.depth() <= EAGER_MAX_K {
            self.materialize()?.validate()?;
        }
        Ok(())
    }

    /// Eager copy of the completion (depth at most 11).
    pub fn materialize(&self) -> Result<BalancedValueTree> {
        BalancedValueTree::from_labeling(&mut &*self)
    }
}

impl Labeling for &Completion {
    fn params(&self) -> &TreeParams {
        &self.params
    }

    fn child_labels(&mut self, node: &NodePath, _hint: Hint) -> Result<ChildLabels> {
        self.labels(node)
    }
}

impl Labeling for Frozen<'_> {
    fn params(&self) -> &TreeParams {
        self.params
    }

    fn child_labels(&mut self, node: &NodePath, _hint: Hint) -> Result<ChildLabels> {
        self.revealed.get(node.digits()).copied().ok_or_else(|| {
            Error::Internal(format!("node {:?} is not revealed", node.digit_string()))
        })
    }
}

impl Valuation for Completion {
    type Value = f64;

    fn eval(&self, x: &Scalar, y: &Scalar) -> Result<f64> {
        Completion::eval(self, x, y)
    }

    fn cut(&self, x: &Scalar, r: &f64) -> Result<Option<Scalar>> {
        Completion::cut(self, x, *r)
    }
}

impl AdversarySession {
    /// Re-answers an eval from revealed labels only; errors if it would need a new reveal.
    pub fn peek_eval(&self, x: &Scalar, y: &Scalar) -> Result<f64> {
        tree_eval_with(
            &mut Frozen {
                params: &self.params,
                revealed: &self.revealed,
            },
            x,
            y,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolatedClause {
    /// `|P| > 1/n`.
    Width,
    /// `V(P) < 1/(2n)`.
    Value,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Refutation {
    /// `None` when the width alone refutes the claim.
    pub completion_seed: Option<u64>,
    pub targeted: bool,
    pub piece: Piece,
    #[serde(with = "crate::geometry::scalar_str")]
    pub width: Scalar,
    pub value: Option<f64>,
    pub violated: ViolatedClause,
    pub queries: u32,
    pub threshold: u32,
    pub within_threshold: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RefuteOutcome {
    Refuted(Refutation),
    CannotRefute { reason: String },
}

impl RefuteOutcome {
    pub fn is_refuted(&self) -> bool {
        matches!(self, RefuteOutcome::Refuted(_))
    }
}

/// Built-in heavy-piece finders that play against the adversary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinderStrategy {
    /// Descends toward the denser of the children, two evals per level.
    GreedyDense,
    /// Cuts `1/(2n)` of mass from random points and claims the narrowest answer.
    CutProbe,
    /// Evaluates random leaves and claims the most valuable one.
    RandomProbe,
    /// Claims a random leaf without querying.
    Blind,
}

impl FinderStrategy {
    pub const ALL: [FinderStrategy; 4] = [
        FinderStrategy::GreedyDense,
        FinderStrategy::CutProbe,
        FinderStrategy::RandomProbe,
        FinderStrategy::Blind,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FinderStrategy::GreedyDense => "greedy-dense",
            FinderStrategy::CutProbe => "cut-probe",
            FinderStrategy::RandomProbe => "random-probe",
            FinderStrategy::Blind => "blind",
        }
    }

    /// Plays at most `budget` queries and returns the claimed heavy piece.
    pub fn play(self, session: &mut AdversarySession, budget: u32, seed: u64) -> Result<Piece> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = session.params().depth() as usize;
        match self {
            FinderStrategy::Blind => Ok(leaf_piece(&random_leaf(&mut rng, d))),
            FinderStrategy::RandomProbe => {
                let mut best: Option<(f64, Vec<u8>)> = None;
                for _ in 0..budget {
                    let leaf = random_leaf(&mut rng, d);
                    let iv = node_interval(&leaf);
                    let v = session.answer_eval(iv.left(), iv.right())?;
                    if best.as_ref().is_none_or(|(b, _)| v > *b) {
                        best = Some((v, leaf));
                    }
                }
                let leaf = best.map_or_else(|| random_leaf(&mut rng, d), |(_, l)| l);
                Ok(leaf_piece(&leaf))
            }
            FinderStrategy::GreedyDense => {
                let mut node: Vec<u8> = Vec::new();
                let mut left = budget;
                while node.len() < d && left > 0 {
                    let mut values = [0.0f64; 3];
                    let parent = node_interval(&node);
                    let parent_value = session.peek_eval(parent.left(), parent.right()).ok();
                    let asks = if left >= 2 { 2 } else { 1 };
                    for (c, slot) in values.iter_mut().enumerate().take(asks) {
                        let mut child = node.clone();
                        child.push(c as u8);
                        let iv = node_interval(&child);
                        *slot = session.answer_eval(iv.left(), iv.right())?;
                    }
                    left -= asks as u32;
                    let known: f64 = values.iter().sum();
                    if asks == 2 {
                        values[2] = parent_value.map_or(0.0, |p| (p - known).max(0.0));
                    } else {
                        let unit = 3f64.powi(-(node.len() as i32) - 1);
                        values[1] = unit * 0.5;
                        values[2] = unit * 0.5;
                    }
                    let best = (0..3)
                        .max_by(|&a, &b| values[a].total_cmp(&values[b]))
                        .unwrap_or(0);
                    node.push(best as u8);
                }
                while node.len() < d {
                    node.push(rng.random_range(0..3));
                }
                Ok(leaf_piece(&node))
            }
            FinderStrategy::CutProbe => {
                let half_share = 0.5 / 3f64.powi(d as i32);
                let mut best: Option<Interval> = None;
                for _ in 0..budget {
                    let start = leaf_piece(&random_leaf(&mut rng, d)).intervals()[0]
                        .left()
                        .clone();
                    if let Some(end) = session.answer_cut(&start, half_share)? {
                        let iv = Interval::new(start, end)?;
                        if best.as_ref().is_none_or(|b| iv.width() < b.width()) {
                            best = Some(iv);
                        }
                    }
                }
                Ok(match best {
                    Some(iv) => Piece::from_interval(iv),
                    None => leaf_piece(&random_leaf(&mut rng, d)),
                })
            }
        }
    }
}

impl FromStr for FinderStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| invalid(format!("unknown strategy {s:?}; expected one of greedy-dense, cut-probe, random-probe, blind")))
    }
}

impl std::fmt::Display for FinderStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn random_leaf(rng: &mut ChaCha8Rng, depth: usize) -> Vec<u8> {
    (0..depth).map(|_| rng.random_range(0..3u8)).collect()
}

fn node_interval(digits: &[u8]) -> Interval {
    let den = BigInt::from(3u32).pow(digits.len() as u32);
    let left = BigInt::from(digits_to_index(digits));
    let right = &left + 1;
    Interval::new(
        BigRational::new(left, den.clone()),
        BigRational::new(right, den),
    )
    .expect("node interval")
}

fn leaf_piece(digits: &[u8]) -> Piece {
    Piece::from_interval(node_interval(digits))
}

/// Outcome of one finder-versus-adversary game.
#[derive(Clone, Debug, Serialize)]
pub struct GameReport {
    pub k: u32,
    pub threshold: u32,
    /// The guarantee is empty when the threshold is zero or the depth is below 11.
    pub vacuous: bool,
    pub strategy: FinderStrategy,
    pub seed: u64,
    pub budget: u32,
    pub queries_used: u32,
    pub claim: Piece,
    #[serde(with = "crate::geometry::scalar_str")]
    pub claim_width: Scalar,
    pub refutation: RefuteOutcome,
    pub max_revealed_heavy: Vec<u32>,
}

/// Plays `strategy` with `budget` queries against a fresh session.
pub fn play_game(
    params: TreeParams,
    strategy: FinderStrategy,
    budget: u32,
    seed: u64,
) -> Result<(GameReport, AdversarySession)> {
    let mut session = AdversarySession::new(params);
    let claim = strategy.play(&mut session, budget, seed)?;
    if session.queries() > budget {
        return Err(Error::Internal(format!(
            "{strategy} used {} of {budget} queries",
            session.queries()
        )));
    }
    let refutation = session.refute_claim(&claim)?;
    let p = session.params();
    let report = GameReport {
        k: p.depth(),
        threshold: session.threshold(),
        vacuous: session.threshold() == 0 || !p.in_guarantee_regime(),
        strategy,
        seed,
        budget,
        queries_used: session.queries(),
        claim_width: claim.width(),
        claim,
        refutation,
        max_revealed_heavy: session.heavy_trace().to_vec(),
    };
    Ok((report, session))
}

/// Exact rational encoding used in reports (`"p/q"`).
pub fn scalar_label(x: &Scalar) -> String {
    format_scalar(x)
}
