//! Proportional division protocols that talk to valuations only through a
//! [`QueryReferee`], plus exact allocation checkers.
//!
//! The chore version of Even-Paz is our own adaptation: at each split the
//! players whose marks are largest take the left block, cut at the smallest
//! of their marks. Each of them then pays at most `floor(n/2)/n` of their
//! bound for the current block, and the induction carries through.

use std::cmp::Ordering;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{cmp_scalar, int, Interval, Piece, Scalar};
use crate::referee::QueryReferee;
use crate::valuation::{value_of_piece, Valuation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Desirable resource: each player wants value at least `1/n`.
    Cake,
    /// Undesirable resource: each player wants cost at most `1/n`.
    Chore,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    CutAndChoose,
    EvenPaz,
    LastDiminisher,
}

impl Protocol {
    pub fn run<V>(self, referee: &mut QueryReferee<V>, mode: Mode) -> Result<Allocation>
    where
        V: Valuation<Value = Scalar>,
    {
        match self {
            Protocol::CutAndChoose => cut_and_choose(referee, mode),
            Protocol::EvenPaz => even_paz(referee, mode),
            Protocol::LastDiminisher => match mode {
                Mode::Cake => last_diminisher(referee),
                Mode::Chore => Err(invalid("last diminisher is a cake protocol")),
            },
        }
    }
}

/// `X_1, ..., X_n`, one piece per player, in player order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub pieces: Vec<Piece>,
}

impl Allocation {
    pub fn players(&self) -> usize {
        self.pieces.len()
    }

    /// Checks that the pieces are pairwise disjoint and cover `[0, 1]`.
    pub fn check_partition(&self) -> Result<()> {
        let mut all: Vec<(usize, &Interval)> = self
            .pieces
            .iter()
            .enumerate()
            .flat_map(|(i, p)| p.intervals().iter().map(move |iv| (i, iv)))
            .collect();
        all.sort_by(|a, b| cmp_scalar(a.1.left(), b.1.left()));
        let mut reach = Scalar::zero();
        let mut owner: Option<usize> = None;
        for (i, iv) in all {
            match iv.left().cmp(&reach) {
                Ordering::Greater => {
                    return Err(Error::PartitionViolation(format!(
                        "gap [{reach}, {}]",
                        iv.left()
                    )));
                }
                Ordering::Less => {
                    return Err(Error::PartitionViolation(format!(
                        "overlap [{}, {reach}] between players {} and {i}",
                        iv.left(),
                        owner.unwrap_or(i)
                    )));
                }
                Ordering::Equal => {}
            }
            reach = iv.right().clone();
            owner = Some(i);
        }
        if !reach.is_one() {
            return Err(Error::PartitionViolation(format!("gap [{reach}, 1]")));
        }
        Ok(())
    }
}

fn interval_piece(a: &Scalar, b: &Scalar) -> Result<Piece> {
    Piece::from_bounds(a.clone(), b.clone())
}

/// Two-player cut and choose. Player 0 halves `[0,1]` by its own measure;
/// player 1 evaluates the left part and takes it when strictly better for
/// it (larger value for cake, smaller cost for chore), otherwise the right.
pub fn cut_and_choose<V>(referee: &mut QueryReferee<V>, mode: Mode) -> Result<Allocation>
where
    V: Valuation<Value = Scalar>,
{
    if referee.players() != 2 {
        return Err(invalid(format!(
            "cut and choose needs 2 players, got {}",
            referee.players()
        )));
    }
    let zero = Scalar::zero();
    let one = Scalar::one();
    let half = Scalar::new(1.into(), 2.into());
    let mark = referee
        .cut(0, &zero, &half)?
        .ok_or_else(|| Error::Internal("a normalized valuation always reaches mass 1/2".into()))?;
    let left_value = referee.eval(1, &zero, &mark)?;
    let takes_left = match mode {
        Mode::Cake => left_value > half,
        Mode::Chore => left_value < half,
    };
    let left = interval_piece(&zero, &mark)?;
    let right = interval_piece(&mark, &one)?;
    let pieces = if takes_left {
        vec![right, left]
    } else {
        vec![left, right]
    };
    Ok(Allocation { pieces })
}

/// Even-Paz divide and conquer for `n >= 1` players.
///
/// Each level asks every active player one cut query, so the total is at
/// most `n * ceil(log2 n)` queries. A player in a block of `m` players holds
/// a bound of `m/n` on it (a lower bound on value for cake, an upper bound on
/// cost for chores), so splitting `k | m - k` means marking mass `k/n`.
pub fn even_paz<V>(referee: &mut QueryReferee<V>, mode: Mode) -> Result<Allocation>
where
    V: Valuation<Value = Scalar>,
{
    let n = referee.players();
    if n == 0 {
        return Err(invalid("even-paz needs at least one player"));
    }
    let mut pieces = vec![Piece::empty(); n];
    let active = (0..n).collect();
    even_paz_block(
        referee,
        mode,
        active,
        Scalar::zero(),
        Scalar::one(),
        &mut pieces,
    )?;
    Ok(Allocation { pieces })
}

fn even_paz_block<V>(
    referee: &mut QueryReferee<V>,
    mode: Mode,
    active: Vec<usize>,
    a: Scalar,
    b: Scalar,
    pieces: &mut [Piece],
) -> Result<()>
where
    V: Valuation<Value = Scalar>,
{
    let m = active.len();
    if m == 1 {
        pieces[active[0]] = interval_piece(&a, &b)?;
        return Ok(());
    }
    let k = m / 2;
    let mass = Scalar::new((k as i64).into(), (pieces.len() as i64).into());
    let mut marks = Vec::with_capacity(m);
    for player in active {
        // A chore bound may exceed the true cost, so the mark can overshoot b.
        let mark = match referee.cut(player, &a, &mass)? {
            Some(y) if cmp_scalar(&y, &b).is_le() => y,
            Some(_) | None if mode == Mode::Chore => b.clone(),
            _ => {
                return Err(Error::Internal(format!(
                    "player {player} cannot place its cake mark inside [{a}, {b}]"
                )))
            }
        };
        marks.push((mark, player));
    }
    match mode {
        // Smallest marks go left; ties favour the lower index.
        Mode::Cake => marks.sort_by(|x, y| cmp_scalar(&x.0, &y.0).then(x.1.cmp(&y.1))),
        // Largest marks go left; ties favour the lower index.
        Mode::Chore => marks.sort_by(|x, y| cmp_scalar(&y.0, &x.0).then(x.1.cmp(&y.1))),
    }
    let split = marks[k - 1].0.clone();
    let right = marks.split_off(k).into_iter().map(|(_, p)| p).collect();
    let left = marks.into_iter().map(|(_, p)| p).collect();
    even_paz_block(referee, mode, left, a, split.clone(), pieces)?;
    even_paz_block(referee, mode, right, split, b, pieces)
}

/// Banach-Knaster last diminisher for cake; `n(n+1)/2 - 1` cut queries.
///
/// In each round every remaining player marks where `[a, .]` reaches `1/n`
/// for it; the smallest mark (earliest player on ties) takes `[a, mark]`.
pub fn last_diminisher<V>(referee: &mut QueryReferee<V>) -> Result<Allocation>
where
    V: Valuation<Value = Scalar>,
{
    let n = referee.players();
    if n == 0 {
        return Err(invalid("last diminisher needs at least one player"));
    }
    let share = Scalar::new(1.into(), (n as i64).into());
    let mut pieces = vec![Piece::empty(); n];
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut a = Scalar::zero();
    while remaining.len() > 1 {
        let mut best: Option<(Scalar, usize)> = None;
        for (slot, &player) in remaining.iter().enumerate() {
            let mark = referee.cut(player, &a, &share)?.ok_or_else(|| {
                Error::Internal(format!(
                    "player {player} has less than 1/n left of [{a}, 1]"
                ))
            })?;
            if best.as_ref().is_none_or(|(m, _)| mark < *m) {
                best = Some((mark, slot));
            }
        }
        let (mark, slot) = best.expect("at least two players remain");
        let player = remaining.remove(slot);
        pieces[player] = interval_piece(&a, &mark)?;
        a = mark;
    }
    pieces[remaining[0]] = interval_piece(&a, &Scalar::one())?;
    Ok(Allocation { pieces })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlayerShare {
    pub player: usize,
    #[serde(with = "crate::geometry::scalar_str")]
    pub value: Scalar,
    #[serde(with = "crate::geometry::scalar_str")]
    pub width: Scalar,
    pub satisfied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProportionalityReport {
    pub mode: Mode,
    pub proportional: bool,
    pub players: Vec<PlayerShare>,
}

impl ProportionalityReport {
    pub fn violations(&self) -> impl Iterator<Item = &PlayerShare> {
        self.players.iter().filter(|p| !p.satisfied)
    }
}

/// Exact per-player proportionality check; the partition is checked first.
pub fn check_proportional<V>(
    allocation: &Allocation,
    valuations: &[V],
    mode: Mode,
) -> Result<ProportionalityReport>
where
    V: Valuation<Value = Scalar>,
{
    if allocation.players() != valuations.len() {
        return Err(invalid(format!(
            "{} pieces for {} valuations",
            allocation.players(),
            valuations.len()
        )));
    }
    allocation.check_partition()?;
    let share = Scalar::new(1.into(), (valuations.len() as i64).into());
    let mut players = Vec::with_capacity(valuations.len());
    for (player, (piece, v)) in allocation.pieces.iter().zip(valuations).enumerate() {
        let value = value_of_piece(v, piece)?;
        let satisfied = match mode {
            Mode::Cake => value >= share,
            Mode::Chore => value <= share,
        };
        players.push(PlayerShare {
            player,
            value,
            width: piece.width(),
            satisfied,
        });
    }
    let proportional = players.iter().all(|p| p.satisfied);
    Ok(ProportionalityReport {
        mode,
        proportional,
        players,
    })
}

/// `|X| <= 1/n` and `v(X) >= 1/(2n)`.
pub fn is_heavy<V>(v: &V, piece: &Piece, n: usize) -> Result<bool>
where
    V: Valuation<Value = Scalar>,
{
    let n = int(n as i64);
    Ok(piece.width() * &n <= Scalar::one()
        && value_of_piece(v, piece)? * int(2) * n >= Scalar::one())
}

/// `|X| >= 1/(2n)` and `v(X) <= 1/n`.
pub fn is_light<V>(v: &V, piece: &Piece, n: usize) -> Result<bool>
where
    V: Valuation<Value = Scalar>,
{
    let n = int(n as i64);
    Ok(piece.width() * int(2) * &n >= Scalar::one()
        && value_of_piece(v, piece)? * n <= Scalar::one())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LightCount {
    /// Players whose piece is light for them.
    pub light: usize,
    /// Pieces narrower than `1/(2n)`.
    pub narrow: usize,
}

/// Counts light pieces (and narrow ones) of an allocation, exactly.
pub fn count_light_pieces<V>(allocation: &Allocation, valuations: &[V]) -> Result<LightCount>
where
    V: Valuation<Value = Scalar>,
{
    let n = valuations.len();
    let half_share = Scalar::new(1.into(), (2 * n as i64).into());
    let mut light = 0;
    let mut narrow = 0;
    for (piece, v) in allocation.pieces.iter().zip(valuations) {
        if is_light(v, piece, n)? {
            light += 1;
        }
        if piece.width() < half_share {
            narrow += 1;
        }
    }
    Ok(LightCount { light, narrow })
}
