//! Dual valuations: `v*(x, y) = cut_v(0, y) - cut_v(0, x)`.
//!
//! The dual swaps the roles of width and value. [`DualValuation`] answers
//! queries on `v*` with exactly two base queries each, [`dual_closed_form`]
//! computes the dual of a step function directly, and [`reduction_pipeline`]
//! turns any proportional chore protocol run on duals into heavy pieces for
//! the original valuations.

use std::rc::Rc;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::{scalar_str, Interval, Piece, Scalar};
use crate::protocols::{check_proportional, is_heavy, is_light, Allocation, Mode, Protocol};
use crate::referee::{shared, BilledValuation, QueryReferee};
use crate::valuation::{value_of_piece, DensityBounds, PiecewiseConstant, Valuation};

/// Black-box dual of a positive valuation.
///
/// Positivity of `base` is the caller's obligation; it cannot be checked
/// without spending queries.
#[derive(Clone, Debug)]
pub struct DualValuation<B> {
    base: B,
}

impl<B> DualValuation<B>
where
    B: Valuation<Value = Scalar>,
{
    pub fn new(base: B) -> Self {
        Self { base }
    }

    pub fn base(&self) -> &B {
        &self.base
    }

    fn prefix_cut(&self, x: &Scalar) -> Result<Scalar> {
        self.base.cut(&Scalar::zero(), x)?.ok_or_else(|| {
            Error::Internal(format!(
                "base valuation has no cut for mass {x} from 0; is it normalized?"
            ))
        })
    }
}

/// `eval*(x, y) = cut(0, y) - cut(0, x)`: two base cut queries.
pub fn dual_eval<B>(d: &DualValuation<B>, x: &Scalar, y: &Scalar) -> Result<Scalar>
where
    B: Valuation<Value = Scalar>,
{
    crate::valuation::check_query_range(x, y)?;
    let right = d.prefix_cut(y)?;
    let left = d.prefix_cut(x)?;
    Ok(right - left)
}

/// `cut*(x, r) = eval(0, cut(0, x) + r)`: one base cut plus one base eval.
/// When `cut(0, x) + r > 1` there is no answer and the eval is skipped.
pub fn dual_cut<B>(d: &DualValuation<B>, x: &Scalar, r: &Scalar) -> Result<Option<Scalar>>
where
    B: Valuation<Value = Scalar>,
{
    if x.is_negative() || x > &Scalar::one() {
        return Err(invalid(format!("cut position {x} outside [0, 1]")));
    }
    if r.is_negative() {
        return Err(invalid(format!("cut mass {r} is negative")));
    }
    let end = d.prefix_cut(x)? + r;
    if end > Scalar::one() {
        return Ok(None);
    }
    Ok(Some(d.base.eval(&Scalar::zero(), &end)?))
}

impl<B> Valuation for DualValuation<B>
where
    B: Valuation<Value = Scalar>,
{
    type Value = Scalar;

    fn eval(&self, x: &Scalar, y: &Scalar) -> Result<Scalar> {
        dual_eval(self, x, y)
    }

    fn cut(&self, x: &Scalar, r: &Scalar) -> Result<Option<Scalar>> {
        dual_cut(self, x, r)
    }
}

/// Exact dual of a positive step function: segment `i` of width `w` and
/// density `d` becomes a segment of width `d * w` and density `1 / d`.
pub fn dual_closed_form(v: &PiecewiseConstant) -> Result<PiecewiseConstant> {
    if !v.is_positive() {
        return Err(Error::NotPositive(
            "the dual is defined only for positive valuations".into(),
        ));
    }
    let mut end = Scalar::zero();
    let segments = v
        .segments()
        .map(|(start, stop, density)| {
            end += density * (stop - start);
            (end.clone(), density.recip())
        })
        .collect();
    PiecewiseConstant::new(segments)
}

/// `P*_v`: each `[a, b]` maps to `[v(0, a), v(0, b)]`. Costs two evals per interval.
pub fn dual_piece<V>(v: &V, piece: &Piece) -> Result<Piece>
where
    V: Valuation<Value = Scalar>,
{
    let zero = Scalar::zero();
    let mut out = Vec::with_capacity(piece.intervals().len());
    for iv in piece.intervals() {
        let a = v.eval(&zero, iv.left())?;
        let b = v.eval(&zero, iv.right())?;
        out.push(Interval::new(a, b)?);
    }
    Ok(Piece::normalize(out))
}

#[derive(Clone, Debug, Serialize)]
pub struct PlayerCertificate {
    pub player: usize,
    /// Piece the chore protocol allocated under the dual valuation.
    pub allocated: Piece,
    /// Its dual with respect to `v*`, a candidate heavy piece for `v`.
    pub piece: Piece,
    #[serde(with = "scalar_str")]
    pub width: Scalar,
    #[serde(with = "scalar_str")]
    pub value: Scalar,
    pub light_for_dual: bool,
    pub heavy: bool,
    /// Base queries billed to this player (protocol plus dualization).
    pub queries: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReductionReport {
    pub n: usize,
    pub protocol: Protocol,
    pub players: Vec<PlayerCertificate>,
    pub heavy_count: usize,
    pub required: usize,
    /// Queries the protocol made against the duals.
    pub dual_queries: usize,
    /// Base queries spent answering them.
    pub base_queries_protocol: usize,
    /// Base queries spent dualizing the allocated pieces.
    pub base_queries_dualization: usize,
}

impl ReductionReport {
    pub fn certificates(&self) -> impl Iterator<Item = &PlayerCertificate> {
        self.players.iter().filter(|p| p.heavy)
    }

    pub fn meets_guarantee(&self) -> bool {
        self.heavy_count >= self.required
    }
}

/// Runs a chore protocol on the duals of `vs` and maps the allocation back.
///
/// Every base query (answering dual queries and dualizing pieces) goes
/// through one referee. Verification of proportionality and heaviness is
/// done on the exact valuations and is not billed.
pub fn reduction_pipeline(vs: &[PiecewiseConstant], protocol: Protocol) -> Result<ReductionReport> {
    let n = vs.len();
    if n == 0 {
        return Err(invalid("need at least one valuation"));
    }
    let bounds = DensityBounds::zero_two();
    for (i, v) in vs.iter().enumerate() {
        if !v.is_positive() {
            return Err(Error::NotPositive(format!(
                "valuation {i} has a zero-density segment"
            )));
        }
        if !v.verify_dense(&bounds) {
            return Err(invalid(format!("valuation {i} is not (0,2)-dense")));
        }
    }
    let base = shared(QueryReferee::new(vs.iter().collect::<Vec<_>>()));
    let duals: Vec<_> = (0..n)
        .map(|i| DualValuation::new(BilledValuation::new(Rc::clone(&base), i)))
        .collect();
    let mut dual_referee = QueryReferee::new(duals);
    let allocation: Allocation = protocol.run(&mut dual_referee, Mode::Chore)?;
    let dual_queries = dual_referee.total();
    let base_queries_protocol = base.borrow().total();

    let exact_duals = vs
        .iter()
        .map(dual_closed_form)
        .collect::<Result<Vec<_>>>()?;
    let report = check_proportional(&allocation, &exact_duals, Mode::Chore)?;
    if !report.proportional {
        let bad: Vec<usize> = report.violations().map(|p| p.player).collect();
        return Err(Error::ProtocolViolation(format!(
            "allocation is not proportional for players {bad:?}; the reduction guarantee is void"
        )));
    }

    let duals = dual_referee.into_valuations();
    let mut players = Vec::with_capacity(n);
    for (i, (piece, dual)) in allocation.pieces.iter().zip(&duals).enumerate() {
        let light_for_dual = is_light(&exact_duals[i], piece, n)?;
        let candidate = dual_piece(dual, piece)?;
        let value = value_of_piece(&vs[i], &candidate)?;
        let heavy = is_heavy(&vs[i], &candidate, n)?;
        players.push(PlayerCertificate {
            player: i,
            allocated: piece.clone(),
            width: candidate.width(),
            piece: candidate,
            value,
            light_for_dual,
            heavy,
            queries: 0,
        });
    }
    let base = base.borrow();
    for p in &mut players {
        p.queries = base.per_player()[p.player];
    }
    let heavy_count = players.iter().filter(|p| p.heavy).count();
    Ok(ReductionReport {
        n,
        protocol,
        players,
        heavy_count,
        required: n.div_ceil(3),
        dual_queries,
        base_queries_protocol,
        base_queries_dualization: base.total() - base_queries_protocol,
    })
}

/// Density of the dual over the image of `[l, r]` equals `1 / D_v(l, r)`.
pub fn dual_density_of(v: &PiecewiseConstant, l: &Scalar, r: &Scalar) -> Result<Scalar> {
    let dual = dual_closed_form(v)?;
    let image = dual_piece(v, &Piece::from_bounds(l.clone(), r.clone())?)?;
    let w = image.width();
    if w.is_zero() {
        return Err(invalid("empty interval"));
    }
    Ok(value_of_piece(&dual, &image)? / w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{int, rat};

    fn two_step() -> PiecewiseConstant {
        PiecewiseConstant::new(vec![(rat(1, 2), rat(3, 2)), (int(1), rat(1, 2))]).unwrap()
    }

    #[test]
    fn uniform_is_self_dual() {
        let u = PiecewiseConstant::uniform();
        let d = DualValuation::new(&u);
        assert_eq!(
            dual_eval(&d, &rat(1, 5), &rat(2, 3)).unwrap(),
            rat(2, 3) - rat(1, 5)
        );
        assert_eq!(
            dual_cut(&d, &rat(1, 4), &rat(1, 2)).unwrap(),
            Some(rat(3, 4))
        );
        assert_eq!(dual_cut(&d, &rat(3, 4), &rat(1, 2)).unwrap(), None);
        assert_eq!(dual_closed_form(&u).unwrap(), u);
        let p = Piece::from_bounds(rat(1, 7), rat(2, 5)).unwrap();
        assert_eq!(dual_piece(&u, &p).unwrap(), p);
    }

    #[test]
    fn two_step_dual_values() {
        let v = two_step();
        let d = DualValuation::new(&v);
        assert_eq!(dual_eval(&d, &int(0), &rat(3, 4)).unwrap(), rat(1, 2));
        assert_eq!(dual_eval(&d, &int(0), &int(1)).unwrap(), int(1));
        assert_eq!(dual_cut(&d, &int(0), &rat(1, 2)).unwrap(), Some(rat(3, 4)));
        let closed = dual_closed_form(&v).unwrap();
        let expected =
            PiecewiseConstant::new(vec![(rat(3, 4), rat(2, 3)), (int(1), int(2))]).unwrap();
        assert_eq!(closed, expected);
        assert_eq!(dual_closed_form(&closed).unwrap(), v);
        let half = Piece::from_bounds(int(0), rat(1, 2)).unwrap();
        assert_eq!(
            dual_piece(&v, &half).unwrap(),
            Piece::from_bounds(int(0), rat(3, 4)).unwrap()
        );
    }

    #[test]
    fn non_positive_has_no_closed_form_dual() {
        let v = PiecewiseConstant::new(vec![(rat(1, 2), int(2)), (int(1), int(0))]).unwrap();
        assert!(matches!(dual_closed_form(&v), Err(Error::NotPositive(_))));
        assert!(matches!(
            reduction_pipeline(&[v.clone(), v], Protocol::EvenPaz),
            Err(Error::NotPositive(_))
        ));
    }

    #[test]
    fn each_dual_query_costs_two_base_queries() {
        let v = two_step();
        let base = shared(QueryReferee::new(vec![&v]));
        let d = DualValuation::new(BilledValuation::new(Rc::clone(&base), 0));
        d.eval(&rat(1, 4), &rat(1, 2)).unwrap();
        assert_eq!(base.borrow().total(), 2);
        d.cut(&rat(1, 4), &rat(1, 4)).unwrap();
        assert_eq!(base.borrow().total(), 4);
        // Unanswerable: the eval is never needed.
        assert_eq!(d.cut(&rat(3, 4), &int(1)).unwrap(), None);
        assert_eq!(base.borrow().total(), 5);
    }

    #[test]
    fn uniform_pipeline_certifies_everyone() {
        let vs = vec![PiecewiseConstant::uniform(); 3];
        let rep = reduction_pipeline(&vs, Protocol::EvenPaz).unwrap();
        assert_eq!(rep.heavy_count, 3);
        assert!(rep.meets_guarantee());
        assert!(rep.base_queries_protocol <= 2 * rep.dual_queries);
    }

    #[test]
    fn pipeline_rejects_too_dense_input() {
        let v = PiecewiseConstant::new(vec![(rat(1, 4), int(3)), (int(1), rat(1, 3))]).unwrap();
        assert!(matches!(
            reduction_pipeline(&[v.clone(), v], Protocol::EvenPaz),
            Err(Error::InvalidArgument(_))
        ));
    }
}
