//! Robertson-Webb query accounting.
//!
//! Every protocol-valuation interaction goes through a [`QueryReferee`], which
//! bills one query per eval or cut (including cuts that have no answer), keeps
//! an append-only log and enforces an optional total budget.

use std::cell::RefCell;
use std::io::Write;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{format_scalar, parse_scalar, Scalar};
use crate::valuation::{Quantity, Valuation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    Eval,
    Cut,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Query<T> {
    Eval { x: Scalar, y: Scalar },
    Cut { x: Scalar, r: T },
}

impl<T> Query<T> {
    pub fn kind(&self) -> QueryKind {
        match self {
            Query::Eval { .. } => QueryKind::Eval,
            Query::Cut { .. } => QueryKind::Cut,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Answer<T> {
    Value(T),
    Point(Scalar),
    NoAnswer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryRecord<T> {
    pub player: usize,
    pub query: Query<T>,
    pub answer: Answer<T>,
}

/// One JSON-lines row of an exported query log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryRecordWire {
    pub kind: QueryKind,
    pub player: usize,
    pub args: [String; 2],
    /// `null` encodes a cut with no answer.
    pub answer: Option<String>,
}

impl<T: Quantity> QueryRecord<T> {
    pub fn to_wire(&self) -> QueryRecordWire {
        let args = match &self.query {
            Query::Eval { x, y } => [format_scalar(x), format_scalar(y)],
            Query::Cut { x, r } => [format_scalar(x), r.encode()],
        };
        let answer = match &self.answer {
            Answer::Value(v) => Some(v.encode()),
            Answer::Point(p) => Some(format_scalar(p)),
            Answer::NoAnswer => None,
        };
        QueryRecordWire {
            kind: self.query.kind(),
            player: self.player,
            args,
            answer,
        }
    }

    pub fn from_wire(w: &QueryRecordWire) -> Result<Self> {
        let x = parse_scalar(&w.args[0])?;
        let (query, answer) = match w.kind {
            QueryKind::Eval => {
                let y = parse_scalar(&w.args[1])?;
                let a = w
                    .answer
                    .as_deref()
                    .ok_or_else(|| Error::Parse("eval record without answer".into()))?;
                (Query::Eval { x, y }, Answer::Value(T::decode(a)?))
            }
            QueryKind::Cut => {
                let r = T::decode(&w.args[1])?;
                let a = match w.answer.as_deref() {
                    Some(p) => Answer::Point(parse_scalar(p)?),
                    None => Answer::NoAnswer,
                };
                (Query::Cut { x, r }, a)
            }
        };
        Ok(Self {
            player: w.player,
            query,
            answer,
        })
    }
}

/// Counting, logging, budget-enforcing wrapper around a list of valuations.
#[derive(Debug)]
pub struct QueryReferee<V: Valuation> {
    valuations: Vec<V>,
    per_player: Vec<usize>,
    budget: Option<usize>,
    log: Vec<QueryRecord<V::Value>>,
}

impl<V: Valuation> QueryReferee<V> {
    pub fn new(valuations: Vec<V>) -> Self {
        let n = valuations.len();
        Self {
            valuations,
            per_player: vec![0; n],
            budget: None,
            log: Vec::new(),
        }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn players(&self) -> usize {
        self.valuations.len()
    }

    pub fn total(&self) -> usize {
        self.log.len()
    }

    pub fn per_player(&self) -> &[usize] {
        &self.per_player
    }

    pub fn budget(&self) -> Option<usize> {
        self.budget
    }

    pub fn log(&self) -> &[QueryRecord<V::Value>] {
        &self.log
    }

    /// Hands the wrapped valuations back, ending the run.
    pub fn into_valuations(self) -> Vec<V> {
        self.valuations
    }

    fn admit(&self, player: usize) -> Result<()> {
        if player >= self.valuations.len() {
            return Err(Error::NoSuchPlayer {
                player,
                players: self.valuations.len(),
            });
        }
        if let Some(budget) = self.budget {
            if self.log.len() >= budget {
                return Err(Error::BudgetExhausted { budget });
            }
        }
        Ok(())
    }

    fn bill(&mut self, record: QueryRecord<V::Value>) {
        self.per_player[record.player] += 1;
        self.log.push(record);
    }

    pub fn eval(&mut self, player: usize, x: &Scalar, y: &Scalar) -> Result<V::Value> {
        self.admit(player)?;
        let value = self.valuations[player].eval(x, y)?;
        self.bill(QueryRecord {
            player,
            query: Query::Eval {
                x: x.clone(),
                y: y.clone(),
            },
            answer: Answer::Value(value.clone()),
        });
        Ok(value)
    }

    pub fn cut(&mut self, player: usize, x: &Scalar, r: &V::Value) -> Result<Option<Scalar>> {
        self.admit(player)?;
        let point = self.valuations[player].cut(x, r)?;
        self.bill(QueryRecord {
            player,
            query: Query::Cut {
                x: x.clone(),
                r: r.clone(),
            },
            answer: point.clone().map_or(Answer::NoAnswer, Answer::Point),
        });
        Ok(point)
    }

    /// Re-issues `log` through this referee, returning the indices whose
    /// answers differ from the logged ones.
    pub fn replay(&mut self, log: &[QueryRecord<V::Value>]) -> Result<Vec<usize>> {
        let mut mismatches = Vec::new();
        for (i, rec) in log.iter().enumerate() {
            let answer = match &rec.query {
                Query::Eval { x, y } => Answer::Value(self.eval(rec.player, x, y)?),
                Query::Cut { x, r } => self
                    .cut(rec.player, x, r)?
                    .map_or(Answer::NoAnswer, Answer::Point),
            };
            if answer != rec.answer {
                mismatches.push(i);
            }
        }
        Ok(mismatches)
    }

    /// Writes the log as JSON lines, one record per line.
    pub fn write_log_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for rec in &self.log {
            serde_json::to_writer(&mut out, &rec.to_wire())?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// A referee shared between a protocol-level wrapper and its users.
pub type SharedReferee<V> = Rc<RefCell<QueryReferee<V>>>;

pub fn shared<V: Valuation>(referee: QueryReferee<V>) -> SharedReferee<V> {
    Rc::new(RefCell::new(referee))
}

/// One player's valuation seen through a shared referee; every call is billed.
#[derive(Debug)]
pub struct BilledValuation<V: Valuation> {
    referee: SharedReferee<V>,
    player: usize,
}

impl<V: Valuation> BilledValuation<V> {
    pub fn new(referee: SharedReferee<V>, player: usize) -> Self {
        Self { referee, player }
    }

    pub fn player(&self) -> usize {
        self.player
    }
}

impl<V: Valuation> Clone for BilledValuation<V> {
    fn clone(&self) -> Self {
        Self {
            referee: Rc::clone(&self.referee),
            player: self.player,
        }
    }
}

impl<V: Valuation> Valuation for BilledValuation<V> {
    type Value = V::Value;

    fn eval(&self, x: &Scalar, y: &Scalar) -> Result<V::Value> {
        self.referee.borrow_mut().eval(self.player, x, y)
    }

    fn cut(&self, x: &Scalar, r: &V::Value) -> Result<Option<Scalar>> {
        self.referee.borrow_mut().cut(self.player, x, r)
    }
}
