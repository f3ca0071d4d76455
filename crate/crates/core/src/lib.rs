//! Proportional cake cutting and chore division in the Robertson–Webb query
//! model, with exact rational valuations, a dual-valuation reduction between
//! the two problems, and an adversary over balanced value trees.

pub mod adversary;
pub mod dual;
pub mod error;
pub mod geometry;
pub mod protocols;
pub mod referee;
pub mod valuation;
pub mod valuetree;

pub use error::{Error, Result};
pub use geometry::{Interval, Piece, Scalar};
pub use valuation::{PiecewiseConstant, Valuation};
