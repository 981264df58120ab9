//! Wolff and Riesz potentials of computable measures, the sublinear integral
//! equation `u = W_{a,p}(u^q dsigma) + r` solved by monotone iteration between
//! explicit sub- and supersolutions, and numeric checks of the existence
//! conditions and two-sided pointwise estimates that govern that equation.
//!
//! The only interface a measure must expose is its ball-mass oracle
//! `t -> sigma(B(x, t))`; see [`measure::Measure`]. Potentials live in
//! [`potential`], condition checks in [`conditions`], the general solver in
//! [`solver`], and the fast 1-D fractional path in [`radial`].

pub mod cli;
pub mod conditions;
pub mod error;
pub mod measure;
pub mod potential;
pub mod powerlog;
pub mod quad;
pub mod radial;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
pub use measure::{Measure, MollifiedAtom, Point, RadialSegment};
pub use potential::{
    finiteness_check, riesz, weighted_wolff, wolff, wolff_windowed, BasePotential,
    PotentialParams, PotentialValue,
};
