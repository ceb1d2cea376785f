//! Rigorous numerics for the Voronoi-plus-correction score of sphere packings.
//!
//! * [`interval`]: outward-rounded interval arithmetic.
//! * [`packing`]: FCC/HCP generators, patch documents, neighbor and triangle
//!   enumeration.
//! * [`voronoi`]: Voronoi cells by half-space clipping with certified volumes.
//! * [`score`]: the correction term and the score, plus its cancellation
//!   identities.
//! * [`prover`]: branch-and-bound lower-bound prover with interval and LP
//!   witnesses and replayable certificates.

pub mod decimal;
pub mod interval;
pub mod packing;
pub mod prover;
pub mod score;
pub mod voronoi;

pub use interval::{Interval, IntervalError};

/// Geometric tolerance for minimum-distance and edge-length checks.
pub const TOL_GEOM: f64 = 1e-12;
