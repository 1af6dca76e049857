//! Near-equal-area triangle dissections of polygons.
//!
//! The crate covers the full pipeline from combinatorial dissection types to
//! coordinates: exact and high-precision arithmetic, 2-adic coloring
//! certificates, the area-difference polynomial with a numeric optimizer,
//! explicit constructions with very small area range, and the doubly
//! exponential lower bound on that range.

pub mod adpoly;
pub mod coloring;
pub mod constructions;
pub mod dissection;
pub mod error;
pub mod fixtures;
pub mod gapbound;
pub mod interchange;
pub mod numerics;

pub use error::{Error, Result};
pub use numerics::{BigFloat, Rational, Scalar, TwoAdicValue};
