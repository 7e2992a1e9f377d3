//! Box-counting dimension of orbits, trajectory bundles and spirals near
//! planar singular points and polycycles, together with the closed-form
//! dimension and cyclicity formulas they are checked against.

pub mod dimension;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod neighborhood;
pub mod retmaps;
pub mod scenario;
pub mod sequence;
pub mod theorems;

pub use error::{Error, Result, SequenceViolation};
