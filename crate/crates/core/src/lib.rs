//! Numerical toolkit for topological singularities of S¹-valued fields in
//! the plane: liftings with jump sets, Jacobian currents and degrees, flat
//! and H⁻¹ norms, the vortex energy functionals, the ball construction and
//! lattice recovery sequences.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod balls;
pub mod currents;
pub mod energies;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod grid_field;
pub mod measures;
pub mod poisson;
pub mod recovery;
pub mod runner;

pub use error::{Error, Result};
pub use geometry::{Point, Rect, Region, Vec2};
pub use grid_field::{Domain, S1GridField, ScalarGridField, VectorGridField};
