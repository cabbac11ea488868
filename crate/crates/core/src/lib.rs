//! Slope-based convergence diagnostics for first-order descent methods.
//!
//! The crate is organized around a simple pipeline: solvers built on a
//! majorize-minimize loop produce iterate traces; slope estimators attach
//! descent-rate information to points; Kurdyka-Lojasiewicz fitting turns
//! (gap, slope) samples into rate certificates; and the diagnostics module
//! checks the inequalities that drive the convergence theory against
//! recorded runs.

pub mod approx;
pub mod desing;
pub mod diag;
pub mod error;
pub mod kl;
pub mod metric;
pub mod mm;
pub mod objective;
pub mod slope;
pub mod solvers;
pub mod trace;

pub use error::{Error, Result};
pub use metric::{Ball, BoundingBox, Vector};
pub use objective::Objective;
pub use trace::Trace;
