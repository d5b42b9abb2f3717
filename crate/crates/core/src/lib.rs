//! Finsler steepest descent for closed planar curves.
//!
//! The crate is organised bottom-up:
//!
//! * [`curve`] holds the P1 finite-element representation of a closed curve,
//!   finite differences, edge frames and the `l2` / `h1` metric matrices.
//! * [`energy`] is the kernel (currents-type) matching energy and its
//!   canonical and Sobolev gradients.
//! * [`penalty`] implements the discrete rigidity and similarity operators
//!   and their total-variation penalties.
//! * [`socp`] builds the cone program whose solution is the Finsler gradient
//!   and solves it, with an independent KKT certificate.
//! * [`descent`] runs the descent loop with Wolfe steps, the synthetic flow,
//!   and the rigidity diagnostics.

pub mod curve;
pub mod descent;
pub mod energy;
pub mod error;
pub mod penalty;
pub mod socp;
pub mod vec2;

pub use curve::{CurveMetrics, DiscreteCurve, EdgeFrame, TangentField};
pub use error::{FinslerError, Result};
pub use vec2::Vec2;
