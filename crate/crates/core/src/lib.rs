//! Zero-sum games of impulse control versus stopping.
//!
//! The crate solves the same game by two independent routes and lets the
//! caller compare them:
//!
//! * [`game`] runs backward dynamic programming on the primal game over a
//!   discretized control set (time grid, finite marks, bounded budget).
//! * [`bsde`] solves the penalized reflected BSDE with jumps on a scenario
//!   lattice; its monotone limit in the penalty level is the non-linear Snell
//!   envelope.
//! * [`randomized`] implements the control-randomization side: densities of
//!   the point measure, Doléans-Dade weights, the randomized objective and
//!   the saddle-point checks.
//!
//! [`model`] holds the shared domain types and [`sim`] the forward
//! simulation machinery (Euler scheme with jumps and impulses, Poisson
//! random measures, scenario lattices).

pub mod bsde;
pub mod error;
pub mod fixtures;
pub mod game;
pub mod model;
pub mod randomized;
pub mod regression;
pub mod rng;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
