//! The primal game: discretization, backward dynamic programming for the
//! lower value, the induced stopping strategy and the upper value.

pub mod dpp;
pub mod grid;
pub mod lsmc;
pub mod strategy;
pub mod value;

pub use dpp::{dpp_backward, GameLattice, GameOptions, ValueField};
pub use grid::{discretize_control, GameGrid, MarkCell, MarkPartition};
pub use lsmc::{Estimate, LsmcGame, LsmcOptions};
pub use strategy::{extract_stopping_strategy, StopQuery, StoppingStrategy};
pub use value::{best_response_value, lower_value, roll_forward, truncation_sweep, upper_value, TruncationReport};
