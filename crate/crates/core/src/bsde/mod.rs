//! Penalized reflected BSDEs with constrained jumps: the tree and regression
//! solvers, stopping rules and the monotone limit in the penalty level.

pub mod limit;
pub mod lsmc;
pub mod spec;
pub mod stopping;
pub mod tree;

pub use limit::{snell_limit, SnellLimit, DEFAULT_SCHEDULE};
pub use lsmc::{solve_penalized_lsmc, BsdeLsmcOptions, LsmcSolution};
pub use spec::BsdeSpec;
pub use stopping::{optimal_stopping_time, reflected_with_density, stopped_bsde_solve, StopRule};
pub use tree::{solve_penalized, PenalizedSolution};
