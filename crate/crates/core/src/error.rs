use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("time step {dt} does not divide horizon {horizon}")]
    Grid { dt: f64, horizon: f64 },

    #[error("invalid specification: {0}")]
    Spec(String),

    #[error("mark {0} lies outside every partition cell")]
    Partition(usize),

    #[error("lattice capacity exceeded: {required} nodes needed at depth {depth}, limit {limit}; largest feasible depth is {feasible_depth}")]
    Capacity {
        required: u128,
        depth: usize,
        limit: usize,
        feasible_depth: usize,
    },

    #[error("backward recursion diverged at step {step}: |Y| = {value} exceeds {bound}")]
    Divergence { step: usize, value: f64, bound: f64 },

    #[error("backend inconsistency: {0}")]
    Inconsistent(String),
}
