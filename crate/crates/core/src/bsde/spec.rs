//! Data of a reflected BSDE with constrained jumps.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{CadlagPath, ProblemSpec};

/// `f(t, path, y, z, v)` with `v` one entry per mark.
pub type DriverFn = Arc<dyn Fn(f64, &CadlagPath, f64, &[f64], &[f64]) -> f64 + Send + Sync>;
/// `chi(t, path, y, z, mark)`.
pub type ConstraintFn = Arc<dyn Fn(f64, &CadlagPath, f64, &[f64], usize) -> f64 + Send + Sync>;
type TerminalFn = Arc<dyn Fn(&CadlagPath) -> f64 + Send + Sync>;
type BarrierFn = Arc<dyn Fn(f64, &CadlagPath) -> f64 + Send + Sync>;

/// Default bound on `|Y|` before the recursion is declared divergent.
pub const DEFAULT_DIVERGENCE_BOUND: f64 = 1e12;

/// Terminal value, barrier, driver and jump constraint on top of the forward
/// dynamics of a [`ProblemSpec`].
#[derive(Clone)]
pub struct BsdeSpec {
    forward: ProblemSpec,
    terminal: TerminalFn,
    barrier: BarrierFn,
    driver: DriverFn,
    constraint: ConstraintFn,
    driver_lipschitz: f64,
    constraint_lipschitz: f64,
    divergence_bound: f64,
    picard: bool,
}

impl fmt::Debug for BsdeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BsdeSpec")
            .field("forward", &self.forward)
            .field("driver_lipschitz", &self.driver_lipschitz)
            .field("constraint_lipschitz", &self.constraint_lipschitz)
            .field("divergence_bound", &self.divergence_bound)
            .field("picard", &self.picard)
            .finish_non_exhaustive()
    }
}

impl BsdeSpec {
    /// The linear equation of the game: barrier and terminal value `Psi`,
    /// driver `f(t, X)` and constraint `chi(t, X, e)`, none depending on
    /// `(y, z, v)`.
    pub fn linear(problem: &ProblemSpec) -> Self {
        let horizon = problem.horizon();
        let (p1, p2, p3, p4) = (problem.clone(), problem.clone(), problem.clone(), problem.clone());
        Self {
            forward: problem.clone(),
            terminal: Arc::new(move |path| p1.barrier(horizon, path)),
            barrier: Arc::new(move |t, path| p2.barrier(t, path)),
            driver: Arc::new(move |t, path, _, _, _| p3.running_cost(t, path)),
            constraint: Arc::new(move |t, path, _, _, e| p4.intervention_cost(t, path, e)),
            driver_lipschitz: 0.0,
            constraint_lipschitz: 0.0,
            divergence_bound: DEFAULT_DIVERGENCE_BOUND,
            picard: false,
        }
    }

    pub fn with_terminal(mut self, f: impl Fn(&CadlagPath) -> f64 + Send + Sync + 'static) -> Self {
        self.terminal = Arc::new(f);
        self
    }

    pub fn with_barrier(mut self, f: impl Fn(f64, &CadlagPath) -> f64 + Send + Sync + 'static) -> Self {
        self.barrier = Arc::new(f);
        self
    }

    pub fn with_driver(
        mut self,
        lipschitz: f64,
        f: impl Fn(f64, &CadlagPath, f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.driver = Arc::new(f);
        self.driver_lipschitz = lipschitz;
        self
    }

    pub fn with_constraint(
        mut self,
        lipschitz: f64,
        f: impl Fn(f64, &CadlagPath, f64, &[f64], usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.constraint = Arc::new(f);
        self.constraint_lipschitz = lipschitz;
        self
    }

    pub fn with_divergence_bound(mut self, bound: f64) -> Self {
        self.divergence_bound = bound;
        self
    }

    /// Re-evaluate the driver once with the freshly computed `y`.
    pub fn with_picard(mut self, on: bool) -> Self {
        self.picard = on;
        self
    }

    pub fn forward(&self) -> &ProblemSpec {
        &self.forward
    }

    pub fn terminal(&self, path: &CadlagPath) -> f64 {
        (self.terminal)(path)
    }

    pub fn barrier(&self, t: f64, path: &CadlagPath) -> f64 {
        (self.barrier)(t, path)
    }

    pub fn driver(&self, t: f64, path: &CadlagPath, y: f64, z: &[f64], v: &[f64]) -> f64 {
        (self.driver)(t, path, y, z, v)
    }

    pub fn constraint(&self, t: f64, path: &CadlagPath, y: f64, z: &[f64], mark: usize) -> f64 {
        (self.constraint)(t, path, y, z, mark)
    }

    pub fn driver_lipschitz(&self) -> f64 {
        self.driver_lipschitz
    }

    pub fn constraint_lipschitz(&self) -> f64 {
        self.constraint_lipschitz
    }

    pub fn divergence_bound(&self) -> f64 {
        self.divergence_bound
    }

    pub fn picard(&self) -> bool {
        self.picard
    }

    /// Check `S_T <= xi` on a terminal path.
    pub fn check_terminal(&self, path: &CadlagPath) -> Result<f64> {
        let xi = self.terminal(path);
        let s = self.barrier(self.forward.horizon(), path);
        if s > xi {
            return Err(Error::Precondition(format!(
                "barrier {s} exceeds the terminal value {xi} at the horizon"
            )));
        }
        Ok(xi)
    }
}
