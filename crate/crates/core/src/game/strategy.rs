//! Non-anticipative stopping strategies on the game grid.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{CadlagPath, ImpulseControl, ProblemSpec};
use crate::sim::{simulate_sde, DriverNoise};

use super::dpp::ValueField;
use super::grid::GameGrid;

/// What the stopper observes at grid time `t_i`: the state path up to
/// `t_i` under the interventions made strictly before `t_i`, and the budget
/// the controller has left.
#[derive(Debug, Clone, Copy)]
pub struct StopQuery<'a> {
    pub step: usize,
    pub time: f64,
    pub path: &'a CadlagPath,
    pub budget: usize,
}

type Rule = Arc<dyn Fn(&StopQuery) -> Result<bool> + Send + Sync>;

/// Stop/continue rule per grid time. The last grid time always stops.
#[derive(Clone)]
pub struct StoppingStrategy {
    steps: usize,
    horizon: f64,
    rule: Rule,
}

impl fmt::Debug for StoppingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StoppingStrategy")
            .field("steps", &self.steps)
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

impl StoppingStrategy {
    pub fn new(
        steps: usize,
        horizon: f64,
        rule: impl Fn(&StopQuery) -> Result<bool> + Send + Sync + 'static,
    ) -> Self {
        Self { steps, horizon, rule: Arc::new(rule) }
    }

    pub fn always_stop(steps: usize, horizon: f64) -> Self {
        Self::new(steps, horizon, |_| Ok(true))
    }

    pub fn never_stop(steps: usize, horizon: f64) -> Self {
        Self::new(steps, horizon, |_| Ok(false))
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn decide(&self, query: &StopQuery) -> Result<bool> {
        if query.step >= self.steps {
            return Ok(true);
        }
        (self.rule)(query)
    }

    /// Check that the strategy was built for `grid`.
    pub fn check_grid(&self, grid: &GameGrid) -> Result<()> {
        if self.steps != grid.steps() || (self.horizon - grid.horizon()).abs() > 1e-12 * grid.horizon() {
            return Err(Error::Spec(format!(
                "strategy built for {} steps on [0, {}], grid has {} steps on [0, {}]",
                self.steps,
                self.horizon,
                grid.steps(),
                grid.horizon()
            )));
        }
        Ok(())
    }

    /// First grid index at which the strategy stops when the controller plays
    /// the grid-valued control `u` against `noise`.
    pub fn first_stop(
        &self,
        spec: &ProblemSpec,
        grid: &GameGrid,
        budget: usize,
        u: &ImpulseControl,
        noise: &DriverNoise,
    ) -> Result<usize> {
        self.check_grid(grid)?;
        if u.len() > budget {
            return Err(Error::Precondition(format!("control has {} interventions, budget {budget}", u.len())));
        }
        for i in 0..=grid.steps() {
            let t = grid.time(i);
            let before = u.restrict_before(t);
            let path = simulate_sde(spec, &before, 0.0, noise)?.prefix(t);
            let query = StopQuery { step: i, time: t, path: &path, budget: budget - before.len() };
            if self.decide(&query)? {
                return Ok(i);
            }
        }
        Ok(grid.steps())
    }
}

/// Stop at the first grid time where the lower value `R` of the observed
/// node equals the barrier.
pub fn extract_stopping_strategy(field: &Arc<ValueField>) -> StoppingStrategy {
    let lattice = field.lattice();
    let f = Arc::clone(field);
    StoppingStrategy::new(lattice.steps(), lattice.horizon(), move |q| {
        let a = f.lattice().find_arrival(q.step, q.path, q.budget).ok_or_else(|| {
            Error::Precondition(format!("observed state at step {} is not a lattice node", q.step))
        })?;
        Ok(f.stops(q.step, a))
    })
}
