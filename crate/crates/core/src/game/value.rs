//! Lower and upper game values on the tree, the roll-forward check and the
//! truncation sweep.

use rayon::prelude::*;

use crate::error::Result;
use crate::model::ProblemSpec;

use super::dpp::{continuation_values, dpp_backward, GameLattice, GameOptions, ValueField};
use super::grid::GameGrid;
use super::strategy::{StopQuery, StoppingStrategy};

/// `R_0` of the backward recursion.
pub fn lower_value(spec: &ProblemSpec, grid: &GameGrid, budget: usize, opts: &GameOptions) -> Result<f64> {
    Ok(dpp_backward(spec, grid, budget, opts)?.root_value())
}

/// Best response of the controller to `strategy` on an existing lattice:
/// `U = Psi` where the strategy stops, otherwise
/// `U = min_b {cost_b + f dt + E[U(next)]}`. Interventions at the stopping
/// time are not executed.
pub fn best_response_value(lattice: &GameLattice, strategy: &StoppingStrategy) -> Result<f64> {
    let steps = lattice.steps();
    let prob = lattice.branch_prob();
    let last = lattice.level(steps);
    let mut values: Vec<f64> = last.arrivals.iter().map(|a| a.barrier).collect();
    for i in (0..steps).rev() {
        let level = lattice.level(i);
        let cont = continuation_values(level, &values, prob);
        let t = lattice.time(i);
        values = level
            .arrivals
            .par_iter()
            .map(|a| {
                let q = StopQuery { step: i, time: t, path: &a.path, budget: a.budget };
                if strategy.decide(&q)? {
                    return Ok(a.barrier);
                }
                let mut m = f64::INFINITY;
                for opt in &a.options {
                    m = m.min(opt.cost + cont[opt.post]);
                }
                Ok(m)
            })
            .collect::<Result<Vec<f64>>>()?;
    }
    Ok(values[0])
}

/// `inf_u J(u before tau, tau)` with `tau` given by `strategy`, over every
/// grid control with at most `budget` interventions.
pub fn upper_value(
    spec: &ProblemSpec,
    grid: &GameGrid,
    budget: usize,
    strategy: &StoppingStrategy,
    opts: &GameOptions,
) -> Result<f64> {
    strategy.check_grid(grid)?;
    let lattice = GameLattice::build(spec, grid, budget, opts)?;
    best_response_value(&lattice, strategy)
}

/// Expected payoff of `strategy` against the controller that always plays
/// the minimizing batch of `field`, computed by pushing probability mass
/// forward through the lattice.
pub fn roll_forward(field: &ValueField, strategy: &StoppingStrategy) -> Result<f64> {
    let lattice = field.lattice();
    let prob = lattice.branch_prob();
    let mut mass = vec![1.0];
    let mut total = 0.0;
    for i in 0..=lattice.steps() {
        let level = lattice.level(i);
        let t = lattice.time(i);
        let mut post_mass = vec![0.0; level.posts.len()];
        for (a, node) in level.arrivals.iter().enumerate() {
            let q = mass[a];
            if q == 0.0 {
                continue;
            }
            let query = StopQuery { step: i, time: t, path: &node.path, budget: node.budget };
            if strategy.decide(&query)? {
                total += q * node.barrier;
                continue;
            }
            let opt = field.best_option(i, a).expect("non-terminal nodes have options");
            total += q * opt.cost;
            post_mass[opt.post] += q;
        }
        if i == lattice.steps() {
            break;
        }
        let mut next = vec![0.0; lattice.level(i + 1).arrivals.len()];
        for (p, node) in level.posts.iter().enumerate() {
            let q = post_mass[p];
            if q == 0.0 {
                continue;
            }
            total += q * node.running;
            for &c in &node.children {
                next[c] += q * prob;
            }
        }
        mass = next;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationReport {
    /// `(k, lower value)` in the order requested.
    pub rows: Vec<(usize, f64)>,
    /// Values never increase along the (sorted) budgets.
    pub non_increasing: bool,
    /// `Y^k - Y^{k_max}` per row.
    pub gaps: Vec<f64>,
    /// Smallest `C` with `gap <= C / sqrt(k)` over rows with `k >= 1`.
    pub fitted_constant: f64,
}

/// Lower values for each budget in `budgets` (sorted ascending).
pub fn truncation_sweep(
    spec: &ProblemSpec,
    grid: &GameGrid,
    budgets: &[usize],
    opts: &GameOptions,
) -> Result<TruncationReport> {
    let mut ks = budgets.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let rows: Vec<(usize, f64)> = ks
        .iter()
        .map(|&k| Ok((k, lower_value(spec, grid, k, opts)?)))
        .collect::<Result<_>>()?;
    let non_increasing = rows.windows(2).all(|w| w[1].1 <= w[0].1);
    let floor = rows.last().map_or(0.0, |r| r.1);
    let gaps: Vec<f64> = rows.iter().map(|r| r.1 - floor).collect();
    let fitted_constant = rows
        .iter()
        .zip(&gaps)
        .filter(|(r, _)| r.0 >= 1)
        .map(|(r, g)| g * (r.0 as f64).sqrt())
        .fold(0.0, f64::max);
    Ok(TruncationReport { rows, non_increasing, gaps, fitted_constant })
}
