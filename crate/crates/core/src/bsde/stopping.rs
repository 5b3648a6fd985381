//! Stopping rules on the lattice and BSDEs stopped by them.
//!
//! A rule flags nodes; a scenario stops at the first flagged node along its
//! branch. The last level is always a stopping level.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::randomized::density::TreeDensity;
use crate::sim::lattice::ScenarioLattice;

use super::spec::BsdeSpec;
use super::tree::{branch_means, jump_probs, node_parts, reweighted, PenalizedSolution};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopRule {
    /// Per level `0..=steps` and node.
    flags: Vec<Vec<bool>>,
}

impl StopRule {
    /// The horizon level is forced to stop.
    pub fn from_flags(lattice: &ScenarioLattice, mut flags: Vec<Vec<bool>>) -> Result<Self> {
        if flags.len() != lattice.steps() + 1 {
            return Err(Error::Dimension { expected: lattice.steps() + 1, got: flags.len() });
        }
        for (i, level) in flags.iter().enumerate() {
            if level.len() != lattice.level(i).len() {
                return Err(Error::Dimension { expected: lattice.level(i).len(), got: level.len() });
            }
        }
        if let Some(last) = flags.last_mut() {
            last.iter_mut().for_each(|f| *f = true);
        }
        Ok(Self { flags })
    }

    pub fn from_fn(lattice: &ScenarioLattice, f: impl Fn(usize, usize) -> bool) -> Self {
        let steps = lattice.steps();
        let flags = (0..=steps)
            .map(|i| (0..lattice.level(i).len()).map(|node| i == steps || f(i, node)).collect())
            .collect();
        Self { flags }
    }

    pub fn immediate(lattice: &ScenarioLattice) -> Self {
        Self::from_fn(lattice, |_, _| true)
    }

    pub fn at_horizon(lattice: &ScenarioLattice) -> Self {
        Self::from_fn(lattice, |_, _| false)
    }

    /// Independent flags with probability `p` each.
    pub fn random<R: Rng>(lattice: &ScenarioLattice, p: f64, rng: &mut R) -> Self {
        let steps = lattice.steps();
        let flags = (0..=steps)
            .map(|i| (0..lattice.level(i).len()).map(|_| i == steps || rng.random_bool(p)).collect())
            .collect();
        Self { flags }
    }

    pub fn stops(&self, i: usize, node: usize) -> bool {
        self.flags[i][node]
    }

    pub fn flags(&self) -> &[Vec<bool>] {
        &self.flags
    }

    /// Every node flagged here is flagged in `other`, so `other` stops no
    /// later on every branch.
    pub fn is_subset_of(&self, other: &StopRule) -> bool {
        self.flags
            .iter()
            .zip(&other.flags)
            .all(|(a, b)| a.iter().zip(b).all(|(x, y)| !x || *y))
    }
}

/// First hitting of `{Y = S}` at or after level `from`.
pub fn optimal_stopping_time(sol: &PenalizedSolution, from: usize) -> StopRule {
    let steps = sol.steps();
    let flags = (0..=steps)
        .map(|i| {
            sol.y(i)
                .iter()
                .zip(sol.barrier(i))
                .map(|(y, s)| i == steps || (i >= from && y == s))
                .collect()
        })
        .collect();
    StopRule { flags }
}

fn check_rule(lattice: &ScenarioLattice, rule: &StopRule) -> Result<()> {
    if rule.flags.len() != lattice.steps() + 1 {
        return Err(Error::Dimension { expected: lattice.steps() + 1, got: rule.flags.len() });
    }
    Ok(())
}

fn density_at(density: Option<&TreeDensity>, marks: usize, i: usize, node: usize) -> Vec<f64> {
    density.map_or_else(|| vec![0.0; marks], |d| d.at(i, node).to_vec())
}

fn backward(
    spec: &BsdeSpec,
    lattice: &ScenarioLattice,
    density: Option<&TreeDensity>,
    step: impl Fn(usize, usize, f64, f64) -> f64 + Sync,
) -> Result<Vec<f64>> {
    if let Some(d) = density {
        d.check(lattice, f64::INFINITY, 0.0)?;
    }
    let steps = lattice.steps();
    let dt = lattice.dt();
    let probs = jump_probs(lattice);
    let mut next: Vec<f64> =
        lattice.level(steps).iter().map(|node| spec.check_terminal(&node.path)).collect::<Result<_>>()?;
    for i in (0..steps).rev() {
        let t = lattice.time(i);
        next = lattice
            .level(i)
            .par_iter()
            .enumerate()
            .map(|(k, node)| {
                let (means, mean, z) = branch_means(lattice, node, &next);
                let parts = node_parts(spec, t, dt, &node.path, &node.jumped, &means, z, mean);
                let nu = density_at(density, lattice.marks(), i, k);
                step(i, k, spec.barrier(t, &node.path), reweighted(&probs, &parts, &nu))
            })
            .collect();
    }
    Ok(next)
}

/// Value at the root of the BSDE with driver `f + sum_e (v_e + chi_e) nu_e
/// lambda_e` (in the normalized one-step form), stopped by `rule` with
/// terminal value `S` at the stopping node and `xi` at the horizon. No
/// density means `nu = 0`.
pub fn stopped_bsde_solve(
    spec: &BsdeSpec,
    lattice: &ScenarioLattice,
    rule: &StopRule,
    density: Option<&TreeDensity>,
) -> Result<f64> {
    check_rule(lattice, rule)?;
    let root = backward(spec, lattice, density, |i, k, s, cont| if rule.stops(i, k) { s } else { cont })?;
    Ok(root[0])
}

/// Root value of the reflected BSDE with the density driver, i.e. the best
/// stopping rule against a fixed density.
pub fn reflected_with_density(spec: &BsdeSpec, lattice: &ScenarioLattice, density: Option<&TreeDensity>) -> Result<f64> {
    let root = backward(spec, lattice, density, |_, _, s, cont| s.max(cont))?;
    Ok(root[0])
}
