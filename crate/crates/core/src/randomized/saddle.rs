//! The saddle density of a penalized solution and randomized checks of the
//! saddle-point inequalities.

use rand::Rng;
use rayon::prelude::*;

use crate::bsde::{optimal_stopping_time, PenalizedSolution, StopRule};
use crate::error::Result;
use crate::model::ProblemSpec;
use crate::rng::{derive_seed, path_rng};
use crate::sim::ScenarioLattice;

use super::density::TreeDensity;
use super::value::randomized_value_tree;

/// Default tolerance of the saddle checks on the lattice.
pub const SADDLE_TOLERANCE: f64 = 1e-10;

/// `nu = n` on the marks where the penalized minimum binds, `floor` (usually
/// zero) elsewhere.
pub fn saddle_density(sol: &PenalizedSolution, lattice: &ScenarioLattice, floor: f64) -> TreeDensity {
    let n = sol.penalty();
    TreeDensity::from_fn(lattice, |i, node, e| if sol.active(i, node)[e] { n.max(floor) } else { floor })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub probe: usize,
    /// `J(nu*, tau)` for the probe's random stopping rule.
    pub star_tau: f64,
    /// `J(nu*, tau_n)`.
    pub star_taun: f64,
    /// `J(nu, tau_n)` for the probe's random density.
    pub nu_taun: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleReport {
    pub rows: Vec<ProbeRow>,
    pub worst_violation: f64,
    /// `|J(nu*, tau_n) - Y^n_0|`.
    pub identity_error: f64,
    pub tolerance: f64,
}

impl SaddleReport {
    pub fn passed(&self) -> bool {
        self.worst_violation <= self.tolerance && self.identity_error <= self.tolerance
    }
}

/// Draw `probes` uniform densities in `[0, n]` and rules that flag each
/// node with probability 0.3, and check
/// `J(nu*, tau) <= J(nu*, tau_n) <= J(nu, tau_n)`.
pub fn verify_saddle(
    problem: &ProblemSpec,
    lattice: &ScenarioLattice,
    sol: &PenalizedSolution,
    probes: usize,
    seed: u64,
) -> Result<SaddleReport> {
    let n = sol.penalty();
    let star = saddle_density(sol, lattice, 0.0);
    let taun = optimal_stopping_time(sol, 0);
    let star_taun = randomized_value_tree(problem, lattice, &star, &taun)?;
    let identity_error = (star_taun - sol.root_value()).abs();
    let seed = derive_seed(seed, "saddle-probes");
    let rows: Vec<ProbeRow> = (0..probes)
        .into_par_iter()
        .map(|probe| {
            let mut rng = path_rng(seed, probe as u64);
            let nu = TreeDensity::from_fn(lattice, |_, _, _| n * rng.random::<f64>());
            let tau = StopRule::random(lattice, 0.3, &mut rng);
            nu.check(lattice, n, 0.0)?;
            let star_tau = randomized_value_tree(problem, lattice, &star, &tau)?;
            let nu_taun = randomized_value_tree(problem, lattice, &nu, &taun)?;
            let violation = (star_tau - star_taun).max(star_taun - nu_taun).max(0.0);
            Ok(ProbeRow { probe, star_tau, star_taun, nu_taun, violation })
        })
        .collect::<Result<_>>()?;
    let worst_violation = rows.iter().map(|r| r.violation).fold(0.0, f64::max);
    Ok(SaddleReport { rows, worst_violation, identity_error, tolerance: SADDLE_TOLERANCE })
}
