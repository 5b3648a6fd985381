//! The randomized objective `J(nu, tau)`: expected payoff `Psi` at `tau`
//! plus running cost plus `chi` at every atom before `tau`, under the
//! measure where the point measure has intensity `nu * lambda`.

use rayon::prelude::*;

use crate::bsde::StopRule;
use crate::error::{Error, Result};
use crate::game::{StopQuery, StoppingStrategy};
use crate::model::{cost_functional, ImpulseControl, JumpKind, ProblemSpec};
use crate::rng::{derive_seed, path_rng};
use crate::sim::noise::IncrementKind;
use crate::sim::{simulate_sde, DriverNoise, ScenarioLattice};
use crate::stats::mean_and_stderr;

use super::density::{PathDensity, TreeDensity};
use super::girsanov::girsanov_weight;

/// Exact objective on the lattice: mass is pushed forward with the one-step
/// weights `(1 - p) / M` (no jump) and `nu_e p_e / M` (mark `e`), `M` the
/// sum of the numerators, and split evenly over the Brownian branches.
pub fn randomized_value_tree(
    problem: &ProblemSpec,
    lattice: &ScenarioLattice,
    density: &TreeDensity,
    rule: &StopRule,
) -> Result<f64> {
    density.check(lattice, f64::INFINITY, 0.0)?;
    if rule.flags().len() != lattice.steps() + 1 {
        return Err(Error::Dimension { expected: lattice.steps() + 1, got: rule.flags().len() });
    }
    let steps = lattice.steps();
    let dt = lattice.dt();
    let bw = 1.0 / lattice.brownian_count() as f64;
    let q = lattice.no_jump_prob();
    let mut mass = vec![1.0];
    let mut total = 0.0;
    for i in 0..=steps {
        let t = lattice.time(i);
        let level = lattice.level(i);
        let mut next = if i < steps { vec![0.0; lattice.level(i + 1).len()] } else { Vec::new() };
        for (k, node) in level.iter().enumerate() {
            let m = mass[k];
            if m == 0.0 {
                continue;
            }
            if i == steps || rule.stops(i, k) {
                total += m * problem.barrier(t, &node.path);
                continue;
            }
            let nu = density.at(i, k);
            let norm = q + (0..lattice.marks()).map(|e| nu[e] * lattice.jump_prob(e)).sum::<f64>();
            for j in 0..=lattice.marks() {
                let weight = if j == 0 { q } else { nu[j - 1] * lattice.jump_prob(j - 1) } / norm;
                let mut cost = problem.running_cost(t, node.post_jump_path(j)) * dt;
                if j > 0 {
                    cost += problem.intervention_cost(t, &node.path, j - 1);
                }
                total += m * weight * cost;
                for w in 0..lattice.brownian_count() {
                    next[node.children[lattice.branch(w, j)]] += m * weight * bw;
                }
            }
        }
        mass = next;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct McValue {
    pub value: f64,
    pub std_error: f64,
    /// Effective sample size `(sum w)^2 / sum w^2` of the weights.
    pub ess: f64,
    pub warning: Option<String>,
}

/// Importance-sampled objective: simulate under the base measure, stop by
/// `strategy` on the grid of spacing `dt`, weight each payoff by `kappa_T`.
pub fn randomized_value_mc(
    problem: &ProblemSpec,
    density: &PathDensity,
    strategy: &StoppingStrategy,
    samples: usize,
    dt: f64,
    seed: u64,
) -> Result<McValue> {
    if samples == 0 {
        return Err(Error::Precondition("need at least one sample".into()));
    }
    let horizon = problem.horizon();
    let steps = crate::sim::grid_steps(horizon, dt)?;
    if strategy.steps() != steps {
        return Err(Error::Spec(format!("strategy has {} steps, grid has {steps}", strategy.steps())));
    }
    let intensities = problem.marks().weights().to_vec();
    let seed = derive_seed(seed, "randomized-value");
    let none = ImpulseControl::empty();
    let draws: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = path_rng(seed, k as u64);
            let noise =
                DriverNoise::sample(problem.dim(), dt, steps, IncrementKind::Gaussian, &intensities, &mut rng)?;
            let path = simulate_sde(problem, &none, horizon, &noise)?;
            let mut stop = steps;
            for i in 0..=steps {
                let t = i as f64 * dt;
                let prefix = path.prefix(t);
                if strategy.decide(&StopQuery { step: i, time: t, path: &prefix, budget: 0 })? {
                    stop = i;
                    break;
                }
            }
            let tau = (stop as f64 * dt).min(horizon);
            let mut payoff = cost_functional(problem, &path, &none, tau, 0.0, dt)?;
            for (idx, jump) in path.jumps().iter().enumerate() {
                if let JumpKind::Random { mark } = jump.kind {
                    if jump.time < tau {
                        payoff += problem.intervention_cost(jump.time, &path.prefix_before_jump(idx), mark);
                    }
                }
            }
            let weight = girsanov_weight(density, noise.atoms(), &intensities, horizon, dt)?;
            Ok((weight, payoff))
        })
        .collect::<Result<_>>()?;
    let weighted: Vec<f64> = draws.iter().map(|(w, p)| w * p).collect();
    let (value, std_error) = mean_and_stderr(&weighted);
    let (sum, sum_sq) = draws.iter().fold((0.0, 0.0), |(s, q), (w, _)| (s + w, q + w * w));
    let ess = if sum_sq > 0.0 { sum * sum / sum_sq } else { 0.0 };
    let warning = (ess < 0.05 * samples as f64)
        .then(|| format!("effective sample size {ess:.1} is below 5% of {samples} samples"));
    Ok(McValue { value, std_error, ess, warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn constant_jump_cost_counts_expected_jumps() {
        // Psi = 0, f = 0, chi = c, nu = 2, tau = T: J = c * nu * lambda * T in
        // continuous time; on the lattice each step contributes the jump
        // probability 2p / (1 - p + 2p).
        let mut over = std::collections::BTreeMap::new();
        over.insert("level".to_string(), 0.0);
        let problem = fixtures::build("constant", &over).unwrap();
        let lattice = ScenarioLattice::build(&problem, 4).unwrap();
        let d = TreeDensity::constant(&lattice, 2.0);
        let v = randomized_value_tree(&problem, &lattice, &d, &StopRule::at_horizon(&lattice)).unwrap();
        let p = 0.25;
        let expected = 4.0 * 0.3 * 2.0 * p / (1.0 - p + 2.0 * p);
        assert!((v - expected).abs() < 1e-14);
    }

    #[test]
    fn mc_matches_closed_form_poisson_mean() {
        let mut over = std::collections::BTreeMap::new();
        over.insert("level".to_string(), 0.0);
        let problem = fixtures::build("constant", &over).unwrap();
        let strategy = StoppingStrategy::never_stop(4, 1.0);
        let r = randomized_value_mc(&problem, &PathDensity::constant(2.0), &strategy, 20_000, 0.25, 3).unwrap();
        let expected = 0.3 * 2.0 * 1.0 * 1.0;
        assert!((r.value - expected).abs() < 4.0 * r.std_error, "{} +- {}", r.value, r.std_error);
        assert!(r.warning.is_none());
    }
}
