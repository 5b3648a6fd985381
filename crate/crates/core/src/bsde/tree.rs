//! Penalized reflected BSDE on the scenario lattice.
//!
//! At a node at `t_i` write `A_0` for the conditional mean of `Y_{i+1}` over
//! the no-jump branches and `A_e` for the mean over the branches where mark
//! `e` fires at `t_i`, each plus its driver term `f dt` (the driver is read
//! on the post-jump path). With `p_e = lambda(e) dt` and a density
//! `nu in [0, n]^marks` the reweighted one-step value is
//!
//! ```text
//! L(nu) = [(1 - p) A_0 + sum_e nu_e p_e (A_e + chi_e)] / [(1 - p) + sum_e nu_e p_e]
//! ```
//!
//! which is the one-step conditional expectation under the measure with
//! jump intensity `nu * lambda`, normalized so the branch weights still sum
//! to one. The penalized step takes the minimum over the density box, then
//! reflects: `Y_i = max(S_i, min_nu L(nu))`. For `n = 0` the jumps are
//! switched off and the step is the no-jump Snell envelope.
//!
//! `L` is linear-fractional in `nu`, so the minimum sits at a vertex: `nu_e
//! = n` exactly on the marks with `A_e + chi_e` below the optimum. Scanning
//! the prefixes of the marks sorted by `A_e + chi_e` finds it.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::CadlagPath;
use crate::sim::lattice::{LatticeNode, ScenarioLattice};

use super::spec::BsdeSpec;

/// One-step quantities at a node.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct NodeParts {
    pub z: Vec<f64>,
    /// Jump-branch mean minus no-jump mean, per mark.
    pub v: Vec<f64>,
    /// No-jump mean plus driver.
    pub a0: f64,
    /// Jump-branch means plus driver, per mark.
    pub a: Vec<f64>,
    pub chi: Vec<f64>,
}

/// Means over the Brownian branches for each jump option, the mean over all
/// branches and `Z`.
pub(crate) fn branch_means(lattice: &ScenarioLattice, node: &LatticeNode, next: &[f64]) -> (Vec<f64>, f64, Vec<f64>) {
    let options = 1 + lattice.marks();
    let bw = 1.0 / lattice.brownian_count() as f64;
    let dt = lattice.dt();
    let mut means = vec![0.0; options];
    let mut z = vec![0.0; lattice.dim()];
    for w in 0..lattice.brownian_count() {
        let dw = lattice.brownian_increment(w);
        for (j, m) in means.iter_mut().enumerate() {
            let y = next[node.children[lattice.branch(w, j)]];
            *m += bw * y;
            let p = lattice.jump_option_prob(j) * bw;
            for (zk, dwk) in z.iter_mut().zip(&dw) {
                *zk += p * y * dwk / dt;
            }
        }
    }
    let mean = means.iter().enumerate().map(|(j, m)| lattice.jump_option_prob(j) * m).sum();
    (means, mean, z)
}

/// Driver and constraint terms at time `t` given the branch means, the
/// arrival path and the post-jump paths.
#[allow(clippy::too_many_arguments)]
pub(crate) fn node_parts(
    spec: &BsdeSpec,
    t: f64,
    dt: f64,
    path: &CadlagPath,
    jumped: &[CadlagPath],
    means: &[f64],
    z: Vec<f64>,
    y: f64,
) -> NodeParts {
    let v: Vec<f64> = means[1..].iter().map(|m| m - means[0]).collect();
    let a0 = means[0] + spec.driver(t, path, y, &z, &v) * dt;
    let a = jumped
        .iter()
        .enumerate()
        .map(|(e, p)| means[e + 1] + spec.driver(t, p, y, &z, &v) * dt)
        .collect();
    let chi = (0..jumped.len()).map(|e| spec.constraint(t, path, y, &z, e)).collect();
    NodeParts { z, v, a0, a, chi }
}

/// `1 - sum_e p_e`, computed as the lattice does.
pub(crate) fn no_jump(probs: &[f64]) -> f64 {
    1.0 - probs.iter().sum::<f64>()
}

/// `L(nu)` from the module docs, with `probs[e] = lambda(e) dt`.
pub(crate) fn reweighted(probs: &[f64], parts: &NodeParts, nu: &[f64]) -> f64 {
    let q = no_jump(probs);
    let mut num = q * parts.a0;
    let mut den = q;
    for (e, p) in probs.iter().enumerate() {
        let w = nu[e] * p;
        num += w * (parts.a[e] + parts.chi[e]);
        den += w;
    }
    num / den
}

/// `min_{nu in [0, n]} L(nu)` and the marks where the minimizer sits at `n`.
pub(crate) fn penalized_min(probs: &[f64], parts: &NodeParts, n: f64) -> (f64, Vec<bool>) {
    let marks = probs.len();
    let mut active = vec![false; marks];
    if n == 0.0 || marks == 0 {
        return (parts.a0, active);
    }
    let mut order: Vec<usize> = (0..marks).collect();
    order.sort_by(|&x, &y| (parts.a[x] + parts.chi[x]).total_cmp(&(parts.a[y] + parts.chi[y])));
    let mut best = parts.a0;
    let mut best_len = 0;
    let mut nu = vec![0.0; marks];
    for (k, &e) in order.iter().enumerate() {
        nu[e] = n;
        let l = reweighted(probs, parts, &nu);
        if l < best {
            best = l;
            best_len = k + 1;
        }
    }
    for &e in &order[..best_len] {
        active[e] = true;
    }
    (best, active)
}

pub(crate) fn jump_probs(lattice: &ScenarioLattice) -> Vec<f64> {
    (0..lattice.marks()).map(|e| lattice.jump_prob(e)).collect()
}

/// Solved penalized equation at one penalty level.
#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedSolution {
    penalty: f64,
    /// Per level and node, levels `0..=steps`.
    y: Vec<Vec<f64>>,
    barrier: Vec<Vec<f64>>,
    /// Per level `0..steps`.
    yhat: Vec<Vec<f64>>,
    z: Vec<Vec<Vec<f64>>>,
    v: Vec<Vec<Vec<f64>>>,
    dk_plus: Vec<Vec<f64>>,
    dk_minus: Vec<Vec<f64>>,
    active: Vec<Vec<Vec<bool>>>,
    k_plus_total: f64,
    k_minus_total: f64,
}

struct StepOut {
    y: f64,
    barrier: f64,
    yhat: f64,
    z: Vec<f64>,
    v: Vec<f64>,
    active: Vec<bool>,
    dk_minus: f64,
}

/// Backward recursion for penalty level `n >= 0` on `lattice`, which must be
/// built from `spec.forward()`.
pub fn solve_penalized(spec: &BsdeSpec, lattice: &ScenarioLattice, n: f64) -> Result<PenalizedSolution> {
    if !(n >= 0.0) || !n.is_finite() {
        return Err(Error::Precondition(format!("penalty level {n} must be finite and non-negative")));
    }
    let steps = lattice.steps();
    let horizon = lattice.time(steps);
    let bound = spec.divergence_bound();
    let dt = lattice.dt();
    let probs = jump_probs(lattice);
    let mut y = vec![Vec::new(); steps + 1];
    let mut barrier = vec![Vec::new(); steps + 1];
    let last = lattice.level(steps);
    y[steps] = last.iter().map(|node| spec.check_terminal(&node.path)).collect::<Result<_>>()?;
    barrier[steps] = last.iter().map(|node| spec.barrier(horizon, &node.path)).collect();
    check_bound(&y[steps], steps, bound)?;

    let mut yhat = vec![Vec::new(); steps];
    let mut z = vec![Vec::new(); steps];
    let mut v = vec![Vec::new(); steps];
    let mut dk_plus = vec![Vec::new(); steps];
    let mut dk_minus = vec![Vec::new(); steps];
    let mut active = vec![Vec::new(); steps];
    for i in (0..steps).rev() {
        let t = lattice.time(i);
        let next = &y[i + 1];
        let out: Vec<StepOut> = lattice
            .level(i)
            .par_iter()
            .map(|node| {
                let (means, mean, zi) = branch_means(lattice, node, next);
                let s = spec.barrier(t, &node.path);
                let parts_at = |z: Vec<f64>, y: f64| node_parts(spec, t, dt, &node.path, &node.jumped, &means, z, y);
                let mut parts = parts_at(zi.clone(), mean);
                let (mut h, mut act) = penalized_min(&probs, &parts, n);
                if spec.picard() {
                    parts = parts_at(zi, s.max(h));
                    (h, act) = penalized_min(&probs, &parts, n);
                }
                StepOut {
                    y: s.max(h),
                    barrier: s,
                    yhat: h,
                    dk_minus: parts.a0 - h,
                    z: parts.z,
                    v: parts.v,
                    active: act,
                }
            })
            .collect();
        y[i] = out.iter().map(|o| o.y).collect();
        check_bound(&y[i], i, bound)?;
        barrier[i] = out.iter().map(|o| o.barrier).collect();
        yhat[i] = out.iter().map(|o| o.yhat).collect();
        dk_plus[i] = out.iter().map(|o| o.y - o.yhat).collect();
        dk_minus[i] = out.iter().map(|o| o.dk_minus).collect();
        z[i] = out.iter().map(|o| o.z.clone()).collect();
        v[i] = out.iter().map(|o| o.v.clone()).collect();
        active[i] = out.into_iter().map(|o| o.active).collect();
    }
    let total = |inc: &[Vec<f64>]| -> f64 {
        let mut s = 0.0;
        for (i, level) in inc.iter().enumerate() {
            for (node, d) in lattice.level(i).iter().zip(level) {
                s += node.reach * d;
            }
        }
        s
    };
    let k_plus_total = total(&dk_plus);
    let k_minus_total = total(&dk_minus);
    Ok(PenalizedSolution {
        penalty: n,
        y,
        barrier,
        yhat,
        z,
        v,
        dk_plus,
        dk_minus,
        active,
        k_plus_total,
        k_minus_total,
    })
}

fn check_bound(values: &[f64], step: usize, bound: f64) -> Result<()> {
    match values.iter().find(|v| !(v.abs() <= bound)) {
        Some(&value) => Err(Error::Divergence { step, value, bound }),
        None => Ok(()),
    }
}

impl PenalizedSolution {
    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn steps(&self) -> usize {
        self.y.len() - 1
    }

    pub fn root_value(&self) -> f64 {
        self.y[0][0]
    }

    pub fn y(&self, i: usize) -> &[f64] {
        &self.y[i]
    }

    pub fn barrier(&self, i: usize) -> &[f64] {
        &self.barrier[i]
    }

    /// Value before reflection, levels `0..steps`.
    pub fn yhat(&self, i: usize) -> &[f64] {
        &self.yhat[i]
    }

    pub fn z(&self, i: usize, node: usize) -> &[f64] {
        &self.z[i][node]
    }

    pub fn v(&self, i: usize, node: usize) -> &[f64] {
        &self.v[i][node]
    }

    /// Reflection increment `Y_i - yhat_i >= 0`.
    pub fn dk_plus(&self, i: usize) -> &[f64] {
        &self.dk_plus[i]
    }

    /// Penalty increment `A_0 - yhat_i >= 0`.
    pub fn dk_minus(&self, i: usize) -> &[f64] {
        &self.dk_minus[i]
    }

    /// Marks where the minimizing density sits at the bound.
    pub fn active(&self, i: usize, node: usize) -> &[bool] {
        &self.active[i][node]
    }

    /// Expected total reflection under the base measure.
    pub fn k_plus_total(&self) -> f64 {
        self.k_plus_total
    }

    /// Expected total penalty under the base measure.
    pub fn k_minus_total(&self) -> f64 {
        self.k_minus_total
    }

    /// Largest barrier breach `S - Y` or slackness defect `|dK+ (Y - S)|`.
    pub fn max_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.y.len() {
            for (node, (&y, &s)) in self.y[i].iter().zip(&self.barrier[i]).enumerate() {
                worst = worst.max(s - y);
                if i < self.dk_plus.len() {
                    worst = worst.max((self.dk_plus[i][node] * (y - s)).abs());
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn one_step_by_hand() {
        // One step of 1, x0 = 0, dX = dW, jump -1 with lambda = 0.5, chi = 0.1.
        let mut over = std::collections::BTreeMap::new();
        over.insert("lambda".to_string(), 0.5);
        let problem = fixtures::build("one-step", &over).unwrap();
        let spec = BsdeSpec::linear(&problem);
        let lattice = ScenarioLattice::build(&problem, 1).unwrap();
        // A_0 = 0, A_1 = -1, chi = 0.1, p = 0.5.
        let sol = solve_penalized(&spec, &lattice, 0.0).unwrap();
        assert_eq!(sol.root_value(), 0.0);
        let sol = solve_penalized(&spec, &lattice, 2.0).unwrap();
        // L = (0.5 * 0 + 1.0 * -0.9) / 1.5 = -0.6, reflected to S = 0.
        assert!((sol.yhat(0)[0] + 0.6).abs() < 1e-15);
        assert_eq!(sol.root_value(), 0.0);
        assert!((sol.dk_plus(0)[0] - 0.6).abs() < 1e-15);
        assert!((sol.dk_minus(0)[0] - 0.6).abs() < 1e-15);
        assert_eq!(sol.active(0, 0), &[true]);
        assert_eq!(sol.v(0, 0), &[-1.0]);
    }

    #[test]
    fn negative_penalty_is_rejected() {
        let problem = fixtures::named("f1").unwrap();
        let lattice = ScenarioLattice::build(&problem, 2).unwrap();
        let spec = BsdeSpec::linear(&problem);
        assert!(matches!(solve_penalized(&spec, &lattice, -1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn terminal_below_barrier_is_rejected() {
        let problem = fixtures::named("f1").unwrap();
        let lattice = ScenarioLattice::build(&problem, 2).unwrap();
        let spec = BsdeSpec::linear(&problem).with_terminal(|p| p.current()[0] - 1.0);
        assert!(matches!(solve_penalized(&spec, &lattice, 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn exploding_driver_is_reported() {
        let problem = fixtures::named("f1").unwrap();
        let lattice = ScenarioLattice::build(&problem, 4).unwrap();
        let spec = BsdeSpec::linear(&problem)
            .with_driver(1e9, |_, _, y, _, _| 1e9 * (y.abs() + 1.0))
            .with_divergence_bound(1e6);
        assert!(matches!(solve_penalized(&spec, &lattice, 1.0), Err(Error::Divergence { .. })));
    }

    #[test]
    fn single_mark_activity_matches_sign_of_v_plus_chi() {
        let problem = fixtures::named("reward-flow").unwrap();
        let lattice = ScenarioLattice::build(&problem, 4).unwrap();
        let spec = BsdeSpec::linear(&problem);
        let sol = solve_penalized(&spec, &lattice, 8.0).unwrap();
        for i in 0..4 {
            for node in 0..lattice.level(i).len() {
                // The driver is constant, so V + chi < 0 is the binding test.
                let binding = sol.v(i, node)[0] + 0.3 < 0.0;
                assert_eq!(sol.active(i, node)[0], binding);
            }
        }
    }
}
