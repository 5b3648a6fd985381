//! Scenario lattice of the uncontrolled jump diffusion.
//!
//! From a node at `t_i` the lattice branches over the `2^d` sign patterns of
//! the Brownian increment (`+-sqrt(dt)` per component) and over "no jump" or
//! "jump with mark `e`" at `t_i`. A jump moves the state by
//! `gamma(t_i, X, e)` on the arrival path, then the Euler step runs from the
//! post-jump path. Branch `b` encodes the pair `(w, j)` as
//! `b = w * (1 + marks) + j` with `j = 0` meaning no jump.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{CadlagPath, JumpKind, ProblemSpec};

use super::sde::euler_increment;

/// Default cap on the total node count.
pub const DEFAULT_NODE_LIMIT: usize = 4_000_000;

#[derive(Debug, Clone)]
pub struct LatticeNode {
    /// Path up to `t_i`, before any jump at `t_i`.
    pub path: CadlagPath,
    /// Post-jump path at `t_i` for each mark; empty on the last level.
    pub jumped: Vec<CadlagPath>,
    /// Child index in the next level for each branch; empty on the last level.
    pub children: Vec<usize>,
    /// Probability of reaching the node under the base measure.
    pub reach: f64,
}

impl LatticeNode {
    /// Path right after the jump option `j` (0 = no jump) at this node.
    pub fn post_jump_path(&self, j: usize) -> &CadlagPath {
        if j == 0 {
            &self.path
        } else {
            &self.jumped[j - 1]
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioLattice {
    dim: usize,
    dt: f64,
    jump_probs: Vec<f64>,
    levels: Vec<Vec<LatticeNode>>,
    merged: bool,
}

/// Number of nodes of the full non-recombining tree of the given depth.
pub fn tree_size(branches: usize, depth: usize) -> u128 {
    (0..=depth as u32)
        .map(|i| (branches as u128).saturating_pow(i))
        .fold(0u128, |a, b| a.saturating_add(b))
}

/// Largest depth whose full tree fits under `limit` nodes.
pub fn feasible_depth(branches: usize, limit: usize) -> usize {
    (0..64).take_while(|&d| tree_size(branches, d) <= limit as u128).last().unwrap_or(0)
}

impl ScenarioLattice {
    pub fn build(spec: &ProblemSpec, steps: usize) -> Result<Self> {
        Self::build_with_limit(spec, steps, DEFAULT_NODE_LIMIT)
    }

    /// Build the lattice over `steps` equal steps of `[0, T]`. Markov specs
    /// merge nodes with bit-identical states at the same level.
    pub fn build_with_limit(spec: &ProblemSpec, steps: usize, limit: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Precondition("lattice needs at least one step".into()));
        }
        let dim = spec.dim();
        if dim > 16 {
            return Err(Error::Precondition(format!("{dim} Brownian components is too many for a lattice")));
        }
        let dt = spec.horizon() / steps as f64;
        let marks = spec.marks();
        let jump_probs: Vec<f64> = (0..marks.len()).map(|e| marks.weight(e) * dt).collect();
        let total: f64 = jump_probs.iter().sum();
        if total >= 1.0 {
            return Err(Error::Precondition(format!(
                "jump probability per step {total} must stay below one; refine the grid"
            )));
        }
        let option_probs = lattice_probs(&jump_probs);
        let brownian_weight = 1.0 / (1usize << dim) as f64;
        let merged = spec.is_markov();
        let branches = (1usize << dim) * (1 + marks.len());
        if !merged && tree_size(branches, steps) > limit as u128 {
            return Err(Error::Capacity {
                required: tree_size(branches, steps),
                depth: steps,
                limit,
                feasible_depth: feasible_depth(branches, limit),
            });
        }

        let mut lattice = Self {
            dim,
            dt,
            jump_probs,
            levels: Vec::with_capacity(steps + 1),
            merged,
        };
        let root = LatticeNode {
            path: CadlagPath::new(0.0, spec.x0()),
            jumped: Vec::new(),
            children: Vec::new(),
            reach: 1.0,
        };
        lattice.levels.push(vec![root]);
        let mut count = 1usize;

        for i in 0..steps {
            let t = i as f64 * dt;
            let next_t = (i + 1) as f64 * dt;
            let mut next: Vec<LatticeNode> = Vec::new();
            let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
            let level = &mut lattice.levels[i];
            for node in level.iter_mut() {
                node.jumped = (0..marks.len())
                    .map(|e| {
                        let mut p = node.path.clone();
                        let delta = spec.jump(t, &p, e);
                        p.apply_jump(t, &delta, JumpKind::Random { mark: e })?;
                        Ok(p)
                    })
                    .collect::<Result<_>>()?;
                node.children = Vec::with_capacity(branches);
                for w in 0..(1usize << dim) {
                    let dw = brownian(dim, w, dt);
                    for j in 0..=marks.len() {
                        let from = node.post_jump_path(j);
                        let inc = euler_increment(spec, t, from, dt, &dw);
                        let x: Vec<f64> = from.current().iter().zip(&inc).map(|(a, b)| a + b).collect();
                        let prob = option_probs[j] * brownian_weight;
                        let key = merged.then(|| x.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
                        let existing = key.as_ref().and_then(|k| index.get(k).copied());
                        let child = match existing {
                            Some(c) => {
                                next[c].reach += node.reach * prob;
                                c
                            }
                            None => {
                                let mut p = from.clone();
                                p.push(next_t, &x)?;
                                next.push(LatticeNode {
                                    path: p,
                                    jumped: Vec::new(),
                                    children: Vec::new(),
                                    reach: node.reach * prob,
                                });
                                if let Some(k) = key {
                                    index.insert(k, next.len() - 1);
                                }
                                next.len() - 1
                            }
                        };
                        node.children.push(child);
                    }
                }
            }
            count += next.len();
            if count > limit {
                return Err(Error::Capacity {
                    required: count as u128,
                    depth: i + 1,
                    limit,
                    feasible_depth: i,
                });
            }
            lattice.levels.push(next);
        }
        Ok(lattice)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn is_merged(&self) -> bool {
        self.merged
    }

    pub fn marks(&self) -> usize {
        self.jump_probs.len()
    }

    pub fn level(&self, i: usize) -> &[LatticeNode] {
        &self.levels[i]
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// `lambda(e) dt`.
    pub fn jump_prob(&self, e: usize) -> f64 {
        self.jump_probs[e]
    }

    /// Probability of no jump in one step.
    pub fn no_jump_prob(&self) -> f64 {
        1.0 - self.jump_probs.iter().sum::<f64>()
    }

    pub fn brownian_count(&self) -> usize {
        1 << self.dim
    }

    pub fn branch_count(&self) -> usize {
        self.brownian_count() * (1 + self.marks())
    }

    /// `(w, j)` for branch `b`.
    pub fn branch_parts(&self, b: usize) -> (usize, usize) {
        (b / (1 + self.marks()), b % (1 + self.marks()))
    }

    pub fn branch(&self, w: usize, j: usize) -> usize {
        w * (1 + self.marks()) + j
    }

    /// Probability of the jump option `j` (0 = no jump).
    pub fn jump_option_prob(&self, j: usize) -> f64 {
        if j == 0 {
            self.no_jump_prob()
        } else {
            self.jump_probs[j - 1]
        }
    }

    pub fn branch_prob(&self, b: usize) -> f64 {
        let (_, j) = self.branch_parts(b);
        self.jump_option_prob(j) / self.brownian_count() as f64
    }

    pub fn brownian_increment(&self, w: usize) -> Vec<f64> {
        brownian(self.dim, w, self.dt)
    }
}

fn lattice_probs(jump_probs: &[f64]) -> Vec<f64> {
    std::iter::once(1.0 - jump_probs.iter().sum::<f64>())
        .chain(jump_probs.iter().copied())
        .collect()
}

/// Increment with component `c` equal to `+sqrt(dt)` when bit `c` of `w` is
/// set and `-sqrt(dt)` otherwise.
pub fn brownian(dim: usize, w: usize, dt: f64) -> Vec<f64> {
    let sd = dt.sqrt();
    (0..dim).map(|c| if w >> c & 1 == 1 { sd } else { -sd }).collect()
}
