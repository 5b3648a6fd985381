//! Game lattice and the backward dynamic programming recursion for the
//! lower value.
//!
//! Nodes come in two kinds per grid time `t_i`:
//!
//! * arrival nodes: the state path up to `t_i` under the interventions made
//!   strictly before `t_i`, with the remaining budget;
//! * post-batch nodes: an arrival node after one batch of impulses at `t_i`
//!   (possibly empty), with the budget reduced by the batch size.
//!
//! Each post-batch node branches over the `2^d` Brownian sign patterns into
//! arrival nodes at `t_{i+1}`. Path-dependent specs keep every node apart;
//! Markov specs merge nodes with equal state and budget.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{CadlagPath, JumpKind, ProblemSpec};
use crate::sim::lattice::brownian;
use crate::sim::sde::euler_increment;

use super::grid::GameGrid;

/// Default cap on arrival plus post-batch nodes.
pub const DEFAULT_GAME_NODE_LIMIT: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GameOptions {
    /// Largest batch considered at one grid time; `None` means the budget.
    pub max_batch: Option<usize>,
    pub node_limit: usize,
}

impl Default for GameOptions {
    fn default() -> Self {
        Self { max_batch: None, node_limit: DEFAULT_GAME_NODE_LIMIT }
    }
}

/// A candidate batch at an arrival node.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchOption {
    /// Marks (spec mark indices) in application order.
    pub marks: Vec<usize>,
    /// Sequential intervention cost of the batch.
    pub cost: f64,
    /// Post-batch node at the same level.
    pub post: usize,
}

#[derive(Debug, Clone)]
pub struct ArrivalNode {
    pub path: CadlagPath,
    pub budget: usize,
    pub barrier: f64,
    /// Batches in shortlex order, the empty batch first; empty on the last level.
    pub options: Vec<BatchOption>,
}

#[derive(Debug, Clone)]
pub struct PostNode {
    pub path: CadlagPath,
    pub budget: usize,
    /// `f(t_i, X) dt`.
    pub running: f64,
    /// Arrival index at the next level per Brownian branch.
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct GameLevel {
    pub arrivals: Vec<ArrivalNode>,
    pub posts: Vec<PostNode>,
    index: HashMap<Vec<u64>, usize>,
}

#[derive(Debug, Clone)]
pub struct GameLattice {
    steps: usize,
    dt: f64,
    horizon: f64,
    budget: usize,
    dim: usize,
    merged: bool,
    levels: Vec<GameLevel>,
}

fn node_key(merged: bool, path: &CadlagPath, budget: usize) -> Vec<u64> {
    let mut key: Vec<u64> = if merged {
        path.current().iter().map(|v| v.to_bits()).collect()
    } else {
        path.fingerprint()
    };
    key.push(budget as u64);
    key
}

/// All mark sequences of length `0..=max_len` over `marks`, shortlex order.
pub fn batches(marks: &[usize], max_len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    if marks.is_empty() {
        return out;
    }
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(frontier.len() * marks.len());
        for b in &frontier {
            for &m in marks {
                let mut c: Vec<usize> = b.clone();
                c.push(m);
                next.push(c);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Apply `marks` as impulses at time `t`, returning the new path and the
/// summed cost, each cost read on the path before its own impulse.
pub fn apply_batch(spec: &ProblemSpec, t: f64, path: &CadlagPath, marks: &[usize]) -> Result<(CadlagPath, f64)> {
    let mut p = path.clone();
    let mut cost = 0.0;
    for &m in marks {
        cost += spec.intervention_cost(t, &p, m);
        let delta = spec.jump(t, &p, m);
        p.apply_jump(t, &delta, JumpKind::Impulse { mark: m })?;
    }
    Ok((p, cost))
}

impl GameLattice {
    pub fn build(spec: &ProblemSpec, grid: &GameGrid, budget: usize, opts: &GameOptions) -> Result<Self> {
        if (grid.horizon() - spec.horizon()).abs() > 1e-12 * spec.horizon() {
            return Err(Error::Spec(format!(
                "grid horizon {} differs from problem horizon {}",
                grid.horizon(),
                spec.horizon()
            )));
        }
        let marks = grid.marks();
        if marks.iter().any(|&m| m >= spec.marks().len()) {
            return Err(Error::Spec("grid marks exceed the problem's mark space".into()));
        }
        let dim = spec.dim();
        if dim > 16 {
            return Err(Error::Precondition(format!("{dim} Brownian components is too many for a lattice")));
        }
        let steps = grid.steps();
        let dt = grid.dt();
        let merged = spec.is_markov();
        let max_batch = opts.max_batch.unwrap_or(budget).min(budget);
        let all_batches = batches(&marks, max_batch);
        let n_brownian = 1usize << dim;
        let increments: Vec<Vec<f64>> = (0..n_brownian).map(|w| brownian(dim, w, dt)).collect();

        let mut lattice = Self {
            steps,
            dt,
            horizon: spec.horizon(),
            budget,
            dim,
            merged,
            levels: Vec::with_capacity(steps + 1),
        };
        let root_path = CadlagPath::new(0.0, spec.x0());
        let mut root_level = GameLevel::default();
        root_level.index.insert(node_key(merged, &root_path, budget), 0);
        root_level.arrivals.push(ArrivalNode {
            barrier: spec.barrier(0.0, &root_path),
            path: root_path,
            budget,
            options: Vec::new(),
        });
        lattice.levels.push(root_level);
        let mut count = 1usize;

        for i in 0..steps {
            let t = i as f64 * dt;
            let next_t = (i + 1) as f64 * dt;
            let mut next = GameLevel::default();
            let level = &mut lattice.levels[i];
            let mut post_index: HashMap<Vec<u64>, usize> = HashMap::new();
            for a in 0..level.arrivals.len() {
                let allowed = level.arrivals[a].budget.min(max_batch);
                let mut options = Vec::new();
                for b in all_batches.iter().filter(|b| b.len() <= allowed) {
                    let arrival = &level.arrivals[a];
                    let (path, cost) = apply_batch(spec, t, &arrival.path, b)?;
                    let post_budget = arrival.budget - b.len();
                    let key = node_key(merged, &path, post_budget);
                    let post = match post_index.get(&key) {
                        Some(&p) => p,
                        None => {
                            level.posts.push(PostNode {
                                running: spec.running_cost(t, &path) * dt,
                                path,
                                budget: post_budget,
                                children: Vec::new(),
                            });
                            post_index.insert(key, level.posts.len() - 1);
                            level.posts.len() - 1
                        }
                    };
                    options.push(BatchOption { marks: b.clone(), cost, post });
                }
                level.arrivals[a].options = options;
            }
            for post in level.posts.iter_mut() {
                post.children = Vec::with_capacity(n_brownian);
                for dw in &increments {
                    let inc = euler_increment(spec, t, &post.path, dt, dw);
                    let x: Vec<f64> = post.path.current().iter().zip(&inc).map(|(a, b)| a + b).collect();
                    let mut path = post.path.clone();
                    path.push(next_t, &x)?;
                    let key = node_key(merged, &path, post.budget);
                    let child = match next.index.get(&key) {
                        Some(&c) => c,
                        None => {
                            next.arrivals.push(ArrivalNode {
                                barrier: spec.barrier(next_t, &path),
                                path,
                                budget: post.budget,
                                options: Vec::new(),
                            });
                            next.index.insert(key, next.arrivals.len() - 1);
                            next.arrivals.len() - 1
                        }
                    };
                    post.children.push(child);
                }
            }
            count += level.posts.len() + next.arrivals.len();
            if count > opts.node_limit {
                return Err(Error::Capacity {
                    required: count as u128,
                    depth: i + 1,
                    limit: opts.node_limit,
                    feasible_depth: i,
                });
            }
            lattice.levels.push(next);
        }
        Ok(lattice)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn is_merged(&self) -> bool {
        self.merged
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn level(&self, i: usize) -> &GameLevel {
        &self.levels[i]
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(|l| l.arrivals.len() + l.posts.len()).sum()
    }

    /// Weight of each Brownian branch.
    pub fn branch_prob(&self) -> f64 {
        1.0 / (1usize << self.dim) as f64
    }

    /// Arrival node at level `i` for the given path and remaining budget.
    pub fn find_arrival(&self, i: usize, path: &CadlagPath, budget: usize) -> Option<usize> {
        self.levels.get(i)?.index.get(&node_key(self.merged, path, budget)).copied()
    }
}

/// Backward values on the game lattice.
#[derive(Debug, Clone)]
pub struct ValueField {
    lattice: GameLattice,
    /// `R` per level and arrival node.
    values: Vec<Vec<f64>>,
    /// Best intervention value `min_b (cost_b + C(post_b))` per arrival node
    /// (`+inf` on the last level).
    intervene: Vec<Vec<f64>>,
    /// Index into `options` of the minimizing batch per arrival node.
    best: Vec<Vec<usize>>,
    /// Continuation `C` per level and post-batch node.
    continuation: Vec<Vec<f64>>,
}

/// Continuation values `f dt + sum_w p_w V(child_w)` of one level's
/// post-batch nodes given arrival values at the next level.
pub(crate) fn continuation_values(level: &GameLevel, next_values: &[f64], prob: f64) -> Vec<f64> {
    level
        .posts
        .par_iter()
        .map(|p| p.running + p.children.iter().map(|&c| prob * next_values[c]).sum::<f64>())
        .collect()
}

/// Run the recursion `R_T = Psi`, `R_i = Psi v min_b {cost_b + C(post_b)}`.
pub fn dpp_backward(spec: &ProblemSpec, grid: &GameGrid, budget: usize, opts: &GameOptions) -> Result<ValueField> {
    let lattice = GameLattice::build(spec, grid, budget, opts)?;
    Ok(ValueField::solve(lattice))
}

impl ValueField {
    pub fn solve(lattice: GameLattice) -> Self {
        let steps = lattice.steps;
        let prob = lattice.branch_prob();
        let mut values = vec![Vec::new(); steps + 1];
        let mut intervene = vec![Vec::new(); steps + 1];
        let mut best = vec![Vec::new(); steps + 1];
        let mut continuation = vec![Vec::new(); steps + 1];
        let last = &lattice.levels[steps];
        values[steps] = last.arrivals.iter().map(|a| a.barrier).collect();
        intervene[steps] = vec![f64::INFINITY; last.arrivals.len()];
        best[steps] = vec![0; last.arrivals.len()];
        for i in (0..steps).rev() {
            let level = &lattice.levels[i];
            let cont = continuation_values(level, &values[i + 1], prob);
            let solved: Vec<(f64, f64, usize)> = level
                .arrivals
                .par_iter()
                .map(|a| {
                    let (mut arg, mut m) = (0usize, f64::INFINITY);
                    for (o, opt) in a.options.iter().enumerate() {
                        let v = opt.cost + cont[opt.post];
                        if v < m {
                            m = v;
                            arg = o;
                        }
                    }
                    (a.barrier.max(m), m, arg)
                })
                .collect();
            values[i] = solved.iter().map(|s| s.0).collect();
            intervene[i] = solved.iter().map(|s| s.1).collect();
            best[i] = solved.iter().map(|s| s.2).collect();
            continuation[i] = cont;
        }
        Self { lattice, values, intervene, best, continuation }
    }

    pub fn lattice(&self) -> &GameLattice {
        &self.lattice
    }

    /// `R_0` at the root.
    pub fn root_value(&self) -> f64 {
        self.values[0][0]
    }

    pub fn value(&self, i: usize, arrival: usize) -> f64 {
        self.values[i][arrival]
    }

    pub fn values(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn intervention_value(&self, i: usize, arrival: usize) -> f64 {
        self.intervene[i][arrival]
    }

    pub fn continuation(&self, i: usize, post: usize) -> f64 {
        self.continuation[i][post]
    }

    /// Minimizing batch at an arrival node (ties go to the empty batch, then
    /// to the shortlex-smallest batch).
    pub fn best_option(&self, i: usize, arrival: usize) -> Option<&BatchOption> {
        self.lattice.levels[i].arrivals[arrival].options.get(self.best[i][arrival])
    }

    /// Whether the stopper stops at this arrival node: `R = Psi`.
    pub fn stops(&self, i: usize, arrival: usize) -> bool {
        self.values[i][arrival] == self.lattice.levels[i].arrivals[arrival].barrier
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::grid::MarkPartition;
    use crate::model::MarkSpace;

    #[test]
    fn shortlex_batches() {
        let b = batches(&[0, 1], 2);
        assert_eq!(
            b,
            vec![vec![], vec![0], vec![1], vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]
        );
        assert_eq!(batches(&[], 3), vec![Vec::<usize>::new()]);
    }

    fn one_step(markov: bool) -> ProblemSpec {
        ProblemSpec::new(1.0, vec![0.0])
            .unwrap()
            .with_markov_barrier(|_, x| x[0])
            .with_markov_jump(|_, _, _| vec![-1.0])
            .with_markov_intervention_cost(|_, _, _| 0.1)
            .with_marks(MarkSpace::scalar(&[0.0], &[1.0]).unwrap())
            .with_markov(markov)
    }

    #[test]
    fn one_step_game_stops_immediately() {
        for markov in [false, true] {
            let grid = GameGrid::new(1.0, 1.0, MarkPartition::identity(1)).unwrap();
            let field = dpp_backward(&one_step(markov), &grid, 1, &GameOptions::default()).unwrap();
            assert_eq!(field.root_value(), 0.0);
            assert!(field.stops(0, 0));
            assert!((field.intervention_value(0, 0) - (-0.9)).abs() < 1e-15);
        }
    }

    #[test]
    fn capacity_is_reported() {
        let spec = one_step(false);
        let grid = GameGrid::from_iota(1.0, 4, MarkPartition::identity(1)).unwrap();
        let opts = GameOptions { max_batch: None, node_limit: 500 };
        match dpp_backward(&spec, &grid, 3, &opts) {
            Err(Error::Capacity { feasible_depth, .. }) => assert!(feasible_depth < 16),
            other => panic!("expected capacity error, got {:?}", other.map(|f| f.root_value())),
        }
    }
}
