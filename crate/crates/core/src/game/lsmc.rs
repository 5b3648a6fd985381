//! Regression backend for the game on Markov problems.
//!
//! One bundle of uncontrolled Euler paths supplies the sample states. For
//! each grid step `i` and remaining budget `r` the conditional expectation
//! `E[R_{i+1}(X_{i+1}, r) | X_i = y]` is fitted by least squares on a
//! polynomial basis of `y`, so it can be read at post-intervention states
//! off the sample cloud. Starting states are spread around `x0` for the same
//! reason.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{CadlagPath, ProblemSpec};
use crate::regression::{Fit, PolyBasis, Regressor};
use crate::rng::{derive_seed, path_rng};
use crate::sim::sde::euler_increment;
use crate::stats::mean_and_stderr;

use super::dpp::{apply_batch, batches};
use super::grid::GameGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsmcOptions {
    pub paths: usize,
    pub degree: u32,
    pub seed: u64,
    /// Half-width of the box of starting states around `x0`; `None` picks
    /// three standard deviations of the diffusion over the horizon plus the
    /// largest total impulse the budget allows.
    pub spread: Option<f64>,
    /// Paths used to evaluate controller policies for the upper value.
    pub eval_paths: usize,
    /// Stop when `Psi >= min_b (...) - tolerance`.
    pub tolerance: f64,
    pub max_batch: Option<usize>,
}

impl Default for LsmcOptions {
    fn default() -> Self {
        Self {
            paths: 10_000,
            degree: 3,
            seed: 0,
            spread: None,
            eval_paths: 10_000,
            tolerance: 1e-9,
            max_batch: None,
        }
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Controller policies searched for the upper value.
#[derive(Debug, Clone, PartialEq)]
pub enum ControllerPolicy {
    Never,
    /// The minimizing batch of the fitted recursion.
    Greedy,
    /// One impulse with `mark` whenever `Psi(t, x) >= level`.
    Threshold { mark: usize, level: f64 },
}

pub struct LsmcGame {
    spec: ProblemSpec,
    steps: usize,
    dt: f64,
    budget: usize,
    batches: Vec<Vec<usize>>,
    /// `fits[i][r]`: regression of `R_{i+1}(., r)` on the state at step `i`.
    fits: Vec<Vec<Fit>>,
    tolerance: f64,
    barrier_levels: Vec<f64>,
}

fn point(t: f64, x: &[f64]) -> CadlagPath {
    CadlagPath::new(t, x)
}

/// Decision at one state: the value, the best intervention value and the
/// minimizing batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LsmcDecision {
    pub value: f64,
    pub barrier: f64,
    pub intervene: f64,
    pub batch: Vec<usize>,
}

impl LsmcGame {
    pub fn solve(spec: &ProblemSpec, grid: &GameGrid, budget: usize, opts: &LsmcOptions) -> Result<Self> {
        if !spec.is_markov() {
            return Err(Error::Precondition("regression backend needs a Markov problem".into()));
        }
        if opts.paths < 2 {
            return Err(Error::Precondition("regression backend needs at least two paths".into()));
        }
        let dim = spec.dim();
        let steps = grid.steps();
        let dt = grid.dt();
        let max_batch = opts.max_batch.unwrap_or(budget).min(budget);
        let marks = grid.marks();
        let all_batches = batches(&marks, max_batch);

        let spread = match opts.spread {
            Some(s) => s,
            None => {
                let root = point(0.0, spec.x0());
                let sigma = spec.vol(0.0, &root).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let kick = marks
                    .iter()
                    .map(|&m| crate::model::path::norm(&spec.jump(0.0, &root, m)))
                    .fold(0.0, f64::max);
                3.0 * sigma * spec.horizon().sqrt() + kick * budget as f64
            }
        };

        let seed = derive_seed(opts.seed, "game-lsmc");
        let bundle: Vec<Vec<Vec<f64>>> = (0..opts.paths as u64)
            .into_par_iter()
            .map(|p| {
                let mut rng = path_rng(seed, p);
                let mut x: Vec<f64> = spec
                    .x0()
                    .iter()
                    .map(|v| v + spread * (2.0 * rng.random::<f64>() - 1.0))
                    .collect();
                let mut states = Vec::with_capacity(steps + 1);
                states.push(x.clone());
                for i in 0..steps {
                    let dw: Vec<f64> = (0..dim).map(|_| dt.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect();
                    let inc = euler_increment(spec, i as f64 * dt, &point(i as f64 * dt, &x), dt, &dw);
                    for (a, b) in x.iter_mut().zip(&inc) {
                        *a += b;
                    }
                    states.push(x.clone());
                }
                states
            })
            .collect();

        let mid = steps / 2;
        let mut levels: Vec<f64> = bundle.iter().map(|s| spec.barrier(mid as f64 * dt, &point(mid as f64 * dt, &s[mid]))).collect();
        levels.sort_by(f64::total_cmp);
        let barrier_levels = [0.25, 0.5, 0.75]
            .iter()
            .map(|q| levels[((levels.len() - 1) as f64 * q) as usize])
            .collect();

        let mut game = Self {
            spec: spec.clone(),
            steps,
            dt,
            budget,
            batches: all_batches,
            fits: vec![Vec::new(); steps],
            tolerance: opts.tolerance,
            barrier_levels,
        };
        let basis = PolyBasis::new(dim, opts.degree);
        for i in (0..steps).rev() {
            let at_i: Vec<Vec<f64>> = bundle.iter().map(|s| s[i].clone()).collect();
            let regressor = Regressor::new(basis.clone(), &at_i)?;
            let mut fits = Vec::with_capacity(budget + 1);
            for r in 0..=budget {
                let targets: Vec<f64> = bundle
                    .par_iter()
                    .map(|s| game.decide(i + 1, &s[i + 1], r).map(|d| d.value))
                    .collect::<Result<_>>()?;
                fits.push(regressor.fit(&targets)?);
            }
            game.fits[i] = fits;
        }
        Ok(game)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    /// `f(t_i, y) dt + E[R_{i+1}(X_{i+1}, r) | X_i = y]`.
    pub fn continuation(&self, i: usize, r: usize, y: &[f64]) -> f64 {
        let t = i as f64 * self.dt;
        self.spec.running_cost(t, &point(t, y)) * self.dt + self.fits[i][r].predict(y)
    }

    pub fn decide(&self, i: usize, x: &[f64], r: usize) -> Result<LsmcDecision> {
        let t = i as f64 * self.dt;
        let here = point(t, x);
        let barrier = self.spec.barrier(t, &here);
        if i >= self.steps {
            return Ok(LsmcDecision { value: barrier, barrier, intervene: f64::INFINITY, batch: Vec::new() });
        }
        let mut best = (f64::INFINITY, Vec::new());
        for b in self.batches.iter().filter(|b| b.len() <= r) {
            let (post, cost) = apply_batch(&self.spec, t, &here, b)?;
            let v = cost + self.continuation(i, r - b.len(), post.current());
            if v < best.0 {
                best = (v, b.clone());
            }
        }
        Ok(LsmcDecision { value: barrier.max(best.0), barrier, intervene: best.0, batch: best.1 })
    }

    pub fn lower_value(&self) -> Result<f64> {
        Ok(self.decide(0, self.spec.x0(), self.budget)?.value)
    }

    pub fn stops(&self, i: usize, x: &[f64], r: usize) -> Result<bool> {
        if i >= self.steps {
            return Ok(true);
        }
        let d = self.decide(i, x, r)?;
        Ok(d.barrier >= d.intervene - self.tolerance)
    }

    /// Candidate controller policies: never intervene, the fitted greedy
    /// batch, and single-impulse thresholds on the barrier.
    pub fn policy_class(&self) -> Vec<ControllerPolicy> {
        let mut out = vec![ControllerPolicy::Never, ControllerPolicy::Greedy];
        let mut marks: Vec<usize> = self.batches.iter().filter(|b| b.len() == 1).map(|b| b[0]).collect();
        marks.dedup();
        for &mark in &marks {
            for &level in &self.barrier_levels {
                out.push(ControllerPolicy::Threshold { mark, level });
            }
        }
        out
    }

    /// Payoff of the fitted stopping rule against `policy` on fresh paths.
    pub fn evaluate_policy(&self, policy: &ControllerPolicy, paths: usize, seed: u64) -> Result<Estimate> {
        let seed = derive_seed(seed, "game-upper");
        let dim = self.spec.dim();
        let payoffs = (0..paths as u64)
            .into_par_iter()
            .map(|p| {
                let mut rng = path_rng(seed, p);
                let mut x = self.spec.x0().to_vec();
                let mut r = self.budget;
                let mut payoff = 0.0;
                for i in 0..=self.steps {
                    let t = i as f64 * self.dt;
                    if self.stops(i, &x, r)? {
                        payoff += self.spec.barrier(t, &point(t, &x));
                        break;
                    }
                    let batch = match policy {
                        ControllerPolicy::Never => Vec::new(),
                        ControllerPolicy::Greedy => self.decide(i, &x, r)?.batch,
                        ControllerPolicy::Threshold { mark, level } => {
                            if r > 0 && self.spec.barrier(t, &point(t, &x)) >= *level {
                                vec![*mark]
                            } else {
                                Vec::new()
                            }
                        }
                    };
                    let (post, cost) = apply_batch(&self.spec, t, &point(t, &x), &batch)?;
                    r -= batch.len();
                    payoff += cost + self.spec.running_cost(t, &post) * self.dt;
                    let dw: Vec<f64> = (0..dim).map(|_| self.dt.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect();
                    let inc = euler_increment(&self.spec, t, &post, self.dt, &dw);
                    x = post.current().iter().zip(&inc).map(|(a, b)| a + b).collect();
                }
                Ok(payoff)
            })
            .collect::<Result<Vec<f64>>>()?;
        let (value, std_error) = mean_and_stderr(&payoffs);
        Ok(Estimate { value, std_error })
    }

    /// Smallest policy payoff over [`Self::policy_class`].
    pub fn upper_value(&self, paths: usize, seed: u64) -> Result<(Estimate, ControllerPolicy)> {
        let mut best: Option<(Estimate, ControllerPolicy)> = None;
        for policy in self.policy_class() {
            let e = self.evaluate_policy(&policy, paths, seed)?;
            if best.as_ref().is_none_or(|b| e.value < b.0.value) {
                best = Some((e, policy));
            }
        }
        Ok(best.expect("policy class is never empty"))
    }
}
