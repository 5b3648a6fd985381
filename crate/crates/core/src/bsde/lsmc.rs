//! Regression backend for the penalized equation on Markov problems.
//!
//! Paths carry at most one random jump per step, drawn at the left grid
//! point with probability `lambda(e) dt` per mark, followed by a Gaussian
//! Euler step. The branch means of the tree solver become regressions on
//! the pre-jump state: `Y_{i+1} 1[no jump] / (1 - p)`, `Y_{i+1} 1[jump e] /
//! p_e` and `Y_{i+1} dW / dt`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{CadlagPath, JumpKind};
use crate::regression::{PolyBasis, Regressor};
use crate::rng::{derive_seed, path_rng};
use crate::sim::sde::euler_increment;
use crate::stats::mean_and_stderr;

use super::spec::BsdeSpec;
use super::tree::{no_jump, node_parts, penalized_min};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsdeLsmcOptions {
    pub paths: usize,
    pub steps: usize,
    pub degree: u32,
    pub seed: u64,
}

impl Default for BsdeLsmcOptions {
    fn default() -> Self {
        Self { paths: 10_000, steps: 4, degree: 3, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsmcSolution {
    pub value: f64,
    /// Standard error of the sample mean of `Y_1`, the dominant noise in
    /// the root value.
    pub std_error: f64,
    pub k_plus_total: f64,
    pub k_minus_total: f64,
    pub max_violation: f64,
    /// Regression value `Y_i` per step and path.
    pub y: Vec<Vec<f64>>,
}

struct SamplePath {
    /// Pre-jump states at `t_0..=t_N`.
    states: Vec<Vec<f64>>,
    /// Mark fired at `t_i`, if any.
    jumps: Vec<Option<usize>>,
    increments: Vec<Vec<f64>>,
}

fn simulate(spec: &BsdeSpec, steps: usize, dt: f64, probs: &[f64], seed: u64, index: u64) -> Result<SamplePath> {
    let forward = spec.forward();
    let dim = forward.dim();
    let mut rng = path_rng(seed, index);
    let mut x = forward.x0().to_vec();
    let mut states = vec![x.clone()];
    let mut jumps = Vec::with_capacity(steps);
    let mut increments = Vec::with_capacity(steps);
    for i in 0..steps {
        let t = i as f64 * dt;
        let mut path = CadlagPath::new(t, &x);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut fired = None;
        for (e, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                fired = Some(e);
                break;
            }
        }
        if let Some(e) = fired {
            let delta = forward.jump(t, &path, e);
            path.apply_jump(t, &delta, JumpKind::Random { mark: e })?;
        }
        let dw: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal) * dt.sqrt()).collect();
        let inc = euler_increment(forward, t, &path, dt, &dw);
        x = path.current().iter().zip(&inc).map(|(a, b)| a + b).collect();
        states.push(x.clone());
        jumps.push(fired);
        increments.push(dw);
    }
    Ok(SamplePath { states, jumps, increments })
}

/// Penalized solve at level `n` by least-squares Monte Carlo.
pub fn solve_penalized_lsmc(spec: &BsdeSpec, n: f64, opts: &BsdeLsmcOptions) -> Result<LsmcSolution> {
    let forward = spec.forward();
    if !forward.is_markov() {
        return Err(Error::Precondition("regression backend needs a Markov problem".into()));
    }
    if !(n >= 0.0) || !n.is_finite() {
        return Err(Error::Precondition(format!("penalty level {n} must be finite and non-negative")));
    }
    if opts.paths < 2 || opts.steps == 0 {
        return Err(Error::Precondition("regression backend needs two paths and one step".into()));
    }
    let steps = opts.steps;
    let dt = forward.horizon() / steps as f64;
    let marks = forward.marks().len();
    let probs: Vec<f64> = (0..marks).map(|e| forward.marks().weight(e) * dt).collect();
    let q = no_jump(&probs);
    if q <= 0.0 {
        return Err(Error::Precondition("jump probability per step must stay below one".into()));
    }
    let seed = derive_seed(opts.seed, "bsde-lsmc");
    let samples: Vec<SamplePath> = (0..opts.paths)
        .into_par_iter()
        .map(|k| simulate(spec, steps, dt, &probs, seed, k as u64))
        .collect::<Result<_>>()?;

    let horizon = forward.horizon();
    let mut y: Vec<Vec<f64>> = vec![Vec::new(); steps + 1];
    y[steps] = samples
        .iter()
        .map(|s| spec.check_terminal(&CadlagPath::new(horizon, &s.states[steps])))
        .collect::<Result<_>>()?;
    let mut k_plus = vec![0.0; opts.paths];
    let mut k_minus = vec![0.0; opts.paths];
    let mut violation = 0.0f64;
    let dim = forward.dim();
    for i in (0..steps).rev() {
        let t = i as f64 * dt;
        let next = &y[i + 1];
        // Targets: no-jump mean, one per mark, then Z components.
        let mut targets = vec![vec![0.0; opts.paths]; 1 + marks + dim];
        for (k, s) in samples.iter().enumerate() {
            match s.jumps[i] {
                None => targets[0][k] = next[k] / q,
                Some(e) => targets[1 + e][k] = next[k] / probs[e],
            }
            for c in 0..dim {
                targets[1 + marks + c][k] = next[k] * s.increments[i][c] / dt;
            }
        }
        let predictors: Vec<Box<dyn Fn(&[f64]) -> f64 + Sync>> = if i == 0 {
            targets
                .iter()
                .map(|col| {
                    let m = mean_and_stderr(col).0;
                    Box::new(move |_: &[f64]| m) as Box<dyn Fn(&[f64]) -> f64 + Sync>
                })
                .collect()
        } else {
            let points: Vec<Vec<f64>> = samples.iter().map(|s| s.states[i].clone()).collect();
            let reg = Regressor::new(PolyBasis::new(dim, opts.degree), &points)?;
            targets
                .iter()
                .map(|col| {
                    let fit = reg.fit(col)?;
                    Ok(Box::new(move |x: &[f64]| fit.predict(x)) as Box<dyn Fn(&[f64]) -> f64 + Sync>)
                })
                .collect::<Result<_>>()?
        };
        let out: Vec<(f64, f64, f64, f64)> = samples
            .par_iter()
            .map(|s| {
                let x = &s.states[i];
                let path = CadlagPath::new(t, x);
                let jumped = (0..marks)
                    .map(|e| {
                        let mut p = path.clone();
                        p.apply_jump(t, &forward.jump(t, &path, e), JumpKind::Random { mark: e })?;
                        Ok(p)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let means: Vec<f64> = (0..=marks).map(|j| predictors[j](x)).collect();
                let z: Vec<f64> = (0..dim).map(|c| predictors[1 + marks + c](x)).collect();
                let mean = q * means[0] + probs.iter().zip(&means[1..]).map(|(p, m)| p * m).sum::<f64>();
                let parts = node_parts(spec, t, dt, &path, &jumped, &means, z, mean);
                let (h, _) = penalized_min(&probs, &parts, n);
                let barrier = spec.barrier(t, &path);
                Ok((barrier.max(h), h, barrier, parts.a0 - h))
            })
            .collect::<Result<_>>()?;
        for (k, &(yi, h, s, dkm)) in out.iter().enumerate() {
            k_plus[k] += yi - h;
            k_minus[k] += dkm;
            violation = violation.max(s - yi).max(((yi - h) * (yi - s)).abs());
        }
        y[i] = out.iter().map(|o| o.0).collect();
        let bound = spec.divergence_bound();
        if let Some(&value) = y[i].iter().find(|v| !(v.abs() <= bound)) {
            return Err(Error::Divergence { step: i, value, bound });
        }
    }
    let std_error = mean_and_stderr(&y[1.min(steps)]).1;
    Ok(LsmcSolution {
        value: y[0][0],
        std_error,
        k_plus_total: mean_and_stderr(&k_plus).0,
        k_minus_total: mean_and_stderr(&k_minus).0,
        max_violation: violation,
        y,
    })
}
