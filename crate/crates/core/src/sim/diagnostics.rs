//! Monte Carlo checks on the forward dynamics: continuity of the controlled
//! flow in the control and moments of the running maximum.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{path_distance, ImpulseControl, Intervention, ProblemSpec};
use crate::rng::{derive_seed, path_rng};
use crate::stats::mean_and_stderr;

use super::noise::{DriverNoise, IncrementKind};
use super::{grid_steps, simulate_sde};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowModulusRow {
    pub eps: f64,
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Delay every intervention of `u` by `eps`, capped at the horizon.
pub fn delayed(u: &ImpulseControl, eps: f64, horizon: f64) -> ImpulseControl {
    ImpulseControl::new(
        u.interventions()
            .iter()
            .map(|i| Intervention { time: (i.time + eps).min(horizon), mark: i.mark })
            .collect(),
    )
    .expect("delaying preserves order")
}

fn noise_for(spec: &ProblemSpec, dt: f64, kind: IncrementKind, seed: u64, index: u64) -> Result<DriverNoise> {
    let steps = grid_steps(spec.horizon(), dt)?;
    DriverNoise::sample(spec.dim(), dt, steps, kind, spec.marks().weights(), &mut path_rng(seed, index))
}

/// For each `eps`, the mean over `samples` Gaussian noise draws of
/// `d((T, X^u), (T, X^u'))^2` with `u'` the control delayed by `eps`, both
/// paths driven by the same noise from time 0.
pub fn estimate_flow_modulus(
    spec: &ProblemSpec,
    u: &ImpulseControl,
    eps: &[f64],
    samples: usize,
    dt: f64,
    seed: u64,
) -> Result<Vec<FlowModulusRow>> {
    let seed = derive_seed(seed, "flow-modulus");
    let horizon = spec.horizon();
    eps.iter()
        .map(|&e| {
            let shifted = delayed(u, e, horizon);
            let values = (0..samples as u64)
                .into_par_iter()
                .map(|idx| {
                    let noise = noise_for(spec, dt, IncrementKind::Gaussian, seed, idx)?;
                    let a = simulate_sde(spec, u, 0.0, &noise)?;
                    let b = simulate_sde(spec, &shifted, 0.0, &noise)?;
                    Ok(path_distance(horizon, &b, horizon, &a)?.powi(2))
                })
                .collect::<Result<Vec<f64>>>()?;
            let (estimate, std_error) = mean_and_stderr(&values);
            Ok(FlowModulusRow { eps: e, estimate, std_error })
        })
        .collect()
}

/// Estimate `E[ sup_{t <= T} |X^u_t|^p ]` for `p` in {2, 4}, with random
/// jumps active up to `cut`.
pub fn moment_diagnostic(
    spec: &ProblemSpec,
    u: &ImpulseControl,
    p: u32,
    samples: usize,
    dt: f64,
    kind: IncrementKind,
    cut: f64,
    seed: u64,
) -> Result<MomentEstimate> {
    if p != 2 && p != 4 {
        return Err(Error::Precondition(format!("moment order {p} not in {{2, 4}}")));
    }
    let seed = derive_seed(seed, "moments");
    let values = (0..samples as u64)
        .into_par_iter()
        .map(|idx| {
            let noise = noise_for(spec, dt, kind, seed, idx)?;
            let path = simulate_sde(spec, u, cut, &noise)?;
            Ok(path.sup_norm(spec.horizon()).powi(p as i32))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, std_error) = mean_and_stderr(&values);
    Ok(MomentEstimate { mean, std_error })
}
