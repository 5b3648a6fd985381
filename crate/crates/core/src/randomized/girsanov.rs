//! Doléans-Dade weights for a change of the point measure's intensity from
//! `lambda` to `nu * lambda`:
//!
//! `kappa_T = exp(int_0^T sum_e (1 - nu_s(e)) lambda(e) ds) * prod_j nu_{sigma_j}(zeta_j)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::MarkedPointMeasure;
use crate::rng::{derive_seed, path_rng};
use crate::sim::noise::sample_measure;
use crate::stats::mean_and_stderr;

use super::density::PathDensity;

fn checked(v: f64) -> Result<f64> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::Spec(format!("density value {v} is negative or not finite")));
    }
    Ok(v)
}

/// `kappa_T` for one realization of the measure. The density is read at the
/// left end of each piece between grid points (spacing `dt`) and atoms and
/// held constant on it; it sees the number of atoms strictly before the time
/// it is evaluated at, and at an atom the atoms before that one.
pub fn girsanov_weight(
    density: &PathDensity,
    measure: &MarkedPointMeasure,
    intensities: &[f64],
    horizon: f64,
    dt: f64,
) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::Range(format!("step {dt} must be positive")));
    }
    let atoms = measure.atoms();
    for a in atoms {
        if !(0.0..=horizon).contains(&a.time) {
            return Err(Error::Range(format!("atom at {} outside [0, {horizon}]", a.time)));
        }
        if a.mark >= intensities.len() {
            return Err(Error::Dimension { expected: intensities.len(), got: a.mark + 1 });
        }
    }
    let mut log_weight = 0.0;
    let mut zero = false;
    for (j, a) in atoms.iter().enumerate() {
        let v = checked(density.value(a.time, j, a.mark))?;
        if v == 0.0 {
            zero = true;
        } else {
            log_weight += v.ln();
        }
    }

    let mut breaks: Vec<f64> = atoms.iter().map(|a| a.time).collect();
    let steps = (horizon / dt).ceil() as usize;
    breaks.extend((0..=steps).map(|i| (i as f64 * dt).min(horizon)));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut seen = 0usize;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        while seen < atoms.len() && atoms[seen].time <= a {
            seen += 1;
        }
        for (e, lambda) in intensities.iter().enumerate() {
            let v = checked(density.value(a, seen, e))?;
            log_weight += (1.0 - v) * lambda * (b - a);
        }
    }
    if zero {
        return Ok(0.0);
    }
    Ok(log_weight.exp())
}

/// Weights of `samples` measures drawn under the base intensities, one
/// stream per sample.
pub fn sample_weights(
    density: &PathDensity,
    intensities: &[f64],
    horizon: f64,
    dt: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let seed = derive_seed(seed, "girsanov");
    (0..samples)
        .into_par_iter()
        .map(|k| {
            let mu = sample_measure(intensities, horizon, &mut path_rng(seed, k as u64))?;
            girsanov_weight(density, &mu, intensities, horizon, dt)
        })
        .collect()
}

/// Sample mean of the weights and its standard error.
pub fn mean_weight(
    density: &PathDensity,
    intensities: &[f64],
    horizon: f64,
    dt: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let w = sample_weights(density, intensities, horizon, dt, samples, seed)?;
    Ok(mean_and_stderr(&w))
}
