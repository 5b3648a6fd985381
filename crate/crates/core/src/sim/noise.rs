//! Driving noise: Brownian increments on the time grid plus a Poisson
//! random measure.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{Atom, MarkedPointMeasure};
use crate::rng::path_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IncrementKind {
    /// `N(0, dt)` per component.
    Gaussian,
    /// `+-sqrt(dt)` with probability one half per component, matching the
    /// binary lattice.
    Rademacher,
}

/// Brownian increments per grid step and the atoms of the random measure.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverNoise {
    dim: usize,
    dt: f64,
    increments: Vec<f64>,
    atoms: MarkedPointMeasure,
}

impl DriverNoise {
    /// `increments` holds `steps * dim` values, step-major.
    pub fn new(dim: usize, dt: f64, increments: Vec<f64>, atoms: MarkedPointMeasure) -> Result<Self> {
        if dim == 0 || increments.len() % dim != 0 {
            return Err(Error::Dimension { expected: dim, got: increments.len() });
        }
        if !(dt > 0.0) {
            return Err(Error::Range(format!("time step {dt} must be positive")));
        }
        Ok(Self { dim, dt, increments, atoms })
    }

    /// No Brownian motion and no atoms.
    pub fn quiet(dim: usize, dt: f64, steps: usize) -> Self {
        Self {
            dim,
            dt,
            increments: vec![0.0; steps * dim],
            atoms: MarkedPointMeasure::empty(),
        }
    }

    /// Draw increments of the given kind and atoms of a Poisson measure with
    /// intensity `weights` on `[0, dt * steps]`.
    pub fn sample<R: Rng>(
        dim: usize,
        dt: f64,
        steps: usize,
        kind: IncrementKind,
        weights: &[f64],
        rng: &mut R,
    ) -> Result<Self> {
        let sd = dt.sqrt();
        let increments = (0..steps * dim)
            .map(|_| match kind {
                IncrementKind::Gaussian => sd * rng.sample::<f64, _>(StandardNormal),
                IncrementKind::Rademacher => {
                    if rng.random::<bool>() {
                        sd
                    } else {
                        -sd
                    }
                }
            })
            .collect();
        let atoms = sample_measure(weights, dt * steps as f64, rng)?;
        Self::new(dim, dt, increments, atoms)
    }

    pub fn with_atoms(mut self, atoms: MarkedPointMeasure) -> Self {
        self.atoms = atoms;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.increments.len() / self.dim
    }

    pub fn increment(&self, step: usize) -> &[f64] {
        &self.increments[step * self.dim..(step + 1) * self.dim]
    }

    pub fn atoms(&self) -> &MarkedPointMeasure {
        &self.atoms
    }
}

/// Poisson random measure on `[0, horizon]` with mark intensities `weights`:
/// `Poisson(lambda(U) * horizon)` atoms at uniform times, marks drawn
/// proportionally to the weights.
pub fn sample_measure<R: Rng>(weights: &[f64], horizon: f64, rng: &mut R) -> Result<MarkedPointMeasure> {
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::Spec(format!("mark weight {w} is negative")));
    }
    let total: f64 = weights.iter().sum();
    if total == 0.0 || horizon <= 0.0 {
        return Ok(MarkedPointMeasure::empty());
    }
    let count = Poisson::new(total * horizon)
        .map_err(|e| Error::Spec(e.to_string()))?
        .sample(rng) as usize;
    let marks = WeightedIndex::new(weights).map_err(|e| Error::Spec(e.to_string()))?;
    let mut atoms: Vec<Atom> = (0..count)
        .map(|_| Atom {
            time: rng.random::<f64>() * horizon,
            mark: marks.sample(rng),
        })
        .collect();
    atoms.sort_by(|a, b| a.time.total_cmp(&b.time));
    atoms.dedup_by(|a, b| a.time == b.time);
    MarkedPointMeasure::new(atoms)
}

/// [`sample_measure`] on the stream selected by `seed`.
pub fn simulate_measure(weights: &[f64], horizon: f64, seed: u64) -> Result<MarkedPointMeasure> {
    sample_measure(weights, horizon, &mut path_rng(seed, 0))
}
