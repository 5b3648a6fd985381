//! Densities of the point measure's intensity.
//!
//! On the lattice a density is one value per node and mark, read at the
//! node before its jump (so it only depends on information strictly before
//! the jump). For Monte Carlo it is a function of time, the number of atoms
//! seen so far and the mark.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sim::ScenarioLattice;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeDensity {
    /// `values[i][node][mark]`.
    values: Vec<Vec<Vec<f64>>>,
}

impl TreeDensity {
    pub fn from_fn(lattice: &ScenarioLattice, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let values = (0..lattice.steps())
            .map(|i| {
                (0..lattice.level(i).len())
                    .map(|node| (0..lattice.marks()).map(|e| f(i, node, e)).collect())
                    .collect()
            })
            .collect();
        Self { values }
    }

    pub fn constant(lattice: &ScenarioLattice, nu: f64) -> Self {
        Self::from_fn(lattice, |_, _, _| nu)
    }

    pub fn from_values(values: Vec<Vec<Vec<f64>>>) -> Self {
        Self { values }
    }

    pub fn at(&self, i: usize, node: usize) -> &[f64] {
        &self.values[i][node]
    }

    pub fn values(&self) -> &[Vec<Vec<f64>>] {
        &self.values
    }

    /// Check `floor <= nu <= bound` everywhere and that the shape fits the
    /// lattice.
    pub fn check(&self, lattice: &ScenarioLattice, bound: f64, floor: f64) -> Result<()> {
        if self.values.len() != lattice.steps() {
            return Err(Error::Dimension { expected: lattice.steps(), got: self.values.len() });
        }
        for (i, level) in self.values.iter().enumerate() {
            if level.len() != lattice.level(i).len() {
                return Err(Error::Dimension { expected: lattice.level(i).len(), got: level.len() });
            }
            for node in level {
                if node.len() != lattice.marks() {
                    return Err(Error::Dimension { expected: lattice.marks(), got: node.len() });
                }
                for &v in node {
                    if !(v >= 0.0) || !v.is_finite() {
                        return Err(Error::Spec(format!("density value {v} is negative or not finite")));
                    }
                    if v > bound {
                        return Err(Error::Precondition(format!("density value {v} exceeds the bound {bound}")));
                    }
                    if v < floor {
                        return Err(Error::Precondition(format!("density value {v} below the floor {floor}")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().flatten().flatten().copied().fold(0.0, f64::max)
    }
}

type DensityFn = Arc<dyn Fn(f64, usize, usize) -> f64 + Send + Sync>;

/// Density for simulated measures: `nu(t, atoms seen before t, mark)`,
/// constant between atoms within each grid step.
#[derive(Clone)]
pub struct PathDensity {
    f: DensityFn,
}

impl fmt::Debug for PathDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PathDensity").finish_non_exhaustive()
    }
}

impl PathDensity {
    pub fn new(f: impl Fn(f64, usize, usize) -> f64 + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f) }
    }

    pub fn constant(nu: f64) -> Self {
        Self::new(move |_, _, _| nu)
    }

    pub fn value(&self, t: f64, seen: usize, mark: usize) -> f64 {
        (self.f)(t, seen, mark)
    }

    /// Keep the density but cap it at one once `k` atoms have been seen.
    pub fn truncated(&self, k: usize) -> Self {
        let base = self.f.clone();
        Self::new(move |t, seen, e| {
            let v = base(t, seen, e);
            if seen >= k {
                v.min(1.0)
            } else {
                v
            }
        })
    }

    /// Raise the density to at least `floor`.
    pub fn floored(&self, floor: f64) -> Self {
        let base = self.f.clone();
        Self::new(move |t, seen, e| base(t, seen, e).max(floor))
    }
}
