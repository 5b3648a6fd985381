//! Finite marked point measures `sum_j delta_(sigma_j, zeta_j)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub time: f64,
    pub mark: usize,
}

/// Atoms with strictly increasing times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MarkedPointMeasure {
    atoms: Vec<Atom>,
}

impl MarkedPointMeasure {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.iter().any(|a| !a.time.is_finite()) {
            return Err(Error::Precondition("atom time is not finite".into()));
        }
        if atoms.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(Error::Precondition("atom times must be strictly increasing".into()));
        }
        Ok(Self { atoms })
    }

    pub fn from_pairs(pairs: &[(f64, usize)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(time, mark)| Atom { time, mark }).collect())
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Number of atoms with time in `(s, t]`.
    pub fn count(&self, s: f64, t: f64) -> usize {
        if t <= s {
            return 0;
        }
        self.atoms.partition_point(|a| a.time <= t) - self.atoms.partition_point(|a| a.time <= s)
    }

    /// Atoms with time in `[0, t)`.
    pub fn before(&self, t: f64) -> impl Iterator<Item = &Atom> {
        self.atoms.iter().take_while(move |a| a.time < t)
    }
}
