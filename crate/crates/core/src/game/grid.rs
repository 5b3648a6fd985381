//! Time and mark discretization of the game.

use crate::error::{Error, Result};
use crate::model::{ImpulseControl, Intervention, MarkSpace};
use crate::model::path::norm;

#[derive(Debug, Clone, PartialEq)]
pub struct MarkCell {
    pub members: Vec<usize>,
    pub representative: usize,
}

/// Partition of the mark indices into cells, each with a representative.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkPartition {
    cells: Vec<MarkCell>,
}

impl MarkPartition {
    /// Every mark in its own cell.
    pub fn identity(marks: usize) -> Self {
        Self {
            cells: (0..marks)
                .map(|m| MarkCell { members: vec![m], representative: m })
                .collect(),
        }
    }

    pub fn explicit(cells: Vec<MarkCell>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for c in &cells {
            if !c.members.contains(&c.representative) {
                return Err(Error::Spec(format!(
                    "representative {} is not a member of its cell",
                    c.representative
                )));
            }
            for &m in &c.members {
                if !seen.insert(m) {
                    return Err(Error::Spec(format!("mark {m} appears in two cells")));
                }
            }
        }
        Ok(Self { cells })
    }

    /// Greedy grouping: a mark joins the first cell whose representative is
    /// within `diameter / 2`, otherwise it opens a new cell.
    pub fn by_diameter(marks: &MarkSpace, diameter: f64) -> Self {
        let mut cells: Vec<MarkCell> = Vec::new();
        for m in 0..marks.len() {
            let p = marks.point(m);
            let close = cells.iter_mut().find(|c| {
                let q = marks.point(c.representative);
                norm(&p.iter().zip(q).map(|(a, b)| a - b).collect::<Vec<_>>()) <= diameter / 2.0
            });
            match close {
                Some(c) => c.members.push(m),
                None => cells.push(MarkCell { members: vec![m], representative: m }),
            }
        }
        Self { cells }
    }

    pub fn cells(&self) -> &[MarkCell] {
        &self.cells
    }

    pub fn cell_of(&self, mark: usize) -> Result<usize> {
        self.cells
            .iter()
            .position(|c| c.members.contains(&mark))
            .ok_or(Error::Partition(mark))
    }

    pub fn representative(&self, mark: usize) -> Result<usize> {
        Ok(self.cells[self.cell_of(mark)?].representative)
    }

    /// Representative marks in cell order.
    pub fn representatives(&self) -> Vec<usize> {
        self.cells.iter().map(|c| c.representative).collect()
    }
}

/// Dyadic time grid `t_i = i T / 2^iota` with `T / 2^iota <= eps`, plus the
/// discretized mark set.
#[derive(Debug, Clone, PartialEq)]
pub struct GameGrid {
    eps: f64,
    iota: u32,
    horizon: f64,
    partition: MarkPartition,
}

impl GameGrid {
    /// Smallest `iota` with `T / 2^iota <= eps`.
    pub fn new(horizon: f64, eps: f64, partition: MarkPartition) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Spec(format!("grid parameter {eps} must be positive")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Spec(format!("horizon {horizon} must be positive")));
        }
        let mut iota = 0u32;
        while horizon / 2f64.powi(iota as i32) > eps {
            iota += 1;
            if iota > 30 {
                return Err(Error::Spec(format!("grid parameter {eps} is too fine")));
            }
        }
        Ok(Self { eps, iota, horizon, partition })
    }

    pub fn from_iota(horizon: f64, iota: u32, partition: MarkPartition) -> Result<Self> {
        Self::new(horizon, horizon / 2f64.powi(iota as i32), partition)
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn iota(&self) -> u32 {
        self.iota
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        1usize << self.iota
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps() as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|i| self.time(i)).collect()
    }

    pub fn partition(&self) -> &MarkPartition {
        &self.partition
    }

    pub fn marks(&self) -> Vec<usize> {
        self.partition.representatives()
    }

    /// Index of the smallest grid time at or after `t`.
    pub fn ceil_index(&self, t: f64) -> usize {
        let x = t / self.dt();
        let r = x.round();
        let i = if (x - r).abs() <= 1e-9 { r } else { x.ceil() };
        (i.max(0.0) as usize).min(self.steps())
    }
}

/// Move every intervention to the next grid time and to the representative
/// of its mark cell.
pub fn discretize_control(u: &ImpulseControl, grid: &GameGrid) -> Result<ImpulseControl> {
    let out = u
        .interventions()
        .iter()
        .map(|iv| {
            Ok(Intervention {
                time: grid.time(grid.ceil_index(iv.time)),
                mark: grid.partition().representative(iv.mark)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ImpulseControl::new(out)
}
