//! Monotone limit of the penalized solutions as the penalty level grows.

use crate::error::{Error, Result};
use crate::sim::lattice::ScenarioLattice;

use super::spec::BsdeSpec;
use super::tree::{solve_penalized, PenalizedSolution};

/// `1, 2, 4, ..., 1024`.
pub const DEFAULT_SCHEDULE: [f64; 11] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0];

/// Tolerance on increases of `Y^n_0` along the schedule before the backend
/// is flagged.
const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LimitRow {
    pub penalty: f64,
    pub value: f64,
    /// Previous value minus this one; zero on the first row.
    pub decrement: f64,
    pub k_minus_total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnellLimit {
    /// `Y^n_0` at the last penalty level.
    pub value: f64,
    pub rows: Vec<LimitRow>,
    /// First level after which the decrement drops below the tolerance.
    pub converged_at: Option<f64>,
    /// `2 Y^{n_max} - Y^{n_max / 2}`; a diagnostic only.
    pub extrapolated: f64,
    /// Some decrement was negative beyond rounding.
    pub inconsistent: bool,
    pub last: PenalizedSolution,
}

pub fn snell_limit(spec: &BsdeSpec, lattice: &ScenarioLattice, schedule: &[f64], tol: f64) -> Result<SnellLimit> {
    if schedule.is_empty() {
        return Err(Error::Precondition("empty penalty schedule".into()));
    }
    if schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("penalty schedule must be increasing".into()));
    }
    let mut rows: Vec<LimitRow> = Vec::with_capacity(schedule.len());
    let mut last = None;
    for &n in schedule {
        let sol = solve_penalized(spec, lattice, n)?;
        let value = sol.root_value();
        let decrement = rows.last().map_or(0.0, |r| r.value - value);
        rows.push(LimitRow { penalty: n, value, decrement, k_minus_total: sol.k_minus_total() });
        last = Some(sol);
    }
    let converged_at = rows.windows(2).find(|w| w[1].decrement.abs() < tol).map(|w| w[0].penalty);
    let inconsistent = rows.iter().any(|r| r.decrement < -MONOTONE_SLACK);
    let value = rows[rows.len() - 1].value;
    let extrapolated = if rows.len() >= 2 { 2.0 * value - rows[rows.len() - 2].value } else { value };
    Ok(SnellLimit {
        value,
        rows,
        converged_at,
        extrapolated,
        inconsistent,
        last: last.expect("schedule is non-empty"),
    })
}
