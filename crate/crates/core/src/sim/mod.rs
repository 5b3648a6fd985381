//! Forward simulation: random measures, the Euler scheme with jumps and
//! impulses, scenario lattices and pathwise diagnostics.

pub mod diagnostics;
pub mod lattice;
pub mod noise;
pub mod sde;

pub use diagnostics::{estimate_flow_modulus, moment_diagnostic, FlowModulusRow, MomentEstimate};
pub use lattice::{LatticeNode, ScenarioLattice};
pub use noise::{sample_measure, simulate_measure, DriverNoise, IncrementKind};
pub use sde::simulate_sde;

use crate::error::{Error, Result};

/// Number of steps of size `dt` in `[0, horizon]`; `dt` must divide the
/// horizon up to rounding.
pub fn grid_steps(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Grid { dt, horizon });
    }
    let steps = (horizon / dt).round();
    if steps < 1.0 || (steps * dt - horizon).abs() > 1e-9 * horizon {
        return Err(Error::Grid { dt, horizon });
    }
    Ok(steps as usize)
}
