//! Euler scheme for the path-dependent SDE with random jumps and impulses.

use crate::error::{Error, Result};
use crate::model::{CadlagPath, ImpulseControl, JumpKind, ProblemSpec};

use super::noise::DriverNoise;
use super::grid_steps;

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    kind: JumpKind,
}

/// One Euler step `a(s, X) dt + sigma(s, X) dW` from the current path.
pub(crate) fn euler_increment(spec: &ProblemSpec, s: f64, path: &CadlagPath, dt: f64, dw: &[f64]) -> Vec<f64> {
    let d = spec.dim();
    let a = spec.drift(s, path);
    let sigma = spec.vol(s, path);
    (0..d)
        .map(|r| a[r] * dt + (0..d).map(|c| sigma[r * d + c] * dw[c]).sum::<f64>())
        .collect()
}

fn apply_event(spec: &ProblemSpec, path: &mut CadlagPath, time: f64, kind: JumpKind) -> Result<()> {
    let delta = spec.jump(time, path, kind.mark());
    path.apply_jump(time, &delta, kind)
}

/// Simulate `X` on `[0, T]` driven by `noise`: atoms of the random measure
/// at times up to `cut` move the state by `gamma(s-, X, e)`, and the
/// interventions of `u` (all at or after `cut`) move it by
/// `gamma(eta_j, X, beta_j)`.
///
/// Each impulse reads the path built so far, which on `[0, eta_j]` is the
/// path driven by the first `j - 1` interventions, so a single forward pass
/// gives the same result as re-simulating per intervention.
///
/// Jumps inside a grid step are applied at their exact times; the Euler
/// increment of the step uses the coefficients at the left grid point,
/// after any jumps located exactly there.
pub fn simulate_sde(spec: &ProblemSpec, u: &ImpulseControl, cut: f64, noise: &DriverNoise) -> Result<CadlagPath> {
    let horizon = spec.horizon();
    let dt = noise.dt();
    let steps = grid_steps(horizon, dt)?;
    if noise.dim() != spec.dim() {
        return Err(Error::Dimension { expected: spec.dim(), got: noise.dim() });
    }
    if noise.steps() < steps {
        return Err(Error::Precondition(format!(
            "noise covers {} steps, grid needs {steps}",
            noise.steps()
        )));
    }
    let tol = 1e-12 * horizon.max(1.0);
    if let Some(iv) = u.interventions().iter().find(|i| i.time < cut - tol) {
        return Err(Error::Precondition(format!(
            "intervention at {} precedes the cut {cut}",
            iv.time
        )));
    }
    if let Some(iv) = u.interventions().iter().find(|i| i.time > horizon + tol) {
        return Err(Error::Precondition(format!("intervention at {} after the horizon", iv.time)));
    }
    for iv in u.interventions() {
        if iv.mark >= spec.marks().len() {
            return Err(Error::Precondition(format!("unknown mark {}", iv.mark)));
        }
    }

    let mut events: Vec<Event> = noise
        .atoms()
        .atoms()
        .iter()
        .filter(|a| a.time <= cut + tol && a.time <= horizon + tol)
        .map(|a| Event { time: a.time, kind: JumpKind::Random { mark: a.mark } })
        .chain(u.interventions().iter().map(|i| Event {
            time: i.time,
            kind: JumpKind::Impulse { mark: i.mark },
        }))
        .collect();
    // stable: atoms precede impulses at equal times
    events.sort_by(|a, b| a.time.total_cmp(&b.time));

    let mut path = CadlagPath::new(0.0, spec.x0());
    let mut k = 0;
    for i in 0..steps {
        let s = i as f64 * dt;
        let next = (i + 1) as f64 * dt;
        while k < events.len() && events[k].time <= s + tol {
            let at = s.max(path.current_time());
            apply_event(spec, &mut path, at, events[k].kind)?;
            k += 1;
        }
        let inc = euler_increment(spec, s, &path, dt, noise.increment(i));
        while k < events.len() && events[k].time < next - tol {
            apply_event(spec, &mut path, events[k].time, events[k].kind)?;
            k += 1;
        }
        let x: Vec<f64> = path.current().iter().zip(&inc).map(|(a, b)| a + b).collect();
        path.push(next, &x)?;
    }
    while k < events.len() {
        let at = horizon.max(path.current_time());
        apply_event(spec, &mut path, at, events[k].kind)?;
        k += 1;
    }
    Ok(path)
}
