//! Pathwise evaluation of the game payoff.

use super::control::ImpulseControl;
use super::path::{CadlagPath, JumpKind};
use super::problem::ProblemSpec;
use crate::error::{Error, Result};

/// Payoff of stopping at `tau` along `path`, the state path generated from
/// time `t` under the control `u`:
///
/// `Psi(tau, X) + int_t^tau f(s, X) ds + sum_{eta_j <= tau} chi(eta_j, X before impulse j, beta_j)`.
///
/// The integral uses the left-endpoint rule on the grid `t, t + dt, ...`.
/// Impulse `j` of `u` is matched with the `j`-th impulse jump of `path`.
pub fn cost_functional(
    spec: &ProblemSpec,
    path: &CadlagPath,
    u: &ImpulseControl,
    tau: f64,
    t: f64,
    dt: f64,
) -> Result<f64> {
    if !(t <= tau && tau <= spec.horizon()) {
        return Err(Error::Range(format!("stopping time {tau} outside [{t}, {}]", spec.horizon())));
    }
    if !(dt > 0.0) {
        return Err(Error::Range(format!("quadrature step {dt} must be positive")));
    }
    let mut value = spec.barrier(tau, &path.prefix(tau));

    let mut i = 0usize;
    loop {
        let s = t + i as f64 * dt;
        if s >= tau {
            break;
        }
        let next = (t + (i + 1) as f64 * dt).min(tau);
        value += spec.running_cost(s, &path.prefix(s)) * (next - s);
        i += 1;
    }

    let impulse_jumps: Vec<usize> = path
        .jumps()
        .iter()
        .enumerate()
        .filter(|(_, j)| matches!(j.kind, JumpKind::Impulse { .. }))
        .map(|(idx, _)| idx)
        .collect();
    for (j, iv) in u.interventions().iter().enumerate() {
        if iv.time > tau {
            break;
        }
        let idx = *impulse_jumps.get(j).ok_or_else(|| {
            Error::Precondition(format!("path carries no jump for intervention {j}"))
        })?;
        let jump = &path.jumps()[idx];
        if jump.time != iv.time || jump.kind != (JumpKind::Impulse { mark: iv.mark }) {
            return Err(Error::Precondition(format!(
                "intervention {j} at {} does not match the path's impulse at {}",
                iv.time, jump.time
            )));
        }
        value += spec.intervention_cost(iv.time, &path.prefix_before_jump(idx), iv.mark);
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::problem::MarkSpace;

    fn impulsed_path(u: &ImpulseControl) -> CadlagPath {
        let mut p = CadlagPath::new(0.0, &[0.0]);
        for iv in u.interventions() {
            p.apply_jump(iv.time, &[-0.5], JumpKind::Impulse { mark: iv.mark }).unwrap();
        }
        p
    }

    fn base() -> ProblemSpec {
        ProblemSpec::new(1.0, vec![0.0])
            .unwrap()
            .with_marks(MarkSpace::scalar(&[0.0], &[1.0]).unwrap())
    }

    #[test]
    fn constant_barrier_only() {
        let spec = base().with_markov_barrier(|_, _| 1.0);
        let u = ImpulseControl::from_pairs(&[(0.25, 0)]).unwrap();
        let p = impulsed_path(&u);
        for tau in [0.0, 0.3, 1.0] {
            assert_eq!(cost_functional(&spec, &p, &u, tau, 0.0, 0.25).unwrap(), 1.0);
        }
    }

    #[test]
    fn unit_running_cost_integrates_to_horizon() {
        let spec = base().with_markov_running_cost(|_, _| 1.0);
        let p = CadlagPath::new(0.0, &[0.0]);
        let u = ImpulseControl::empty();
        assert_eq!(cost_functional(&spec, &p, &u, 1.0, 0.0, 0.25).unwrap(), 1.0);
    }

    #[test]
    fn intervention_costs_add_up_to_stop_time() {
        let spec = base()
            .with_markov_barrier(|_, x| x[0])
            .with_markov_intervention_cost(|_, _, _| 0.3);
        let u = ImpulseControl::from_pairs(&[(0.25, 0), (0.5, 0), (0.75, 0)]).unwrap();
        let p = impulsed_path(&u);
        let plain = spec.barrier(0.6, &p.prefix(0.6));
        let j = cost_functional(&spec, &p, &u, 0.6, 0.0, 0.25).unwrap();
        assert!((j - plain - 0.6).abs() < 1e-15);

        let doubled = spec.clone().scale_intervention_cost(2.0);
        let j2 = cost_functional(&doubled, &p, &u, 0.6, 0.0, 0.25).unwrap();
        assert!((j2 - j - 0.6).abs() < 1e-15);
    }

    #[test]
    fn stop_time_outside_window_is_rejected() {
        let spec = base();
        let p = CadlagPath::new(0.0, &[0.0]);
        let u = ImpulseControl::empty();
        assert!(matches!(cost_functional(&spec, &p, &u, 0.2, 0.5, 0.25), Err(Error::Range(_))));
        assert!(matches!(cost_functional(&spec, &p, &u, 1.5, 0.0, 0.25), Err(Error::Range(_))));
    }
}
