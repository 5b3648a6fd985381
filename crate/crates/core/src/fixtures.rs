//! Registered test problems. Coefficients are code; a fixture is selected by
//! name and tuned by a small set of named numeric parameters.
//!
//! | name            | dynamics                       | costs                                   |
//! |-----------------|--------------------------------|-----------------------------------------|
//! | `f1`            | `dX = dW`, jumps `-0.5`        | `Psi = x`, `f = 0`, `chi = 0.3`         |
//! | `f2`            | as `f1`                        | as `f1` with `chi = 0`                  |
//! | `f1-two-marks`  | jumps `-0.5` or `-0.25`        | as `f1`                                 |
//! | `reward-flow`   | as `f1`                        | `Psi = x`, `f = 1`, `chi = 0.3`         |
//! | `constant`      | as `f1`                        | `Psi = level`, `f = 0`, `chi = 0.3`     |
//! | `one-step`      | `dX = dW`, `T = 1`, jump `-1`  | `Psi = x`, `f = 0`, `chi = 0.1`         |
//! | `lookback`      | as `f1`                        | `Psi = running max of x`, `chi = 0.3`   |
//!
//! All fixtures start at `x0 = 0` on `[0, 1]` with jump intensity
//! `lambda(U) = 1` unless overridden. The parameter `reward` sets a constant
//! running cost `f` on every fixture (default `0`, `1` for `reward-flow`).

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{MarkSpace, ProblemSpec};

pub const NAMES: [&str; 7] = ["f1", "f2", "f1-two-marks", "reward-flow", "constant", "one-step", "lookback"];

/// Tunable parameters and their defaults for `name`.
pub fn defaults(name: &str) -> Result<BTreeMap<&'static str, f64>> {
    let mut p: BTreeMap<&'static str, f64> = [
        ("horizon", 1.0),
        ("x0", 0.0),
        ("sigma", 1.0),
        ("drift", 0.0),
        ("gamma", -0.5),
        ("chi", 0.3),
        ("lambda", 1.0),
        ("chi_scale", 1.0),
        ("reward", 0.0),
    ]
    .into_iter()
    .collect();
    match name {
        "f1" | "f1-two-marks" | "lookback" => {}
        "f2" => {
            p.insert("chi", 0.0);
        }
        "reward-flow" => {
            p.insert("reward", 1.0);
        }
        "constant" => {
            p.insert("level", 1.0);
        }
        "one-step" => {
            p.insert("gamma", -1.0);
            p.insert("chi", 0.1);
        }
        other => return Err(Error::Spec(format!("unknown fixture '{other}'"))),
    }
    Ok(p)
}

fn merged(name: &str, overrides: &BTreeMap<String, f64>) -> Result<BTreeMap<&'static str, f64>> {
    let mut p = defaults(name)?;
    for (k, v) in overrides {
        let slot = p
            .iter_mut()
            .find(|(key, _)| **key == k.as_str())
            .ok_or_else(|| Error::Spec(format!("fixture '{name}' has no parameter '{k}'")))?;
        if !v.is_finite() {
            return Err(Error::Spec(format!("parameter '{k}' is not finite")));
        }
        *slot.1 = *v;
    }
    let check = |key: &str, ok: bool| {
        if ok {
            Ok(())
        } else {
            Err(Error::Spec(format!("parameter '{key}' = {} out of range", p[key])))
        }
    };
    check("horizon", p["horizon"] > 0.0)?;
    check("sigma", p["sigma"] >= 0.0)?;
    check("chi", p["chi"] >= 0.0)?;
    check("chi_scale", p["chi_scale"] >= 0.0)?;
    check("lambda", p["lambda"] > 0.0)?;
    Ok(p)
}

/// Build fixture `name` with parameter overrides.
pub fn build(name: &str, overrides: &BTreeMap<String, f64>) -> Result<ProblemSpec> {
    let p = merged(name, overrides)?;
    let (sigma, drift, gamma, chi, lambda) = (p["sigma"], p["drift"], p["gamma"], p["chi"] * p["chi_scale"], p["lambda"]);
    let marks = if name == "f1-two-marks" {
        MarkSpace::scalar(&[gamma, gamma / 2.0], &[lambda / 2.0, lambda / 2.0])?
    } else {
        MarkSpace::scalar(&[gamma], &[lambda])?
    };
    let reward = p["reward"];
    let base = ProblemSpec::new(p["horizon"], vec![p["x0"]])?
        .with_markov_drift(move |_, _| vec![drift])
        .with_markov_vol(move |_, _| vec![sigma])
        .with_markov_jump(|_, _, e| vec![e[0]])
        .with_markov_intervention_cost(move |_, _, _| chi)
        .with_markov_running_cost(move |_, _| reward)
        .with_marks(marks)
        .with_markov(true);
    let spec = match name {
        "f1" | "f2" | "f1-two-marks" | "one-step" | "reward-flow" => base.with_markov_barrier(|_, x| x[0]),
        "constant" => {
            let level = p["level"];
            base.with_markov_barrier(move |_, _| level)
        }
        "lookback" => base
            .with_barrier(|t, path| {
                let end = path.times().partition_point(|&s| s <= t).max(1);
                (0..end).map(|i| path.value(i)[0]).fold(f64::NEG_INFINITY, f64::max)
            })
            .with_markov(false),
        other => return Err(Error::Spec(format!("unknown fixture '{other}'"))),
    };
    Ok(spec)
}

/// [`build`] with default parameters.
pub fn named(name: &str) -> Result<ProblemSpec> {
    build(name, &BTreeMap::new())
}

/// Fixed step count the fixture is designed for (`4` steps of `0.25`, or a
/// single step for `one-step`).
pub fn default_steps(name: &str) -> usize {
    if name == "one-step" {
        1
    } else {
        4
    }
}
