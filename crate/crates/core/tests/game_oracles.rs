//! Game values on the lattice against brute-force enumeration over explicit
//! Brownian paths and explicit controls, evaluated with the pathwise Euler
//! scheme and the pathwise payoff.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use snell_core::fixtures;
use snell_core::game::dpp::batches;
use snell_core::game::*;
use snell_core::model::{concat, cost_functional, ImpulseControl, Intervention, ProblemSpec};
use snell_core::rng::path_rng;
use snell_core::sim::{simulate_sde, DriverNoise};

const DT: f64 = 0.25;
const STEPS: usize = 4;

fn grid(spec: &ProblemSpec) -> GameGrid {
    GameGrid::new(1.0, DT, MarkPartition::identity(spec.marks().len())).unwrap()
}

fn noise(increments: &[f64]) -> DriverNoise {
    let mut inc = increments.to_vec();
    inc.resize(STEPS, 0.0);
    DriverNoise::new(1, DT, inc, Default::default()).unwrap()
}

fn payoff(spec: &ProblemSpec, u: &[Intervention], increments: &[f64], i: usize) -> f64 {
    let u = ImpulseControl::new(u.to_vec()).unwrap();
    let path = simulate_sde(spec, &u, 0.0, &noise(increments)).unwrap();
    cost_functional(spec, &path, &u, i as f64 * DT, 0.0, DT).unwrap()
}

fn options(spec: &ProblemSpec, left: usize, max_batch: usize) -> Vec<Vec<usize>> {
    let marks: Vec<usize> = (0..spec.marks().len()).collect();
    batches(&marks, left.min(max_batch))
}

/// `max(stop now, min over batches of the mean over the two increments)`.
fn lower_oracle(spec: &ProblemSpec, i: usize, incs: &mut Vec<f64>, u: &mut Vec<Intervention>, left: usize, mb: usize) -> f64 {
    let stop = payoff(spec, u, incs, i);
    if i == STEPS {
        return stop;
    }
    let mut best = f64::INFINITY;
    for b in options(spec, left, mb) {
        let base = u.len();
        u.extend(b.iter().map(|&mark| Intervention { time: i as f64 * DT, mark }));
        let mut mean = 0.0;
        for w in [DT.sqrt(), -DT.sqrt()] {
            incs.push(w);
            mean += 0.5 * lower_oracle(spec, i + 1, incs, u, left - b.len(), mb);
            incs.pop();
        }
        u.truncate(base);
        best = best.min(mean);
    }
    stop.max(best)
}

/// Controller's best response to a stopping strategy.
fn upper_oracle(
    spec: &ProblemSpec,
    strategy: &StoppingStrategy,
    i: usize,
    incs: &mut Vec<f64>,
    u: &mut Vec<Intervention>,
    left: usize,
    mb: usize,
) -> f64 {
    let t = i as f64 * DT;
    let control = ImpulseControl::new(u.clone()).unwrap();
    let path = simulate_sde(spec, &control, 0.0, &noise(incs)).unwrap().prefix(t);
    if strategy.decide(&StopQuery { step: i, time: t, path: &path, budget: left }).unwrap() {
        return payoff(spec, u, incs, i);
    }
    let mut best = f64::INFINITY;
    for b in options(spec, left, mb) {
        let base = u.len();
        u.extend(b.iter().map(|&mark| Intervention { time: t, mark }));
        let mut mean = 0.0;
        for w in [DT.sqrt(), -DT.sqrt()] {
            incs.push(w);
            mean += 0.5 * upper_oracle(spec, strategy, i + 1, incs, u, left - b.len(), mb);
            incs.pop();
        }
        u.truncate(base);
        best = best.min(mean);
    }
    best
}

fn with(name: &str, pairs: &[(&str, f64)]) -> ProblemSpec {
    let over: BTreeMap<String, f64> = pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    fixtures::build(name, &over).unwrap()
}

fn cases() -> Vec<(&'static str, ProblemSpec, usize, Option<usize>)> {
    vec![
        ("f1", fixtures::named("f1").unwrap(), 2, None),
        ("f1 drift", with("f1", &[("drift", 0.4)]), 2, None),
        ("reward-flow", fixtures::named("reward-flow").unwrap(), 3, None),
        ("reward-flow single", fixtures::named("reward-flow").unwrap(), 3, Some(1)),
        ("lookback", fixtures::named("lookback").unwrap(), 2, None),
        ("two marks", with("f1-two-marks", &[("reward", 1.0)]), 2, None),
    ]
}

#[test]
fn lower_value_matches_brute_force() {
    for (label, spec, k, mb) in cases() {
        let opts = GameOptions { max_batch: mb, ..Default::default() };
        let dpp = lower_value(&spec, &grid(&spec), k, &opts).unwrap();
        let oracle = lower_oracle(&spec, 0, &mut vec![], &mut vec![], k, mb.unwrap_or(k));
        assert!((dpp - oracle).abs() < 1e-12, "{label}: {dpp} vs {oracle}");
    }
}

#[test]
fn extracted_strategy_closes_the_gap() {
    for (label, spec, k, mb) in cases() {
        let opts = GameOptions { max_batch: mb, ..Default::default() };
        let g = grid(&spec);
        let field = Arc::new(dpp_backward(&spec, &g, k, &opts).unwrap());
        let strategy = extract_stopping_strategy(&field);
        let upper = upper_value(&spec, &g, k, &strategy, &opts).unwrap();
        let oracle = upper_oracle(&spec, &strategy, 0, &mut vec![], &mut vec![], k, mb.unwrap_or(k));
        assert!((upper - oracle).abs() < 1e-12, "{label}: {upper} vs {oracle}");
        assert!(field.root_value() <= upper, "{label}");
        assert_eq!(field.root_value(), upper, "{label}");
        let rolled = roll_forward(&field, &strategy).unwrap();
        assert!((rolled - field.root_value()).abs() < 1e-12, "{label}: {rolled}");
    }
}

#[test]
fn other_strategies_do_no_better_for_the_stopper() {
    for (label, spec, k, mb) in cases() {
        let opts = GameOptions { max_batch: mb, ..Default::default() };
        let g = grid(&spec);
        let lower = lower_value(&spec, &g, k, &opts).unwrap();
        for level in [-0.5, 0.0, 0.25, 0.75] {
            let strategy = StoppingStrategy::new(STEPS, 1.0, move |q| Ok(q.path.current()[0] >= level));
            let upper = upper_value(&spec, &g, k, &strategy, &opts).unwrap();
            let oracle = upper_oracle(&spec, &strategy, 0, &mut vec![], &mut vec![], k, mb.unwrap_or(k));
            assert!((upper - oracle).abs() < 1e-12, "{label} {level}: {upper} vs {oracle}");
            assert!(upper <= lower + 1e-12, "{label} {level}");
        }
    }
}

/// Classical backward induction `max(Psi, f dt + mean)` over the walk.
fn snell_oracle(spec: &ProblemSpec, i: usize, incs: &mut Vec<f64>) -> f64 {
    let stop = payoff(spec, &[], incs, i);
    if i == STEPS {
        return stop;
    }
    let mut mean = 0.0;
    for w in [DT.sqrt(), -DT.sqrt()] {
        incs.push(w);
        mean += 0.5 * snell_oracle(spec, i + 1, incs);
        incs.pop();
    }
    // payoff() already carries the running cost up to t_i, so the
    // continuation is just the mean of the stopped values.
    stop.max(mean)
}

#[test]
fn zero_budget_and_priced_out_impulses_give_the_stopping_value() {
    for name in ["f1", "reward-flow", "lookback"] {
        let spec = fixtures::named(name).unwrap();
        let oracle = snell_oracle(&spec, 0, &mut vec![]);
        let zero = lower_value(&spec, &grid(&spec), 0, &GameOptions::default()).unwrap();
        assert!((zero - oracle).abs() < 1e-12, "{name}: {zero} vs {oracle}");
        let pricey = spec.clone().scale_intervention_cost(1e3);
        let k3 = lower_value(&pricey, &grid(&pricey), 3, &GameOptions::default()).unwrap();
        assert!((k3 - oracle).abs() < 1e-12, "{name}: {k3} vs {oracle}");
    }
}

#[test]
fn constant_payoff_keeps_every_batch_empty() {
    let spec = fixtures::named("constant").unwrap();
    let field = dpp_backward(&spec, &grid(&spec), 3, &GameOptions::default()).unwrap();
    assert_eq!(field.root_value(), 1.0);
    for i in 0..STEPS {
        for a in 0..field.values(i).len() {
            assert_eq!(field.value(i, a), 1.0);
            assert!(field.best_option(i, a).unwrap().marks.is_empty());
        }
    }
}

#[test]
fn path_mode_agrees_with_markov_mode() {
    for name in ["f1", "reward-flow", "f1-two-marks"] {
        let spec = fixtures::named(name).unwrap();
        let g = grid(&spec);
        let merged = lower_value(&spec, &g, 2, &GameOptions::default()).unwrap();
        let full = lower_value(&spec.clone().with_markov(false), &g, 2, &GameOptions::default()).unwrap();
        assert!((merged - full).abs() < 1e-14, "{name}: {merged} vs {full}");
    }
}

#[test]
fn stopping_decisions_ignore_the_future_of_the_control() {
    let spec = fixtures::named("reward-flow").unwrap();
    let g = grid(&spec);
    let k = 3;
    let field = Arc::new(dpp_backward(&spec, &g, k, &GameOptions::default()).unwrap());
    let strategy = extract_stopping_strategy(&field);
    let mut rng = path_rng(99, 0);
    let random_control = |rng: &mut rand_chacha::ChaCha8Rng, from: usize, count: usize| {
        let mut steps: Vec<usize> = (0..count).map(|_| rng.random_range(from..STEPS)).collect();
        steps.sort_unstable();
        ImpulseControl::new(steps.into_iter().map(|s| Intervention { time: s as f64 * DT, mark: 0 }).collect())
            .unwrap()
    };
    let mut stopped_early = 0;
    for _ in 0..100 {
        let incs: Vec<f64> = (0..STEPS).map(|_| if rng.random::<bool>() { DT.sqrt() } else { -DT.sqrt() }).collect();
        let n = noise(&incs);
        let count = rng.random_range(0..=k);
        let u = random_control(&mut rng, 0, count);
        let tau = strategy.first_stop(&spec, &g, k, &u, &n).unwrap();
        if tau == STEPS {
            continue;
        }
        stopped_early += 1;
        let t = tau as f64 * DT;
        let kept = u.restrict_before(t);
        let tail = random_control(&mut rng, tau, k - kept.len());
        let other = concat(&kept, t, &tail).unwrap();
        assert_eq!(strategy.first_stop(&spec, &g, k, &other, &n).unwrap(), tau);
    }
    assert!(stopped_early > 0);
}

#[test]
fn more_budget_never_hurts_the_controller() {
    let spec = fixtures::named("reward-flow").unwrap();
    let report = truncation_sweep(&spec, &grid(&spec), &[0, 1, 2, 3, 4, 5, 6, 8], &GameOptions::default()).unwrap();
    assert!(report.non_increasing);
    let v: BTreeMap<usize, f64> = report.rows.iter().copied().collect();
    assert!((v[&6] - v[&8]).abs() <= 1e-6);
    assert!(v[&0] > v[&3]);
}
