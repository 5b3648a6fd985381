//! Penalized BSDE on the lattice: oracles, structural invariants and the
//! cross-check against the game recursion.

use std::collections::BTreeMap;

use proptest::prelude::*;
use snell_core::bsde::*;
use snell_core::fixtures;
use snell_core::game::{lower_value, GameGrid, GameOptions, MarkPartition};
use snell_core::model::{CadlagPath, ProblemSpec};
use snell_core::sim::ScenarioLattice;

fn with(name: &str, pairs: &[(&str, f64)]) -> ProblemSpec {
    let over: BTreeMap<String, f64> = pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    fixtures::build(name, &over).unwrap()
}

/// Jump-free backward induction on a Markov one-dimensional problem:
/// `V(i, x) = max(Psi, f dt + mean over +-sigma sqrt(dt) of V(i + 1, .))`.
fn no_jump_snell(spec: &ProblemSpec, steps: usize, i: usize, x: f64) -> f64 {
    let dt = spec.horizon() / steps as f64;
    let t = i as f64 * dt;
    let here = CadlagPath::new(t, &[x]);
    let s = spec.barrier(t, &here);
    if i == steps {
        return s;
    }
    let a = spec.drift(t, &here)[0];
    let sigma = spec.vol(t, &here)[0];
    let up = no_jump_snell(spec, steps, i + 1, x + a * dt + sigma * dt.sqrt());
    let down = no_jump_snell(spec, steps, i + 1, x + a * dt - sigma * dt.sqrt());
    s.max(spec.running_cost(t, &here) * dt + 0.5 * (up + down))
}

#[test]
fn zero_penalty_is_the_jump_free_snell_envelope() {
    for spec in [
        fixtures::named("reward-flow").unwrap(),
        with("f1", &[("drift", 0.3)]),
        with("f1-two-marks", &[("drift", -0.2), ("reward", 0.5)]),
    ] {
        let lattice = ScenarioLattice::build(&spec, 5).unwrap();
        let sol = solve_penalized(&BsdeSpec::linear(&spec), &lattice, 0.0).unwrap();
        let oracle = no_jump_snell(&spec, 5, 0, 0.0);
        assert!((sol.root_value() - oracle).abs() < 1e-12, "{} vs {oracle}", sol.root_value());
    }
}

#[test]
fn slack_constraint_makes_the_penalty_irrelevant() {
    let spec = fixtures::named("f1").unwrap().scale_intervention_cost(1e3);
    let lattice = ScenarioLattice::build(&spec, 4).unwrap();
    let b = BsdeSpec::linear(&spec);
    let one = solve_penalized(&b, &lattice, 1.0).unwrap();
    let many = solve_penalized(&b, &lattice, 32.0).unwrap();
    let zero = solve_penalized(&b, &lattice, 0.0).unwrap();
    for i in 0..=4 {
        assert_eq!(one.y(i), many.y(i));
        assert_eq!(one.y(i), zero.y(i));
    }
    assert_eq!(many.k_minus_total(), 0.0);
}

#[test]
fn z_is_the_diffusion_coefficient_for_a_linear_martingale_payoff() {
    let spec = fixtures::named("f1").unwrap();
    let lattice = ScenarioLattice::build(&spec, 3).unwrap();
    let sol = solve_penalized(&BsdeSpec::linear(&spec), &lattice, 0.0).unwrap();
    for i in 0..3 {
        for node in 0..lattice.level(i).len() {
            assert!((sol.z(i, node)[0] - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn explicit_driver_and_one_picard_sweep() {
    // Jump-free one-step problem with driver c * y.
    let c: f64 = -0.8;
    let problem = with("one-step", &[("lambda", 0.1)]);
    let lattice = ScenarioLattice::build(&problem, 1).unwrap();
    let base = BsdeSpec::linear(&problem).with_driver(c.abs(), move |_, _, y, _, _| c * y).with_barrier(|_, _| 0.2);
    let base = base.with_terminal(|p| p.current()[0].max(0.2));
    // Mean of the terminal value over all branches and over the no-jump ones.
    let next = |x: f64| x.max(0.2);
    let no_jump = 0.5 * (next(1.0) + next(-1.0));
    let all = 0.9 * no_jump + 0.1 * 0.5 * (next(0.0) + next(-2.0));
    let explicit = solve_penalized(&base, &lattice, 0.0).unwrap();
    let first = 0.2f64.max(no_jump + c * all);
    assert!((explicit.root_value() - first).abs() < 1e-14);
    let picard = solve_penalized(&base.clone().with_picard(true), &lattice, 0.0).unwrap();
    let second = 0.2f64.max(no_jump + c * first);
    assert!((picard.root_value() - second).abs() < 1e-14);
}

#[test]
fn picard_changes_nothing_for_the_linear_equation() {
    let spec = fixtures::named("reward-flow").unwrap();
    let lattice = ScenarioLattice::build(&spec, 4).unwrap();
    let b = BsdeSpec::linear(&spec);
    let plain = solve_penalized(&b, &lattice, 4.0).unwrap();
    let picard = solve_penalized(&b.with_picard(true), &lattice, 4.0).unwrap();
    assert_eq!(plain, picard);
}

#[test]
fn penalty_limit_is_the_one_impulse_per_step_game() {
    for spec in [fixtures::named("reward-flow").unwrap(), fixtures::named("lookback").unwrap()] {
        let lattice = ScenarioLattice::build(&spec, 4).unwrap();
        let g = GameGrid::new(1.0, 0.25, MarkPartition::identity(spec.marks().len())).unwrap();
        let game = lower_value(&spec, &g, 4, &GameOptions { max_batch: Some(1), ..Default::default() }).unwrap();
        let b = BsdeSpec::linear(&spec);
        for n in [1.0, 8.0, 64.0, 1024.0] {
            assert!(solve_penalized(&b, &lattice, n).unwrap().root_value() >= game);
        }
        let far = solve_penalized(&b, &lattice, 65536.0).unwrap().root_value();
        assert!(far - game < 1e-4, "{far} vs {game}");
    }
}

#[test]
fn stopped_and_reflected_solves_reproduce_the_penalized_value() {
    let spec = fixtures::named("reward-flow").unwrap();
    let lattice = ScenarioLattice::build(&spec, 4).unwrap();
    let b = BsdeSpec::linear(&spec);
    let sol = solve_penalized(&b, &lattice, 8.0).unwrap();
    let star = snell_core::randomized::saddle_density(&sol, &lattice, 0.0);
    let rule = optimal_stopping_time(&sol, 0);
    let stopped = stopped_bsde_solve(&b, &lattice, &rule, Some(&star)).unwrap();
    assert!((stopped - sol.root_value()).abs() < 1e-10);
    let reflected = reflected_with_density(&b, &lattice, Some(&star)).unwrap();
    assert!((reflected - sol.root_value()).abs() < 1e-12);
    let mut rng = snell_core::rng::path_rng(4, 0);
    for _ in 0..20 {
        let tau = StopRule::random(&lattice, 0.4, &mut rng);
        assert!(stopped_bsde_solve(&b, &lattice, &tau, Some(&star)).unwrap() <= reflected + 1e-12);
    }
}

#[test]
fn regression_backend_is_monotone_within_noise() {
    let spec = fixtures::named("reward-flow").unwrap();
    let b = BsdeSpec::linear(&spec);
    let opts = BsdeLsmcOptions { paths: 10_000, ..Default::default() };
    let runs: Vec<LsmcSolution> = [1.0, 2.0, 4.0, 8.0].iter().map(|&n| solve_penalized_lsmc(&b, n, &opts).unwrap()).collect();
    for w in runs.windows(2) {
        assert!(w[1].value <= w[0].value + 3.0 * w[0].std_error.max(w[1].std_error));
    }
    assert!(runs.iter().all(|r| r.max_violation <= 1e-12));
}

fn arb_problem() -> impl Strategy<Value = ProblemSpec> {
    (0usize..3, 0.0f64..0.6, -1.0f64..0.5, 0.0f64..1.5, -0.5f64..0.5).prop_map(|(which, chi, gamma, reward, drift)| {
        let name = ["f1", "f1-two-marks", "lookback"][which];
        with(name, &[("chi", chi), ("gamma", gamma), ("reward", reward), ("drift", drift)])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn structural_invariants_hold(spec in arb_problem()) {
        let lattice = ScenarioLattice::build(&spec, 3).unwrap();
        let b = BsdeSpec::linear(&spec);
        let levels = [0.0, 1.0, 2.0, 4.0, 8.0, 32.0];
        let sols: Vec<PenalizedSolution> = levels.iter().map(|&n| solve_penalized(&b, &lattice, n).unwrap()).collect();
        for i in 0..=3 {
            for (lo, hi) in sols.iter().zip(&sols[1..]) {
                for (a, c) in lo.y(i).iter().zip(hi.y(i)) {
                    prop_assert!(c <= a);
                }
            }
            for sol in &sols {
                for (node, (&y, &s)) in sol.y(i).iter().zip(sol.barrier(i)).enumerate() {
                    prop_assert!(y >= s);
                    prop_assert!(y <= sols[0].y(i)[node]);
                    if i < 3 {
                        let dkp = sol.dk_plus(i)[node];
                        prop_assert!(dkp >= 0.0 && sol.dk_minus(i)[node] >= 0.0);
                        prop_assert!((dkp * (y - s)).abs() <= 1e-12);
                        if y != s {
                            prop_assert_eq!(dkp, 0.0);
                        }
                    }
                }
            }
        }
        for sol in &sols {
            prop_assert!(sol.max_violation() <= 1e-12);
        }
        // tau_32 stops no later than tau_1.
        prop_assert!(optimal_stopping_time(&sols[1], 0).is_subset_of(&optimal_stopping_time(&sols[5], 0)));
    }

    #[test]
    fn larger_running_cost_raises_the_solution(spec in arb_problem(), c in 0.01f64..1.0) {
        let lattice = ScenarioLattice::build(&spec, 3).unwrap();
        let lo = solve_penalized(&BsdeSpec::linear(&spec), &lattice, 4.0).unwrap();
        let hi = solve_penalized(&BsdeSpec::linear(&spec.clone().shift_running_cost(c)), &lattice, 4.0).unwrap();
        for i in 0..=3 {
            for (a, b) in lo.y(i).iter().zip(hi.y(i)) {
                prop_assert!(b >= a);
            }
        }
    }
}
