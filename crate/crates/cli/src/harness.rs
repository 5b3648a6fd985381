//! The experiments behind each subcommand. Every function returns a table
//! and the checks it performed; `main` writes both out.

use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Result};
use rayon::prelude::*;
use snell_core::bsde::{snell_limit, solve_penalized, solve_penalized_lsmc, BsdeLsmcOptions, BsdeSpec};
use snell_core::game::{
    dpp_backward, extract_stopping_strategy, truncation_sweep, upper_value, GameGrid, GameOptions, LsmcGame,
    LsmcOptions,
};
use snell_core::model::{ImpulseControl, JumpKind, ProblemSpec};
use snell_core::randomized::verify_saddle;
use snell_core::rng::{derive_seed, path_rng};
use snell_core::sim::{simulate_sde, DriverNoise, IncrementKind, ScenarioLattice};

use crate::config::{Backend, ExperimentConfig};
use crate::record::Check;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub table: Table,
    pub checks: Vec<Check>,
    /// Second table, e.g. the path dump of `simulate`.
    pub extra: Option<Table>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn ms(start: Instant) -> String {
    format!("{:.3}", start.elapsed().as_secs_f64() * 1e3)
}

fn game_options(config: &ExperimentConfig) -> GameOptions {
    GameOptions { max_batch: config.max_batch, ..Default::default() }
}

/// Uncontrolled forward paths under the base measure.
pub fn simulate(config: &ExperimentConfig, paths: usize, dump: bool) -> Result<Report> {
    let problem = config.problem()?;
    let grid = config.grid(&problem, None)?;
    let (steps, dt, dim) = (grid.steps(), grid.dt(), problem.dim());
    let seed = derive_seed(config.seed, "simulate");
    let none = ImpulseControl::empty();
    let sims: Vec<_> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p as u64);
            let noise =
                DriverNoise::sample(dim, dt, steps, IncrementKind::Gaussian, problem.marks().weights(), &mut rng)?;
            let path = simulate_sde(&problem, &none, problem.horizon(), &noise)?;
            Ok((noise.atoms().len(), path))
        })
        .collect::<snell_core::Result<_>>()?;

    let mut table = Table::new(&["path_id", "terminal_state", "sup_norm", "jumps"]);
    let mut dump_table = Table::new(&["path_id", "time", "state", "jump", "mark"]);
    let mut counts_match = true;
    for (p, (atoms, path)) in sims.iter().enumerate() {
        counts_match &= *atoms == path.jump_count();
        table.push(vec![
            p.to_string(),
            num(path.current()[0]),
            num(path.sup_norm(problem.horizon())),
            path.jump_count().to_string(),
        ]);
        if dump {
            for (i, t) in path.times().iter().enumerate() {
                dump_table.push(vec![p.to_string(), num(*t), num(path.value(i)[0]), "0".into(), String::new()]);
            }
            for j in path.jumps() {
                let mark = match j.kind {
                    JumpKind::Random { mark } | JumpKind::Impulse { mark } => mark,
                };
                dump_table.push(vec![p.to_string(), num(j.time), num(j.post[0]), "1".into(), mark.to_string()]);
            }
        }
    }
    Ok(Report {
        table,
        checks: vec![Check::holds("jump_count_matches_atoms", counts_match)],
        extra: dump.then_some(dump_table),
    })
}

struct GameRun {
    lower: f64,
    upper: f64,
    /// Monte Carlo standard error of the upper value; zero on the tree.
    std_error: f64,
}

fn run_game(config: &ExperimentConfig, problem: &ProblemSpec, grid: &GameGrid, k: usize) -> Result<GameRun> {
    match config.backend {
        Backend::Tree => {
            let field = Arc::new(dpp_backward(problem, grid, k, &game_options(config))?);
            let strategy = extract_stopping_strategy(&field);
            let upper = upper_value(problem, grid, k, &strategy, &game_options(config))?;
            Ok(GameRun { lower: field.root_value(), upper, std_error: 0.0 })
        }
        Backend::Lsmc => {
            let opts = LsmcOptions {
                paths: config.samples,
                eval_paths: config.samples,
                seed: config.seed,
                max_batch: config.max_batch,
                ..Default::default()
            };
            let game = LsmcGame::solve(problem, grid, k, &opts)?;
            let (upper, _) = game.upper_value(config.samples, derive_seed(config.seed, "upper"))?;
            Ok(GameRun { lower: game.lower_value()?, upper: upper.value, std_error: upper.std_error })
        }
    }
}

/// Lower and upper values for every budget, optionally on a given grid.
pub fn solve_game(config: &ExperimentConfig, eps: Option<f64>, budgets: Option<Vec<usize>>) -> Result<Report> {
    let problem = config.problem()?;
    let grid = config.grid(&problem, eps)?;
    let budgets = budgets.unwrap_or_else(|| config.budgets());
    let mut table = Table::new(&["eps", "k", "n_steps", "lower_value", "upper_value", "gap", "runtime_ms", "seed"]);
    let mut checks = Vec::new();
    for k in budgets {
        let start = Instant::now();
        let run = run_game(config, &problem, &grid, k)?;
        let gap = run.upper - run.lower;
        table.push(vec![
            num(grid.eps()),
            k.to_string(),
            grid.steps().to_string(),
            num(run.lower),
            num(run.upper),
            num(gap),
            ms(start),
            config.seed.to_string(),
        ]);
        let slack = config.tolerances.order + config.tolerances.sigmas * run.std_error;
        checks.push(Check::at_most(format!("lower_le_upper_k{k}"), -gap, slack));
    }
    Ok(Report { table, checks, extra: None })
}

/// Penalized solutions at one level or across `config.penalties`.
pub fn solve_bsde(config: &ExperimentConfig, penalty: Option<f64>) -> Result<Report> {
    let problem = config.problem()?;
    let grid = config.grid(&problem, None)?;
    let spec = BsdeSpec::linear(&problem);
    let levels = penalty.map_or_else(|| config.penalties.clone(), |n| vec![n]);
    let mut table = Table::new(&["n", "Y0", "K_minus_total", "K_plus_total", "max_violation", "runtime_ms"]);
    let mut checks = Vec::new();
    let mut values: Vec<(f64, f64)> = Vec::new();
    let lattice = match config.backend {
        Backend::Tree => Some(ScenarioLattice::build(&problem, grid.steps())?),
        Backend::Lsmc => None,
    };
    let mut worst = 0.0f64;
    for n in levels {
        let start = Instant::now();
        let (y0, kminus, kplus, violation, se) = match &lattice {
            Some(lattice) => {
                let sol = solve_penalized(&spec, lattice, n)?;
                (sol.root_value(), sol.k_minus_total(), sol.k_plus_total(), sol.max_violation(), 0.0)
            }
            None => {
                let opts = BsdeLsmcOptions {
                    paths: config.samples,
                    steps: grid.steps(),
                    seed: config.seed,
                    ..Default::default()
                };
                let sol = solve_penalized_lsmc(&spec, n, &opts)?;
                (sol.value, sol.k_minus_total, sol.k_plus_total, sol.max_violation, sol.std_error)
            }
        };
        worst = worst.max(violation);
        table.push(vec![num(n), num(y0), num(kminus), num(kplus), num(violation), ms(start)]);
        values.push((y0, se));
    }
    let sigmas = config.tolerances.sigmas;
    let rises = values
        .windows(2)
        .map(|w| w[1].0 - w[0].0 - sigmas * w[0].1.max(w[1].1))
        .fold(0.0f64, f64::max);
    checks.push(Check::at_most("penalized_values_non_increasing", rises, 0.0));
    checks.push(Check::at_most("skorokhod_defect", worst, config.tolerances.skorokhod));
    Ok(Report { table, checks, extra: None })
}

/// Random probes of the saddle-point chain at penalty level `n`.
pub fn saddle(config: &ExperimentConfig, penalty: f64, probes: Option<usize>) -> Result<Report> {
    let problem = config.problem()?;
    let grid = config.grid(&problem, None)?;
    let lattice = ScenarioLattice::build(&problem, grid.steps())?;
    let sol = solve_penalized(&BsdeSpec::linear(&problem), &lattice, penalty)?;
    let report = verify_saddle(&problem, &lattice, &sol, probes.unwrap_or(config.probes), config.seed)?;
    let mut table = Table::new(&["probe_id", "J_nu_star_tau", "J_nu_star_taun", "J_nu_taun", "violation"]);
    for r in &report.rows {
        table.push(vec![r.probe.to_string(), num(r.star_tau), num(r.star_taun), num(r.nu_taun), num(r.violation)]);
    }
    let tol = config.tolerances.saddle;
    let checks = vec![
        Check::at_most("saddle_worst_violation", report.worst_violation, tol),
        Check::at_most("saddle_identity_error", report.identity_error, tol),
    ];
    Ok(Report { table, checks, extra: None })
}

const COMPARE_HEADER: [&str; 8] = ["quantity", "k", "n", "value", "reference", "gap", "tolerance", "passed"];

fn compare_row(quantity: &str, k: Option<usize>, n: Option<f64>, value: f64, reference: f64, check: &Check) -> Vec<String> {
    vec![
        quantity.to_string(),
        k.map(|k| k.to_string()).unwrap_or_default(),
        n.map(num).unwrap_or_default(),
        num(value),
        num(reference),
        num(check.value),
        num(check.tolerance),
        check.passed.to_string(),
    ]
}

/// Game values next to penalized values and the saddle check. The output
/// has no timing columns, so it is identical across runs and thread counts.
pub fn compare(config: &ExperimentConfig) -> Result<Report> {
    let problem = config.problem()?;
    let grid = config.grid(&problem, None)?;
    let tol = &config.tolerances;
    let mut table = Table::new(&COMPARE_HEADER);
    let mut checks = Vec::new();

    let stopping = run_game(config, &problem, &grid, 0)?;
    let c = Check::holds("stopping_value", stopping.lower.is_finite());
    table.push(compare_row("stopping_value", Some(0), None, stopping.lower, stopping.lower, &c));
    checks.push(c);

    let mut budgets = config.budgets();
    budgets.sort_unstable();
    budgets.dedup();
    let mut lower = stopping.lower;
    for &k in &budgets {
        let run = run_game(config, &problem, &grid, k)?;
        let c = Check::at_most(
            format!("lower_le_upper_k{k}"),
            run.lower - run.upper,
            tol.order + tol.sigmas * run.std_error,
        );
        table.push(compare_row("lower_value", Some(k), None, run.lower, run.upper, &c));
        table.push(compare_row("upper_value", Some(k), None, run.upper, run.lower, &c));
        checks.push(c);
        lower = run.lower;
    }
    let k_max = budgets.last().copied();

    let lattice = ScenarioLattice::build(&problem, grid.steps())?;
    let spec = BsdeSpec::linear(&problem);
    if !config.penalties.is_empty() {
        let limit = snell_limit(&spec, &lattice, &config.penalties, 0.0)?;
        let mut previous_gap = f64::INFINITY;
        let mut gaps_shrink = true;
        let last = limit.rows.len() - 1;
        for (i, row) in limit.rows.iter().enumerate() {
            let gap = (lower - row.value).abs();
            gaps_shrink &= gap <= previous_gap;
            previous_gap = gap;
            let tolerance = if i == last { tol.value_gap } else { f64::INFINITY };
            let c = Check::at_most(format!("value_gap_n{}", row.penalty), gap, tolerance);
            table.push(compare_row("penalized_value", k_max, Some(row.penalty), row.value, lower, &c));
            if i == last {
                checks.push(c);
            }
        }
        checks.push(Check::holds("penalized_values_non_increasing", !limit.inconsistent));
        checks.push(Check::holds("value_gap_non_increasing", gaps_shrink));

        let n = *config.penalties.last().expect("non-empty");
        let report = verify_saddle(&problem, &lattice, &limit.last, config.probes, config.seed)?;
        let c = Check::at_most("saddle_worst_violation", report.worst_violation, tol.saddle);
        table.push(compare_row("saddle_worst_violation", None, Some(n), report.worst_violation, 0.0, &c));
        checks.push(c);
        let c = Check::at_most("saddle_identity_error", report.identity_error, tol.saddle);
        table.push(compare_row("saddle_identity_error", None, Some(n), report.identity_error, 0.0, &c));
        checks.push(c);
    }
    Ok(Report { table, checks, extra: None })
}

/// Budget, penalty and grid refinement sweeps in long format.
pub fn sweep(config: &ExperimentConfig) -> Result<Report> {
    if config.backend != Backend::Tree {
        bail!("sweeps run on the tree backend only");
    }
    let problem = config.problem()?;
    let grid = config.grid(&problem, None)?;
    let mut table = Table::new(&["parameter", "setting", "quantity", "value"]);
    let mut checks = Vec::new();

    let budgets = config.budgets();
    if !budgets.is_empty() {
        let report = truncation_sweep(&problem, &grid, &budgets, &game_options(config))?;
        for ((k, v), gap) in report.rows.iter().zip(&report.gaps) {
            table.push(vec!["k".into(), k.to_string(), "lower_value".into(), num(*v)]);
            table.push(vec!["k".into(), k.to_string(), "gap_to_largest".into(), num(*gap)]);
        }
        table.push(vec!["k".into(), "all".into(), "fitted_constant".into(), num(report.fitted_constant)]);
        checks.push(Check::holds("lower_values_non_increasing_in_k", report.non_increasing));
    }

    if !config.penalties.is_empty() {
        let lattice = ScenarioLattice::build(&problem, grid.steps())?;
        let limit = snell_limit(&BsdeSpec::linear(&problem), &lattice, &config.penalties, 0.0)?;
        for row in &limit.rows {
            let n = num(row.penalty);
            table.push(vec!["n".into(), n.clone(), "penalized_value".into(), num(row.value)]);
            table.push(vec!["n".into(), n, "k_minus_total".into(), num(row.k_minus_total)]);
        }
        table.push(vec!["n".into(), "all".into(), "extrapolated".into(), num(limit.extrapolated)]);
        checks.push(Check::holds("penalized_values_non_increasing", !limit.inconsistent));
    }

    let k = budgets.iter().copied().max().unwrap_or(0);
    for &eps in &config.eps_list {
        let grid = config.grid(&problem, Some(eps))?;
        let field = dpp_backward(&problem, &grid, k, &game_options(config))?;
        let setting = num(eps);
        table.push(vec!["eps".into(), setting.clone(), "n_steps".into(), grid.steps().to_string()]);
        table.push(vec!["eps".into(), setting, "lower_value".into(), num(field.root_value())]);
    }
    Ok(Report { table, checks, extra: None })
}
