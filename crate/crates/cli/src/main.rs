use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use snell_cli::config::{Backend, ExperimentConfig};
use snell_cli::harness::{self, Report, Table};
use snell_cli::record::{verdict_path, write_csv, Verdict};

#[derive(Parser)]
#[command(name = "snell", version, about = "Impulse control versus stopping: game and BSDE solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Registered fixture; overrides the config.
    #[arg(long)]
    fixture: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    backend: Option<Backend>,
    /// Output CSV; defaults to the config's `output`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Verdict JSON; defaults to `<out>.verdict.json` when writing a file.
    #[arg(long)]
    verdict: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate uncontrolled paths.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        paths: usize,
        /// Also write every breakpoint and jump to this CSV.
        #[arg(long)]
        dump_paths: Option<PathBuf>,
    },
    /// Lower and upper values of the discretized game.
    SolveGame {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eps: Option<f64>,
        /// Intervention budget; overrides the config's budgets.
        #[arg(long, allow_negative_numbers = true)]
        k: Option<i64>,
    },
    /// Penalized BSDE at one level (`--n 8`) or across the config's levels (`--n sweep`).
    SolveBsde {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "sweep")]
        n: String,
    },
    /// Saddle-point checks of the randomized problem.
    VerifySaddle {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 8.0)]
        n: f64,
        #[arg(long)]
        probes: Option<usize>,
    },
    /// Game values, penalized values and saddle checks in one table.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Refinement sweeps over budgets, penalty levels and grid steps.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(f) = &common.fixture {
        config.fixture = f.clone();
    }
    if let Some(s) = common.seed {
        config.seed = s;
    }
    if let Some(b) = common.backend {
        config.backend = b;
    }
    if let Some(o) = &common.out {
        config.output = Some(o.clone());
    }
    config.validate()?;
    Ok(config)
}

fn emit(table: &Table, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => write_csv(path, &table.header, &table.rows),
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout().lock());
            w.write_record(&table.header)?;
            for r in &table.rows {
                w.write_record(r)?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn finish(name: &str, common: &Common, config: &ExperimentConfig, report: &Report) -> Result<bool> {
    emit(&report.table, config.output.as_ref())?;
    let verdict = Verdict::new(name, config, report.checks.clone());
    let path = common.verdict.clone().or_else(|| config.output.as_deref().map(verdict_path));
    if let Some(path) = path {
        verdict.write(&path)?;
    }
    let mut err = std::io::stderr().lock();
    for c in &verdict.checks {
        let mark = if c.passed { "ok" } else { "FAIL" };
        writeln!(err, "{mark:>4} {} value={} tolerance={}", c.name, c.value, c.tolerance)?;
    }
    Ok(verdict.passed)
}

fn run(cli: Cli) -> Result<bool> {
    if let Ok(threads) = std::env::var("SNELL_THREADS") {
        let threads: usize = threads.parse().context("SNELL_THREADS must be a positive integer")?;
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    match cli.command {
        Command::Simulate { common, paths, dump_paths } => {
            let config = load(&common)?;
            let report = harness::simulate(&config, paths, dump_paths.is_some())?;
            if let (Some(path), Some(dump)) = (&dump_paths, &report.extra) {
                write_csv(path, &dump.header, &dump.rows)?;
            }
            finish("simulate", &common, &config, &report)
        }
        Command::SolveGame { common, eps, k } => {
            let mut config = load(&common)?;
            if let Some(k) = k {
                config.budgets = vec![k];
                config.validate()?;
            }
            let report = harness::solve_game(&config, eps, None)?;
            finish("solve-game", &common, &config, &report)
        }
        Command::SolveBsde { common, n } => {
            let config = load(&common)?;
            let level = match n.as_str() {
                "sweep" => None,
                v => Some(v.parse::<f64>().with_context(|| format!("--n expects a number or 'sweep', got '{v}'"))?),
            };
            let report = harness::solve_bsde(&config, level)?;
            finish("solve-bsde", &common, &config, &report)
        }
        Command::VerifySaddle { common, n, probes } => {
            let config = load(&common)?;
            let report = harness::saddle(&config, n, probes)?;
            finish("verify-saddle", &common, &config, &report)
        }
        Command::Compare { common } => {
            let config = load(&common)?;
            let report = harness::compare(&config)?;
            finish("compare", &common, &config, &report)
        }
        Command::Sweep { common } => {
            let config = load(&common)?;
            let report = harness::sweep(&config)?;
            finish("sweep", &common, &config, &report)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
