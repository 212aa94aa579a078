use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hetmarket::config::{load_config, SimConfig};
use hetmarket::ingest::ingest_reference_series;
use hetmarket::output::{
    emit_outputs, read_timeseries_returns, run_reports, Emit, LabelledReports, TIMESERIES_FILE, TIMESERIES_HEADER,
};
use hetmarket::simulator::run;
use hetmarket::stats::stylized_report;
use hetmarket::sweep::{load_sweep_spec, run_sweep, SweepSpec};
use hetmarket::{MarketError, Result};

#[derive(Parser)]
#[command(name = "hetmarket", version, about = "Heterogeneous-agent market simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its time series and stylized-facts report.
    Run {
        /// TOML config; omitted keys take baseline values.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed; overrides the config's `seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the mean-reversion x chartist-EMA grid and write share summaries.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// TOML sweep spec; omitted keys take the default grid.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: available cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Stylized-facts report of a series: a run's timeseries.csv, a
    /// (date, close) price file, or one return per line.
    Stats {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reports for a simulated run next to a reference (date, close) series.
    Compare {
        /// Output directory of a previous `run`.
        #[arg(long)]
        sim_run: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn base_config(path: Option<&Path>) -> Result<SimConfig> {
    let cfg = match path {
        Some(p) => load_config(p)?,
        None => SimConfig::default(),
    };
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn print_reports(reports: &LabelledReports) {
    println!(
        "{:<12} {:>6} {:>11} {:>10} {:>9} {:>9} {:>7}  tails memory clustering",
        "series", "n", "mean", "sd", "kurtosis", "skewness", "H|r|"
    );
    for (label, rep) in reports {
        match rep {
            Ok(r) => println!(
                "{:<12} {:>6} {:>11.3e} {:>10.5} {:>9.3} {:>9.3} {:>7.3}  {:<5} {:<6} {}",
                label,
                r.stats.n,
                r.stats.mean,
                r.stats.sd,
                r.stats.kurtosis.unwrap_or(f64::NAN),
                r.stats.skewness.unwrap_or(f64::NAN),
                r.hurst_abs.hurst,
                r.fat_tails,
                r.no_raw_memory,
                r.volatility_clustering
            ),
            Err(e) => println!("{label:<12} error: {e}"),
        }
    }
}

/// Reads a series file in whichever supported layout it uses.
fn read_series(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let text = std::fs::read_to_string(path).map_err(|e| MarketError::io(path, e))?;
    if text.lines().next() == Some(TIMESERIES_HEADER) {
        let series = read_timeseries_returns(path)?;
        return Ok(series
            .into_iter()
            .enumerate()
            .map(|(i, s)| (format!("asset{i}"), s))
            .collect());
    }
    let single: Option<Vec<f64>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.parse::<f64>().ok())
        .collect();
    match single {
        Some(values) => Ok(vec![("series".into(), values)]),
        None => Ok(vec![("reference".into(), ingest_reference_series(path)?)]),
    }
}

fn report_paths(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

/// Returns whether every requested run succeeded.
fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Run { config, seed, out } => {
            let cfg = base_config(config.as_deref())?;
            let seed = seed.unwrap_or(cfg.seed);
            let output = run(&cfg, seed)?;
            let reports = run_reports(&output);
            report_paths(&emit_outputs(
                Emit::Run {
                    run: &output,
                    reports: &reports,
                },
                &out,
            )?);
            let (f, c) = output.terminal_shares();
            println!(
                "seed {seed}: {} steps, terminal shares w_f={f:.4} w_c={c:.4}",
                output.records.len()
            );
            print_reports(&reports);
            Ok(true)
        }
        Command::Sweep {
            config,
            spec,
            out,
            workers,
        } => {
            let cfg = base_config(config.as_deref())?;
            let spec = match spec {
                Some(p) => load_sweep_spec(p, cfg)?,
                None => SweepSpec::new(cfg),
            };
            let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let result = run_sweep(&spec, workers)?;
            report_paths(&emit_outputs(Emit::Sweep(&result), &out)?);
            for cell in &result.cells {
                for (seed, err) in cell.errors() {
                    eprintln!(
                        "failed: d_f [{}, {}) tau {} seed {seed}: {err}",
                        cell.interval.0, cell.interval.1, cell.tau
                    );
                }
            }
            let failed = result.failed_runs();
            let total = spec.cell_count() * spec.seeds_per_cell;
            println!("{} cells, {} runs, {} failed", result.cells.len(), total, failed);
            Ok(failed == 0)
        }
        Command::Stats { input, out } => {
            let reports: LabelledReports = read_series(&input)?
                .into_iter()
                .map(|(label, s)| {
                    let rep = stylized_report(&s);
                    (label, rep)
                })
                .collect();
            report_paths(&emit_outputs(Emit::Reports(&reports), &out)?);
            print_reports(&reports);
            Ok(true)
        }
        Command::Compare {
            sim_run,
            reference,
            out,
        } => {
            let sim = read_timeseries_returns(sim_run.join(TIMESERIES_FILE))?;
            let mut reports: LabelledReports = sim
                .iter()
                .enumerate()
                .map(|(i, s)| (format!("asset{i}"), stylized_report(s)))
                .collect();
            let reference_returns = ingest_reference_series(&reference)?;
            reports.push(("reference".into(), stylized_report(&reference_returns)));
            report_paths(&emit_outputs(Emit::Reports(&reports), &out)?);
            print_reports(&reports);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
