//! Plain comma-separated output files. Numbers carry 10 significant digits
//! and every file is a pure function of its inputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{MarketError, Result};
use crate::simulator::RunOutput;
use crate::stats::{stylized_report, StylizedReport, ABS_VERDICT_LAGS, RAW_VERDICT_LAGS};
use crate::sweep::SweepResult;

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const STYLIZED_FILE: &str = "stylized.csv";
pub const ACF_FILE: &str = "acf.csv";
pub const SWEEP_SUMMARY_FILE: &str = "sweep_summary.csv";
pub const SWEEP_RUNS_FILE: &str = "sweep_runs.csv";

pub const TIMESERIES_HEADER: &str =
    "step,asset,price,fundamental,dividend,log_return,w_f,w_c,clearing_iters,clearing_residual";
pub const SWEEP_SUMMARY_HEADER: &str = "df_low,df_high,tau_c,seed_count,mean_w_f,mean_w_c,sd_w_c";
pub const SWEEP_RUNS_HEADER: &str = "df_low,df_high,tau_c,replicate,seed,w_f,w_c,error";
pub const STYLIZED_HEADER: &str = "series,n,mean,median,sd,kurtosis,skewness,hurst_abs,hurst_stderr,\
raw_acf_inside,abs_acf_above,fat_tails,no_raw_memory,volatility_clustering,error";
pub const ACF_HEADER: &str = "series,kind,lag,acf,band";

/// Formats `x` with 10 significant digits, trailing zeros trimmed.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&exp) {
        return format!("{x:.9e}");
    }
    let decimals = (9 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// Quotes a field if it contains a separator, quote or newline.
fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| MarketError::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| MarketError::io(&path, e))?;
    Ok(path)
}

pub fn timeseries_csv(run: &RunOutput) -> String {
    let mut out = String::with_capacity(96 * run.records.len() * run.n_assets);
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for r in &run.records {
        for i in 0..run.n_assets {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.step,
                i,
                fmt_num(r.prices[i]),
                fmt_num(r.fundamentals[i]),
                fmt_num(r.dividends[i]),
                fmt_num(r.log_returns[i]),
                fmt_num(r.share_f),
                fmt_num(r.share_c),
                r.clearing_sweeps,
                fmt_num(r.clearing_residual),
            );
        }
    }
    out
}

/// Stylized-fact reports keyed by series label.
pub type LabelledReports = Vec<(String, Result<StylizedReport>)>;

/// One report per asset of a run, on log returns.
pub fn run_reports(run: &RunOutput) -> LabelledReports {
    (0..run.n_assets)
        .map(|i| (format!("asset{i}"), stylized_report(&run.log_returns(i))))
        .collect()
}

pub fn stylized_csv(reports: &LabelledReports) -> String {
    let mut out = String::new();
    out.push_str(STYLIZED_HEADER);
    out.push('\n');
    for (label, rep) in reports {
        match rep {
            Ok(r) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},",
                    csv_text(label),
                    r.stats.n,
                    fmt_num(r.stats.mean),
                    fmt_num(r.stats.median),
                    fmt_num(r.stats.sd),
                    fmt_opt(r.stats.kurtosis),
                    fmt_opt(r.stats.skewness),
                    fmt_num(r.hurst_abs.hurst),
                    fmt_num(r.hurst_abs.slope_stderr),
                    fmt_num(r.acf_raw.fraction_inside(RAW_VERDICT_LAGS)),
                    fmt_num(r.acf_abs.fraction_above(ABS_VERDICT_LAGS)),
                    r.fat_tails,
                    r.no_raw_memory,
                    r.volatility_clustering,
                );
            }
            Err(e) => {
                let _ = writeln!(
                    out,
                    "{}{},{}",
                    csv_text(label),
                    ",".repeat(13),
                    csv_text(&e.to_string())
                );
            }
        }
    }
    out
}

pub fn acf_csv(reports: &LabelledReports) -> String {
    let mut out = String::new();
    out.push_str(ACF_HEADER);
    out.push('\n');
    for (label, rep) in reports {
        let Ok(r) = rep else { continue };
        for (kind, profile) in [("raw", &r.acf_raw), ("abs", &r.acf_abs)] {
            for (lag, v) in profile.values.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{kind},{lag},{},{}",
                    csv_text(label),
                    fmt_num(*v),
                    fmt_num(profile.band)
                );
            }
        }
    }
    out
}

pub fn sweep_summary_csv(result: &SweepResult) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_SUMMARY_HEADER);
    out.push('\n');
    for c in &result.cells {
        let (f, w) = c.mean_shares();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_num(c.interval.0),
            fmt_num(c.interval.1),
            fmt_num(c.tau),
            c.seed_count(),
            fmt_num(f),
            fmt_num(w),
            fmt_num(c.sd_chartist_share()),
        );
    }
    out
}

pub fn sweep_runs_csv(result: &SweepResult) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_RUNS_HEADER);
    out.push('\n');
    for c in &result.cells {
        for (k, r) in c.replicates.iter().enumerate() {
            let prefix = format!(
                "{},{},{},{k},{}",
                fmt_num(c.interval.0),
                fmt_num(c.interval.1),
                fmt_num(c.tau),
                r.seed
            );
            let _ = match &r.shares {
                Ok((f, w)) => writeln!(out, "{prefix},{},{},", fmt_num(*f), fmt_num(*w)),
                Err(e) => writeln!(out, "{prefix},,,{}", csv_text(e)),
            };
        }
    }
    out
}

/// What to serialize.
pub enum Emit<'a> {
    Run {
        run: &'a RunOutput,
        reports: &'a LabelledReports,
    },
    Sweep(&'a SweepResult),
    Reports(&'a LabelledReports),
}

/// Writes the files for `item` into `out_dir` and returns their paths.
pub fn emit_outputs(item: Emit<'_>, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    let files: Vec<(&str, String)> = match item {
        Emit::Run { run, reports } => vec![
            (TIMESERIES_FILE, timeseries_csv(run)),
            (STYLIZED_FILE, stylized_csv(reports)),
            (ACF_FILE, acf_csv(reports)),
        ],
        Emit::Sweep(result) => vec![
            (SWEEP_SUMMARY_FILE, sweep_summary_csv(result)),
            (SWEEP_RUNS_FILE, sweep_runs_csv(result)),
        ],
        Emit::Reports(reports) => vec![(STYLIZED_FILE, stylized_csv(reports)), (ACF_FILE, acf_csv(reports))],
    };
    files
        .into_iter()
        .map(|(name, body)| write_file(dir, name, &body))
        .collect()
}

/// Reads back the per-asset log returns from a run's time-series file.
pub fn read_timeseries_returns(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| MarketError::io(path, e))?;
    let parse_err = |reason: String| MarketError::Parse {
        path: path.display().to_string(),
        reason,
    };
    let mut lines = text.lines();
    if lines.next() != Some(TIMESERIES_HEADER) {
        return Err(parse_err("missing time-series header".into()));
    }
    let mut series: Vec<Vec<f64>> = Vec::new();
    for (k, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(parse_err(format!("line {}: expected 10 fields", k + 2)));
        }
        let asset: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(format!("line {}: bad asset index", k + 2)))?;
        let r: f64 = fields[5]
            .parse()
            .map_err(|_| parse_err(format!("line {}: bad log return", k + 2)))?;
        if asset >= series.len() {
            series.resize_with(asset + 1, Vec::new);
        }
        series[asset].push(r);
    }
    if series.is_empty() {
        return Err(parse_err("no data rows".into()));
    }
    Ok(series)
}
