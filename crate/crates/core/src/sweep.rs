//! Parameter sweep over fundamentalist mean-reversion intervals and chartist
//! EMA periods, replicated over derived seeds.
//!
//! Sweep spec files are TOML:
//!
//! ```toml
//! intervals = [[0.5, 0.6], [0.6, 0.7], [0.7, 0.8], [0.8, 0.9]]
//! tau_values = [1, 2, 3, 4, 5, 10, 20, 50, 80]
//! seeds_per_cell = 5
//! # master_seed = 0   # defaults to the base config's `seed`
//! ```

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{MarketError, Result};
use crate::simulator::run;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SweepFile {
    intervals: Vec<[f64; 2]>,
    tau_values: Vec<f64>,
    seeds_per_cell: usize,
    master_seed: Option<u64>,
}

impl Default for SweepFile {
    fn default() -> Self {
        Self {
            intervals: vec![[0.5, 0.6], [0.6, 0.7], [0.7, 0.8], [0.8, 0.9]],
            tau_values: vec![1.0, 2.0, 3.0, 4.0, 5.0, 10.0, 20.0, 50.0, 80.0],
            seeds_per_cell: 5,
            master_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Half-open `[low, high)` ranges for fundamentalist mean reversion.
    pub intervals: Vec<(f64, f64)>,
    /// EMA period pinned on every chartist.
    pub tau_values: Vec<f64>,
    pub seeds_per_cell: usize,
    pub master_seed: u64,
    pub base: SimConfig,
}

impl SweepSpec {
    /// The default grid on top of `base`, seeded from `base.seed`.
    pub fn new(base: SimConfig) -> Self {
        Self::from_file(SweepFile::default(), base)
    }

    fn from_file(file: SweepFile, base: SimConfig) -> Self {
        Self {
            intervals: file.intervals.iter().map(|[a, b]| (*a, *b)).collect(),
            tau_values: file.tau_values,
            seeds_per_cell: file.seeds_per_cell,
            master_seed: file.master_seed.unwrap_or(base.seed),
            base,
        }
    }

    pub fn from_toml_str(text: &str, base: SimConfig) -> Result<Self> {
        let file: SweepFile = toml::from_str(text).map_err(|e| MarketError::Parse {
            path: "<sweep spec>".into(),
            reason: e.message().to_string(),
        })?;
        let spec = Self::from_file(file, base);
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.intervals.is_empty() {
            return Err(MarketError::config("intervals", "must not be empty"));
        }
        for (k, (lo, hi)) in self.intervals.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && 0.0 < *lo && lo < hi) {
                return Err(MarketError::config(
                    "intervals",
                    format!("interval {k} [{lo}, {hi}) must satisfy 0 < low < high"),
                ));
            }
            if k > 0 && self.intervals[k - 1].1 > *lo {
                return Err(MarketError::config(
                    "intervals",
                    "intervals must be ascending and non-overlapping",
                ));
            }
        }
        if self.tau_values.is_empty() {
            return Err(MarketError::config("tau_values", "must not be empty"));
        }
        if let Some(t) = self.tau_values.iter().find(|t| !(**t >= 1.0 && t.is_finite())) {
            return Err(MarketError::config("tau_values", format!("{t} must be >= 1")));
        }
        if self.seeds_per_cell == 0 {
            return Err(MarketError::config("seeds_per_cell", "must be >= 1"));
        }
        self.base.validate()
    }

    pub fn cell_count(&self) -> usize {
        self.intervals.len() * self.tau_values.len()
    }

    /// Config for one cell: chartist EMA pinned, mean reversion restricted.
    pub fn cell_config(&self, interval: usize, tau: usize) -> SimConfig {
        let mut cfg = self.base.clone();
        let (lo, hi) = self.intervals[interval];
        cfg.mean_reversion_min = lo;
        cfg.mean_reversion_max = hi;
        cfg.chartist_tau = Some(self.tau_values[tau]);
        cfg
    }

    pub fn replicate_seed(&self, interval: usize, tau: usize, replicate: usize) -> u64 {
        replicate_seed(self.master_seed, interval, tau, replicate)
    }
}

/// Reads a sweep spec file; an empty file yields the default grid.
pub fn load_sweep_spec(path: impl AsRef<Path>, base: SimConfig) -> Result<SweepSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| MarketError::io(path, e))?;
    SweepSpec::from_toml_str(&text, base).map_err(|e| match e {
        MarketError::Parse { reason, .. } => MarketError::Parse {
            path: path.display().to_string(),
            reason,
        },
        other => other,
    })
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replicate `replicate` in cell (`interval`, `tau`): each index is
/// folded into the state through one splitmix64 round.
pub fn replicate_seed(master: u64, interval: usize, tau: usize, replicate: usize) -> u64 {
    [interval, tau, replicate]
        .iter()
        .fold(splitmix64(master), |h, &k| splitmix64(h ^ k as u64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub seed: u64,
    /// Terminal (fundamentalist, chartist) wealth shares, or the run error.
    pub shares: std::result::Result<(f64, f64), String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub interval: (f64, f64),
    pub tau: f64,
    pub replicates: Vec<ReplicateOutcome>,
}

impl CellResult {
    pub fn failed(&self) -> bool {
        self.replicates.iter().any(|r| r.shares.is_err())
    }

    pub fn errors(&self) -> impl Iterator<Item = (u64, &str)> {
        self.replicates
            .iter()
            .filter_map(|r| r.shares.as_ref().err().map(|e| (r.seed, e.as_str())))
    }

    fn successes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.replicates.iter().filter_map(|r| r.shares.as_ref().ok().copied())
    }

    /// Number of replicates that completed.
    pub fn seed_count(&self) -> usize {
        self.successes().count()
    }

    /// Mean terminal shares over completed replicates; NaN if none completed.
    pub fn mean_shares(&self) -> (f64, f64) {
        let n = self.seed_count() as f64;
        let (f, c) = self.successes().fold((0.0, 0.0), |(a, b), (f, c)| (a + f, b + c));
        (f / n, c / n)
    }

    /// Sample standard deviation of the chartist share (0 for one replicate).
    pub fn sd_chartist_share(&self) -> f64 {
        let n = self.seed_count();
        if n < 2 {
            return if n == 1 { 0.0 } else { f64::NAN };
        }
        let mean = self.mean_shares().1;
        let ss: f64 = self.successes().map(|(_, c)| (c - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Interval-major: cell `(i, j)` is at `i * tau_values.len() + j`.
    pub cells: Vec<CellResult>,
    pub n_taus: usize,
}

impl SweepResult {
    pub fn cell(&self, interval: usize, tau: usize) -> &CellResult {
        &self.cells[interval * self.n_taus + tau]
    }

    pub fn failed_runs(&self) -> usize {
        self.cells.iter().map(|c| c.errors().count()).sum()
    }
}

/// Terminal shares of one replicate, run in isolation.
pub fn run_replicate(spec: &SweepSpec, interval: usize, tau: usize, replicate: usize) -> ReplicateOutcome {
    let seed = spec.replicate_seed(interval, tau, replicate);
    let cfg = spec.cell_config(interval, tau);
    ReplicateOutcome {
        seed,
        shares: run(&cfg, seed)
            .map(|out| out.terminal_shares())
            .map_err(|e| e.to_string()),
    }
}

/// Runs every replicate of every cell on up to `workers` threads. Results do
/// not depend on the worker count. Failed runs are recorded, not raised.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<SweepResult> {
    spec.validate()?;
    let n_taus = spec.tau_values.len();
    let jobs: Vec<(usize, usize, usize)> = (0..spec.intervals.len())
        .flat_map(|i| (0..n_taus).flat_map(move |j| (0..spec.seeds_per_cell).map(move |k| (i, j, k))))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| MarketError::config("workers", e.to_string()))?;
    let outcomes: Vec<ReplicateOutcome> =
        pool.install(|| jobs.par_iter().map(|&(i, j, k)| run_replicate(spec, i, j, k)).collect());

    let mut outcomes = outcomes.into_iter();
    let mut cells = Vec::with_capacity(spec.cell_count());
    for i in 0..spec.intervals.len() {
        for j in 0..n_taus {
            cells.push(CellResult {
                interval: spec.intervals[i],
                tau: spec.tau_values[j],
                replicates: outcomes.by_ref().take(spec.seeds_per_cell).collect(),
            });
        }
    }
    Ok(SweepResult { cells, n_taus })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_grid() {
        let spec = SweepSpec::from_toml_str("", SimConfig::default()).unwrap();
        assert_eq!(spec.cell_count(), 36);
        assert_eq!(spec.cell_count() * spec.seeds_per_cell, 180);
        assert_eq!(spec.intervals[0], (0.5, 0.6));
        assert_eq!(spec.tau_values.len(), 9);
    }

    #[test]
    fn spec_validation() {
        let base = SimConfig::default();
        assert!(SweepSpec::from_toml_str("intervals = [[0.6, 0.7], [0.5, 0.6]]", base.clone()).is_err());
        assert!(SweepSpec::from_toml_str("tau_values = [0.5]", base.clone()).is_err());
        assert!(SweepSpec::from_toml_str("seeds_per_cell = 0", base.clone()).is_err());
        let err = SweepSpec::from_toml_str("taus = [1]", base).unwrap_err();
        assert!(err.to_string().contains("taus"), "{err}");
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let mut seen = std::collections::HashSet::new();
        for i in 0..4 {
            for j in 0..9 {
                for k in 0..5 {
                    assert!(seen.insert(replicate_seed(0, i, j, k)));
                }
            }
        }
        assert_eq!(replicate_seed(7, 1, 2, 3), replicate_seed(7, 1, 2, 3));
        assert_ne!(replicate_seed(7, 1, 2, 3), replicate_seed(8, 1, 2, 3));
    }

    #[test]
    fn cell_config_pins_parameters() {
        let spec = SweepSpec::new(SimConfig::default());
        let cfg = spec.cell_config(2, 4);
        assert_eq!(cfg.chartist_tau, Some(5.0));
        assert_eq!((cfg.mean_reversion_min, cfg.mean_reversion_max), (0.7, 0.8));
    }

    #[test]
    fn cell_summary_statistics() {
        let cell = CellResult {
            interval: (0.5, 0.6),
            tau: 1.0,
            replicates: vec![
                ReplicateOutcome {
                    seed: 1,
                    shares: Ok((0.6, 0.4)),
                },
                ReplicateOutcome {
                    seed: 2,
                    shares: Ok((0.8, 0.2)),
                },
                ReplicateOutcome {
                    seed: 3,
                    shares: Err("boom".into()),
                },
            ],
        };
        assert!(cell.failed());
        assert_eq!(cell.seed_count(), 2);
        let (f, c) = cell.mean_shares();
        assert!((f - 0.7).abs() < 1e-15 && (c - 0.3).abs() < 1e-15);
        assert!((cell.sd_chartist_share() - 0.02f64.sqrt()).abs() < 1e-15);
    }
}
