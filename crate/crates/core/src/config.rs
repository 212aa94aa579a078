//! Simulation configuration and its key-value file format.
//!
//! Config files are TOML. Every key is optional and defaults to the baseline
//! calibration; unknown keys are rejected.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `assets` | 3 | number of risky assets |
//! | `agents` | 40 | total traders, must equal `fundamentalists + chartists` |
//! | `fundamentalists` | 20 | |
//! | `chartists` | 20 | |
//! | `risk_free` | 0.0012 | per-step risk-free rate |
//! | `risk_aversion` | 3 | CRRA coefficient, shared by all traders |
//! | `initial_cash` | 10 | |
//! | `initial_position` | 1 | shares of each asset held at t = 0 |
//! | `shares_outstanding` | 40 | per asset |
//! | `position_min`, `position_max` | -5, 10 | share bounds per asset |
//! | `weight_min`, `weight_max` | -0.95, 0.95 | wealth proportion bounds |
//! | `initial_dividend` | 0.002 | |
//! | `dividend_growth` | 0.001 | per-step growth rate |
//! | `dividend_growth_stdev` | 0.01 | per-step growth shock stdev |
//! | `initial_price`, `initial_fundamental` | 10, 10 | |
//! | `tau_min`, `tau_max` | 20, 80 | EMA period range (both kinds) |
//! | `chartist_tau` | unset | pins every chartist's EMA period |
//! | `mean_reversion_min`, `mean_reversion_max` | 0.5, 1 | fundamentalist d_f range |
//! | `correlation_min`, `correlation_max` | -0.2, 0.8 | expected correlation range |
//! | `initial_variance` | `dividend_growth_stdev²` | initial variance belief |
//! | `initial_trend` | `risk_free - (1 + dividend_growth) * initial_dividend / initial_price` | initial chartist trend; the default makes a chartist's initial expected excess return zero |
//! | `steps` | 1000 | |
//! | `seed` | 0 | master seed |
//! | `weight_clamp` | `"per_asset"` | or `"per_asset_and_total"` (also rescales the summed weight into the bounds) |
//! | `trend_source` | `"realized"` | or `"trial_price"` (trend includes the price being formed) |
//! | `residual_tolerance` | 1e-6 | clearing tolerance in shares |
//! | `max_outer_sweeps` | 200 | |
//! | `max_bisection_steps` | 100 | |
//! | `price_bracket_factor` | 10 | |
//! | `damping` | 1 | |

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clearing::{ClearingConfig, TrendSource};
use crate::error::{MarketError, Result};
use crate::model::{AssetParams, Bounds, WeightClamp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub assets: usize,
    pub agents: usize,
    pub fundamentalists: usize,
    pub chartists: usize,
    pub risk_free: f64,
    pub risk_aversion: f64,
    pub initial_cash: f64,
    pub initial_position: f64,
    pub shares_outstanding: u32,
    pub position_min: f64,
    pub position_max: f64,
    pub weight_min: f64,
    pub weight_max: f64,
    pub weight_clamp: WeightClamp,
    pub initial_dividend: f64,
    pub dividend_growth: f64,
    pub dividend_growth_stdev: f64,
    pub initial_price: f64,
    pub initial_fundamental: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub chartist_tau: Option<f64>,
    pub mean_reversion_min: f64,
    pub mean_reversion_max: f64,
    pub correlation_min: f64,
    pub correlation_max: f64,
    pub initial_variance: Option<f64>,
    pub initial_trend: Option<f64>,
    pub steps: usize,
    pub seed: u64,
    pub trend_source: TrendSource,
    pub residual_tolerance: f64,
    pub max_outer_sweeps: usize,
    pub max_bisection_steps: usize,
    pub price_bracket_factor: f64,
    pub damping: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let clearing = ClearingConfig::default();
        Self {
            assets: 3,
            agents: 40,
            fundamentalists: 20,
            chartists: 20,
            risk_free: 0.0012,
            risk_aversion: 3.0,
            initial_cash: 10.0,
            initial_position: 1.0,
            shares_outstanding: 40,
            position_min: -5.0,
            position_max: 10.0,
            weight_min: -0.95,
            weight_max: 0.95,
            weight_clamp: WeightClamp::default(),
            initial_dividend: 0.002,
            dividend_growth: 0.001,
            dividend_growth_stdev: 0.01,
            initial_price: 10.0,
            initial_fundamental: 10.0,
            tau_min: 20.0,
            tau_max: 80.0,
            chartist_tau: None,
            mean_reversion_min: 0.5,
            mean_reversion_max: 1.0,
            correlation_min: -0.2,
            correlation_max: 0.8,
            initial_variance: None,
            initial_trend: None,
            steps: 1000,
            seed: 0,
            trend_source: clearing.trend_source,
            residual_tolerance: clearing.residual_tolerance,
            max_outer_sweeps: clearing.max_outer_sweeps,
            max_bisection_steps: clearing.max_bisection_steps,
            price_bracket_factor: clearing.price_bracket_factor,
            damping: clearing.damping,
        }
    }
}

fn range_ok(key: &str, lo: f64, hi: f64) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo < hi {
        Ok(())
    } else {
        Err(MarketError::config(
            key,
            format!("range [{lo}, {hi}] is empty or non-finite"),
        ))
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(MarketError::config(key, format!("must be > 0, got {v}")))
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.assets == 0 {
            return Err(MarketError::config("assets", "must be >= 1"));
        }
        if self.agents != self.fundamentalists + self.chartists {
            return Err(MarketError::config(
                "agents",
                format!(
                    "{} != fundamentalists ({}) + chartists ({})",
                    self.agents, self.fundamentalists, self.chartists
                ),
            ));
        }
        if self.agents == 0 {
            return Err(MarketError::config("agents", "must be >= 1"));
        }
        if !(self.risk_free >= 0.0) {
            return Err(MarketError::config("risk_free", "must be >= 0"));
        }
        positive("risk_aversion", self.risk_aversion)?;
        if !(self.initial_cash >= 0.0) {
            return Err(MarketError::config("initial_cash", "must be >= 0"));
        }
        if self.shares_outstanding == 0 {
            return Err(MarketError::config("shares_outstanding", "must be >= 1"));
        }
        range_ok("position_min", self.position_min, self.position_max)?;
        if !(self.weight_min < 0.0 && self.weight_max > 0.0) {
            return Err(MarketError::config("weight_min", "weight bounds must straddle 0"));
        }
        positive("initial_dividend", self.initial_dividend)?;
        if !(self.dividend_growth >= 0.0) {
            return Err(MarketError::config("dividend_growth", "must be >= 0"));
        }
        if !(self.dividend_growth_stdev >= 0.0) {
            return Err(MarketError::config("dividend_growth_stdev", "must be >= 0"));
        }
        positive("initial_price", self.initial_price)?;
        positive("initial_fundamental", self.initial_fundamental)?;
        if !(self.tau_min >= 1.0) {
            return Err(MarketError::config("tau_min", "must be >= 1"));
        }
        range_ok("tau_min", self.tau_min, self.tau_max)?;
        if let Some(tau) = self.chartist_tau {
            if !(tau >= 1.0) {
                return Err(MarketError::config("chartist_tau", "must be >= 1"));
            }
        }
        if !(self.mean_reversion_min > 0.0) {
            return Err(MarketError::config("mean_reversion_min", "must be > 0"));
        }
        range_ok("mean_reversion_min", self.mean_reversion_min, self.mean_reversion_max)?;
        range_ok("correlation_min", self.correlation_min, self.correlation_max)?;
        if self.correlation_min < -1.0 || self.correlation_max > 1.0 {
            return Err(MarketError::config(
                "correlation_min",
                "correlations must lie in [-1, 1]",
            ));
        }
        if let Some(v) = self.initial_variance {
            if !(v >= 0.0) {
                return Err(MarketError::config("initial_variance", "must be >= 0"));
            }
        }
        if let Some(m) = self.initial_trend {
            if !m.is_finite() {
                return Err(MarketError::config("initial_trend", "must be finite"));
            }
        }
        if self.steps == 0 {
            return Err(MarketError::config("steps", "must be >= 1"));
        }
        self.clearing().validate()
    }

    /// Non-fatal findings, e.g. a growth rate for which the constant-growth
    /// fundamental value is undefined.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.dividend_growth > 0.0 && self.dividend_growth >= self.risk_free {
            out.push(format!(
                "dividend_growth ({}) >= risk_free ({}): the closed-form fundamental value is undefined",
                self.dividend_growth, self.risk_free
            ));
        }
        out
    }

    pub fn clearing(&self) -> ClearingConfig {
        ClearingConfig {
            residual_tolerance: self.residual_tolerance,
            max_outer_sweeps: self.max_outer_sweeps,
            max_bisection_steps: self.max_bisection_steps,
            price_bracket_factor: self.price_bracket_factor,
            damping: self.damping,
            trend_source: self.trend_source,
        }
    }

    pub fn asset_params(&self) -> AssetParams {
        AssetParams {
            growth_rate: self.dividend_growth,
            growth_stdev: self.dividend_growth_stdev,
            initial_dividend: self.initial_dividend,
            shares_outstanding: self.shares_outstanding,
            initial_price: self.initial_price,
            initial_fundamental: self.initial_fundamental,
        }
    }

    pub fn weight_bounds(&self) -> Bounds {
        Bounds::new(self.weight_min, self.weight_max)
    }

    pub fn position_bounds(&self) -> Bounds {
        Bounds::new(self.position_min, self.position_max)
    }

    pub fn initial_variance(&self) -> f64 {
        self.initial_variance
            .unwrap_or(self.dividend_growth_stdev * self.dividend_growth_stdev)
    }

    pub fn initial_trend(&self) -> f64 {
        self.initial_trend
            .unwrap_or(self.risk_free - (1.0 + self.dividend_growth) * self.initial_dividend / self.initial_price)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| MarketError::Parse {
            path: "<config>".into(),
            reason: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Reads and validates a config file. An empty file yields the defaults.
pub fn load_config(path: impl AsRef<Path>) -> Result<SimConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| MarketError::io(path, e))?;
    SimConfig::from_toml_str(&text).map_err(|e| match e {
        MarketError::Parse { reason, .. } => MarketError::Parse {
            path: path.display().to_string(),
            reason,
        },
        other => other,
    })
}
