//! Time loop: dividend shocks, belief updates, clearing and wealth accounting.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::clearing::{clear, AgentInput, ClearingConfig, MarketSnapshot, PreparedAgent, TrendSource};
use crate::config::SimConfig;
use crate::error::{MarketError, Result};
use crate::model::{ema_variance_update, AgentKind, AgentProfile, AssetState, BeliefState, BANKRUPTCY_FLOOR};

/// Growth factors at or below zero are floored here.
pub const MIN_GROWTH_FACTOR: f64 = 1e-6;

/// ChaCha stream ids. One master seed, one stream per purpose.
const STREAM_AGENTS: u64 = 1;
const STREAM_DIVIDENDS: u64 = 2;

/// `D·(1 + φ + σ ε)`. The second value is true when the factor was floored.
pub fn dividend_step(dividend: f64, growth: f64, stdev: f64, shock: f64) -> (f64, bool) {
    growth_step(dividend, growth, stdev, shock)
}

/// `P*·(1 + φ + σ ε)`; must be fed the same shock as the same-step dividend.
pub fn fundamental_step(fundamental: f64, growth: f64, stdev: f64, shock: f64) -> (f64, bool) {
    growth_step(fundamental, growth, stdev, shock)
}

fn growth_step(level: f64, growth: f64, stdev: f64, shock: f64) -> (f64, bool) {
    let factor = 1.0 + growth + stdev * shock;
    if factor <= 0.0 {
        (level * MIN_GROWTH_FACTOR, true)
    } else {
        (level * factor, false)
    }
}

/// Wealth after one period for an agent holding `weights` since the last clearing.
///
/// Returns `(wealth, bankrupt)`; a bankrupt result is frozen at [`BANKRUPTCY_FLOOR`].
pub fn wealth_update(
    prev_wealth: f64,
    weights: &[f64],
    prices: &[f64],
    prev_prices: &[f64],
    dividends: &[f64],
    risk_free: f64,
) -> (f64, bool) {
    let w = crate::clearing::trial_wealth(prev_wealth, weights, prices, prev_prices, dividends, risk_free);
    if w <= BANKRUPTCY_FLOOR {
        (BANKRUPTCY_FLOOR, true)
    } else {
        (w, false)
    }
}

/// Group wealth shares `(fundamentalists, chartists)`.
pub fn wealth_shares(wealth: &[f64], kinds: &[AgentKind]) -> Result<(f64, f64)> {
    let (mut wf, mut wc) = (0.0, 0.0);
    for (w, k) in wealth.iter().zip(kinds) {
        match k {
            AgentKind::Fundamentalist => wf += w,
            AgentKind::Chartist => wc += w,
        }
    }
    let total = wf + wc;
    if !(total > 0.0) {
        return Err(MarketError::domain(format!("total wealth {total} is not positive")));
    }
    let share_f = wf / total;
    Ok((share_f, 1.0 - share_f))
}

/// Book-keeping for one trader.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentLedger {
    pub wealth: f64,
    /// Realized weights `z·P/W` from the last clearing.
    pub weights: Vec<f64>,
    pub positions: Vec<f64>,
    pub bankrupt: bool,
}

impl AgentLedger {
    pub fn cash(&self, prices: &[f64]) -> f64 {
        self.wealth - self.positions.iter().zip(prices).map(|(z, p)| z * p).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct Trader {
    pub profile: AgentProfile,
    pub beliefs: BeliefState,
    pub ledger: AgentLedger,
}

/// Everything recorded for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub prices: Vec<f64>,
    pub fundamentals: Vec<f64>,
    pub dividends: Vec<f64>,
    pub simple_returns: Vec<f64>,
    pub log_returns: Vec<f64>,
    pub wealth_f: f64,
    pub wealth_c: f64,
    pub share_f: f64,
    pub share_c: f64,
    pub clearing_sweeps: usize,
    pub clearing_residual: f64,
    /// Sum of cleared positions per asset.
    pub share_totals: Vec<f64>,
    /// Total wealth change this step.
    pub wealth_change: f64,
    /// Interest on aggregate cash plus aggregate capital gains and dividends.
    pub accounting_change: f64,
    /// Negative wealth forgiven when agents went bankrupt this step.
    pub written_off: f64,
    pub floored_shocks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub seed: u64,
    pub n_assets: usize,
    pub records: Vec<StepRecord>,
    pub kinds: Vec<AgentKind>,
    pub final_wealth: Vec<f64>,
}

impl RunOutput {
    /// Log-return series of asset `i`.
    pub fn log_returns(&self, i: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.log_returns[i]).collect()
    }

    pub fn simple_returns(&self, i: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.simple_returns[i]).collect()
    }

    pub fn terminal_shares(&self) -> (f64, f64) {
        let last = self.records.last().expect("runs have at least one step");
        (last.share_f, last.share_c)
    }
}

/// Draws each trader's fixed parameters from the agent stream.
fn draw_profiles(cfg: &SimConfig, seed: u64) -> Result<Vec<AgentProfile>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_AGENTS);
    let n = cfg.assets;
    let mut out = Vec::with_capacity(cfg.agents);
    for j in 0..cfg.agents {
        let kind = if j < cfg.fundamentalists {
            AgentKind::Fundamentalist
        } else {
            AgentKind::Chartist
        };
        // Every field is drawn for every agent so pinning one parameter
        // leaves the rest of the population unchanged.
        let tau_draw = rng.random_range(cfg.tau_min..cfg.tau_max);
        let d_f = rng.random_range(cfg.mean_reversion_min..cfg.mean_reversion_max);
        let mut rho = DMatrix::identity(n, n);
        for a in 0..n {
            for b in 0..a {
                let c = rng.random_range(cfg.correlation_min..cfg.correlation_max);
                rho[(a, b)] = c;
                rho[(b, a)] = c;
            }
        }
        let tau = match (kind, cfg.chartist_tau) {
            (AgentKind::Chartist, Some(t)) => t,
            _ => tau_draw,
        };
        out.push(
            AgentProfile::new(
                kind,
                cfg.risk_aversion,
                tau,
                d_f,
                rho,
                cfg.weight_bounds(),
                cfg.position_bounds(),
            )?
            .with_weight_clamp(cfg.weight_clamp),
        );
    }
    Ok(out)
}

/// A single market instance that can be stepped.
pub struct Simulation {
    cfg: SimConfig,
    clearing: ClearingConfig,
    seed: u64,
    step: usize,
    assets: Vec<AssetState>,
    growth: Vec<f64>,
    stdev: Vec<f64>,
    supply: Vec<f64>,
    traders: Vec<Trader>,
    shocks: ChaCha20Rng,
}

impl Simulation {
    pub fn new(cfg: &SimConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let params = cfg.asset_params();
        let n = cfg.assets;
        let profiles = draw_profiles(cfg, seed)?;
        let price = cfg.initial_price;
        let wealth0 = cfg.initial_cash + cfg.initial_position * price * n as f64;
        let traders = profiles
            .into_iter()
            .map(|profile| Trader {
                beliefs: BeliefState::new(n, cfg.initial_variance(), cfg.initial_trend(), cfg.risk_free),
                ledger: AgentLedger {
                    wealth: wealth0,
                    weights: vec![cfg.initial_position * price / wealth0; n],
                    positions: vec![cfg.initial_position; n],
                    bankrupt: false,
                },
                profile,
            })
            .collect();
        let mut shocks = ChaCha20Rng::seed_from_u64(seed);
        shocks.set_stream(STREAM_DIVIDENDS);
        Ok(Self {
            cfg: cfg.clone(),
            clearing: cfg.clearing(),
            seed,
            step: 0,
            assets: vec![AssetState::initial(&params); n],
            growth: vec![params.growth_rate; n],
            stdev: vec![params.growth_stdev; n],
            supply: vec![f64::from(params.shares_outstanding); n],
            traders,
            shocks,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn assets(&self) -> &[AssetState] {
        &self.assets
    }

    pub fn traders(&self) -> &[Trader] {
        &self.traders
    }

    pub fn kinds(&self) -> Vec<AgentKind> {
        self.traders.iter().map(|t| t.profile.kind).collect()
    }

    pub fn wealth(&self) -> Vec<f64> {
        self.traders.iter().map(|t| t.ledger.wealth).collect()
    }

    /// Advances one period and returns its record.
    pub fn step(&mut self) -> Result<StepRecord> {
        let n = self.assets.len();
        let t = self.step + 1;
        let r = self.cfg.risk_free;

        // (1) dividends and fundamentals share one shock per asset.
        let mut floored = 0;
        for i in 0..n {
            let eps: f64 = self.shocks.sample(StandardNormal);
            let a = &mut self.assets[i];
            let (d, fd) = dividend_step(a.dividend, self.growth[i], self.stdev[i], eps);
            let (f, ff) = fundamental_step(a.fundamental, self.growth[i], self.stdev[i], eps);
            a.dividend = d;
            a.fundamental = f;
            floored += usize::from(fd || ff);
        }

        let prev_prices: Vec<f64> = self.assets.iter().map(|a| a.price).collect();
        let fundamentals: Vec<f64> = self.assets.iter().map(|a| a.fundamental).collect();
        let dividends: Vec<f64> = self.assets.iter().map(|a| a.dividend).collect();

        // (2) realized-price trend update when the trend is not tied to the trial price.
        if self.clearing.trend_source == TrendSource::Realized && t >= 2 {
            for tr in self
                .traders
                .iter_mut()
                .filter(|tr| tr.profile.kind == AgentKind::Chartist)
            {
                for i in 0..n {
                    let a = &self.assets[i];
                    tr.beliefs.trends[i] = crate::model::chartist_trend_update(
                        tr.beliefs.trends[i],
                        a.price,
                        a.prev_price,
                        tr.profile.ema_period,
                    )?;
                }
            }
        }

        let prev_wealth: f64 = self.traders.iter().map(|t| t.ledger.wealth).sum();
        let prev_cash: f64 = self.traders.iter().map(|t| t.ledger.cash(&prev_prices)).sum();
        let prev_totals: Vec<f64> = (0..n)
            .map(|i| self.traders.iter().map(|t| t.ledger.positions[i]).sum())
            .collect();

        // (3) clearing.
        let result = {
            let market = MarketSnapshot {
                fundamentals: &fundamentals,
                dividends: &dividends,
                growth_rates: &self.growth,
                shares_outstanding: &self.supply,
                risk_free: r,
            };
            let prepared = self
                .traders
                .iter()
                .map(|tr| {
                    PreparedAgent::new(AgentInput {
                        profile: &tr.profile,
                        beliefs: &tr.beliefs,
                        wealth: tr.ledger.wealth,
                        weights: &tr.ledger.weights,
                        bankrupt: tr.ledger.bankrupt,
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map_err(|e| at_step(e, t))?;
            clear(&prev_prices, &prepared, &market, &self.clearing).map_err(|e| at_step(e, t))?
        };
        let prices = result.prices.clone();
        let realized: Vec<f64> = (0..n)
            .map(|i| (prices[i] + dividends[i]) / prev_prices[i] - 1.0)
            .collect();

        let mut written_off = 0.0;
        for (j, tr) in self.traders.iter_mut().enumerate() {
            let demand = &result.demands[j];
            for i in 0..n {
                let err = tr.beliefs.last_expected[i] - realized[i];
                tr.beliefs.variances[i] = ema_variance_update(tr.beliefs.variances[i], err, tr.profile.ema_period);
            }
            tr.beliefs.last_expected.copy_from_slice(&demand.expected_returns);
            if tr.profile.kind == AgentKind::Chartist && self.clearing.trend_source == TrendSource::TrialPrice {
                tr.beliefs.trends.copy_from_slice(&demand.trends);
            }
            if tr.ledger.bankrupt {
                continue;
            }
            if demand.wealth <= BANKRUPTCY_FLOOR {
                written_off += BANKRUPTCY_FLOOR - demand.wealth;
                tr.ledger = AgentLedger {
                    wealth: BANKRUPTCY_FLOOR,
                    weights: vec![0.0; n],
                    positions: vec![0.0; n],
                    bankrupt: true,
                };
            } else {
                tr.ledger.wealth = demand.wealth;
                tr.ledger.positions.copy_from_slice(&demand.positions);
                tr.ledger.weights.copy_from_slice(&result.realized_weights[j]);
            }
        }

        for (i, a) in self.assets.iter_mut().enumerate() {
            a.prev_price = a.price;
            a.price = prices[i];
        }
        self.step = t;

        // (4) record.
        let kinds = self.kinds();
        let wealth = self.wealth();
        let (share_f, share_c) = wealth_shares(&wealth, &kinds).map_err(|e| at_step(e, t))?;
        let (mut wealth_f, mut wealth_c) = (0.0, 0.0);
        for (w, k) in wealth.iter().zip(&kinds) {
            match k {
                AgentKind::Fundamentalist => wealth_f += w,
                AgentKind::Chartist => wealth_c += w,
            }
        }
        let total: f64 = wealth.iter().sum();
        let accounting_change = r * prev_cash
            + (0..n)
                .map(|i| prev_totals[i] * (prices[i] - prev_prices[i] + dividends[i]))
                .sum::<f64>();
        let share_totals = (0..n)
            .map(|i| self.traders.iter().map(|t| t.ledger.positions[i]).sum())
            .collect();

        Ok(StepRecord {
            step: t,
            simple_returns: (0..n).map(|i| prices[i] / prev_prices[i] - 1.0).collect(),
            log_returns: (0..n).map(|i| (prices[i] / prev_prices[i]).ln()).collect(),
            prices,
            fundamentals,
            dividends,
            wealth_f,
            wealth_c,
            share_f,
            share_c,
            clearing_sweeps: result.sweeps,
            clearing_residual: result.max_residual,
            share_totals,
            wealth_change: total - prev_wealth,
            accounting_change,
            written_off,
            floored_shocks: floored,
        })
    }

    /// Runs the remaining configured steps.
    pub fn run_to_end(mut self) -> Result<RunOutput> {
        let mut records = Vec::with_capacity(self.cfg.steps);
        while self.step < self.cfg.steps {
            records.push(self.step()?);
        }
        Ok(RunOutput {
            seed: self.seed,
            n_assets: self.assets.len(),
            kinds: self.kinds(),
            final_wealth: self.wealth(),
            records,
        })
    }
}

fn at_step(err: MarketError, t: usize) -> MarketError {
    match err {
        MarketError::Clearing {
            reason,
            prices,
            residuals,
            ..
        } => MarketError::Clearing {
            step: t,
            reason,
            prices,
            residuals,
        },
        other => MarketError::Clearing {
            step: t,
            reason: other.to_string(),
            prices: Vec::new(),
            residuals: Vec::new(),
        },
    }
}

/// Runs one full simulation.
pub fn run(cfg: &SimConfig, seed: u64) -> Result<RunOutput> {
    Simulation::new(cfg, seed)?.run_to_end()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dividend_examples() {
        assert_relative_eq!(dividend_step(0.002, 0.001, 0.0, 3.0).0, 0.002 * 1.001, epsilon = 1e-18);
        assert_relative_eq!(dividend_step(0.002, 0.001, 0.01, 1.0).0, 0.002022, epsilon = 1e-15);
        let (d, floored) = dividend_step(0.002, 0.001, 0.01, -200.0);
        assert!(floored);
        assert_eq!(d, 0.002 * MIN_GROWTH_FACTOR);
    }

    #[test]
    fn fundamental_examples() {
        assert_relative_eq!(fundamental_step(10.0, 0.001, 0.0, -1.0).0, 10.01, epsilon = 1e-12);
        assert_relative_eq!(fundamental_step(10.0, 0.001, 0.01, -2.0).0, 9.81, epsilon = 1e-12);
    }

    #[test]
    fn dividend_growth_has_expected_mean() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let n = 200_000;
        let mean = (0..n)
            .map(|_| {
                let e: f64 = rng.sample(StandardNormal);
                dividend_step(1.0, 0.001, 0.01, e).0
            })
            .sum::<f64>()
            / n as f64;
        // Standard error 0.01/sqrt(n) ≈ 2.2e-5.
        assert!((mean - 1.001).abs() < 1e-4, "{mean}");
    }

    #[test]
    fn wealth_examples() {
        assert_relative_eq!(
            wealth_update(40.0, &[0.0], &[11.0], &[10.0], &[0.0], 0.0012).0,
            40.0 * 1.0012,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            wealth_update(40.0, &[0.5], &[11.0], &[10.0], &[0.0], 0.0012).0,
            42.024,
            epsilon = 1e-12
        );
        // Gross risky return equal to 1 + r makes weights irrelevant.
        for w in [-0.9, 0.3, 0.95] {
            let (v, _) = wealth_update(40.0, &[w, 0.0], &[10.0, 5.0], &[10.0, 5.0], &[0.012, 0.006], 0.0012);
            assert_relative_eq!(v, 40.0 * 1.0012, epsilon = 1e-12);
        }
        let (v, bankrupt) = wealth_update(40.0, &[-5.0], &[30.0], &[10.0], &[0.0], 0.0);
        assert!(bankrupt);
        assert_eq!(v, BANKRUPTCY_FLOOR);
    }

    #[test]
    fn share_examples() {
        let kinds = [AgentKind::Fundamentalist, AgentKind::Chartist];
        assert_eq!(wealth_shares(&[40.0, 40.0], &kinds).unwrap(), (0.5, 0.5));
        let (f, c) = wealth_shares(&[50.0, BANKRUPTCY_FLOOR], &kinds).unwrap();
        assert!(c < 1e-10);
        assert!((f + c - 1.0).abs() < 1e-12);
        assert!(wealth_shares(&[0.0, 0.0], &kinds).is_err());
    }

    #[test]
    fn initial_population_is_symmetric() {
        let sim = Simulation::new(&SimConfig::default(), 0).unwrap();
        let (f, c) = wealth_shares(&sim.wealth(), &sim.kinds()).unwrap();
        assert_eq!((f, c), (0.5, 0.5));
        assert!(sim.traders().iter().all(|t| (t.ledger.wealth - 40.0).abs() < 1e-12));
        assert!(sim.traders()[..20]
            .iter()
            .all(|t| t.profile.kind == AgentKind::Fundamentalist));
    }

    #[test]
    fn pinned_tau_leaves_other_draws_unchanged() {
        let base = Simulation::new(&SimConfig::default(), 3).unwrap();
        let pinned_cfg = SimConfig {
            chartist_tau: Some(5.0),
            ..SimConfig::default()
        };
        let pinned = Simulation::new(&pinned_cfg, 3).unwrap();
        for (a, b) in base.traders().iter().zip(pinned.traders()) {
            assert_eq!(a.profile.correlation(), b.profile.correlation());
            assert_eq!(a.profile.mean_reversion, b.profile.mean_reversion);
            match a.profile.kind {
                AgentKind::Fundamentalist => assert_eq!(a.profile.ema_period, b.profile.ema_period),
                AgentKind::Chartist => assert_eq!(b.profile.ema_period, 5.0),
            }
        }
    }
}
