//! Walrasian clearing: finds the price vector at which aggregate desired
//! holdings equal shares outstanding.
//!
//! Demand and wealth are solved jointly: each agent's wealth is re-marked at
//! the trial price before its demand is computed. The solver runs
//! Gauss-Seidel sweeps over assets. Each asset is solved with the other
//! prices held fixed: a bracket is grown from the current iterate until the
//! excess demand changes sign, then narrowed by bisection interleaved with
//! Illinois false-position steps.

use serde::{Deserialize, Serialize};

use crate::error::{MarketError, Result};
use crate::model::{
    build_covariance, chartist_expected_return, clamp_weights, desired_positions_into, ema_weight,
    fundamentalist_expected_return, AgentKind, AgentProfile, BeliefState, CovarianceFactor, BANKRUPTCY_FLOOR,
};

/// Which price change feeds the chartist trend used in demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrendSource {
    /// The trend includes the change from the previous price to the trial price.
    TrialPrice,
    /// The trend is built from realized prices only and is fixed during clearing.
    #[default]
    Realized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearingConfig {
    /// Maximum absolute excess demand (shares) accepted as cleared.
    pub residual_tolerance: f64,
    pub max_outer_sweeps: usize,
    pub max_bisection_steps: usize,
    /// Initial bracket is `[p/factor, p*factor]` around the previous price.
    pub price_bracket_factor: f64,
    pub damping: f64,
    pub trend_source: TrendSource,
}

impl Default for ClearingConfig {
    fn default() -> Self {
        Self {
            residual_tolerance: 1e-6,
            max_outer_sweeps: 200,
            max_bisection_steps: 100,
            price_bracket_factor: 10.0,
            damping: 1.0,
            trend_source: TrendSource::Realized,
        }
    }
}

impl ClearingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tolerance > 0.0) {
            return Err(MarketError::config("residual_tolerance", "must be > 0"));
        }
        if !(self.price_bracket_factor > 1.0) {
            return Err(MarketError::config("price_bracket_factor", "must be > 1"));
        }
        if self.max_outer_sweeps == 0 {
            return Err(MarketError::config("max_outer_sweeps", "must be >= 1"));
        }
        if self.max_bisection_steps == 0 {
            return Err(MarketError::config("max_bisection_steps", "must be >= 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(MarketError::config("damping", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Market data that stays fixed while prices are searched.
#[derive(Debug, Clone, Copy)]
pub struct MarketSnapshot<'a> {
    pub fundamentals: &'a [f64],
    pub dividends: &'a [f64],
    pub growth_rates: &'a [f64],
    pub shares_outstanding: &'a [f64],
    pub risk_free: f64,
}

impl MarketSnapshot<'_> {
    pub fn n_assets(&self) -> usize {
        self.shares_outstanding.len()
    }
}

/// What an agent brings into a clearing round.
#[derive(Debug, Clone, Copy)]
pub struct AgentInput<'a> {
    pub profile: &'a AgentProfile,
    pub beliefs: &'a BeliefState,
    /// Wealth after the previous clearing.
    pub wealth: f64,
    /// Realized weights after the previous clearing.
    pub weights: &'a [f64],
    pub bankrupt: bool,
}

/// An agent with its covariance factor cached for the round.
#[derive(Debug, Clone)]
pub struct PreparedAgent<'a> {
    pub input: AgentInput<'a>,
    /// `Σ⁻¹ / λ`, row-major.
    precision: Vec<f64>,
    trend_weight: f64,
}

impl<'a> PreparedAgent<'a> {
    pub fn new(input: AgentInput<'a>) -> Result<Self> {
        let cov = build_covariance(&input.beliefs.stdevs(), input.profile.correlation())?;
        let inv = CovarianceFactor::new(&cov)?.inverse();
        let lambda = input.profile.risk_aversion;
        let n = inv.nrows();
        let precision = (0..n * n).map(|k| inv[(k / n, k % n)] / lambda).collect();
        Ok(Self {
            input,
            precision,
            trend_weight: ema_weight(input.profile.ema_period),
        })
    }
}

/// Evaluation of one agent at a trial price vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentDemand {
    pub wealth: f64,
    pub expected_returns: Vec<f64>,
    /// Chartist trends as seen at the trial price; empty for fundamentalists.
    pub trends: Vec<f64>,
    pub desired_weights: Vec<f64>,
    pub positions: Vec<f64>,
}

/// Re-marks wealth at `prices` given the previous wealth and weights.
pub fn trial_wealth(
    wealth: f64,
    weights: &[f64],
    prices: &[f64],
    prev_prices: &[f64],
    dividends: &[f64],
    risk_free: f64,
) -> f64 {
    let invested: f64 = weights.iter().sum();
    let risky: f64 = weights
        .iter()
        .zip(prices)
        .zip(prev_prices)
        .zip(dividends)
        .map(|(((w, p), p0), d)| w * (p + d) / p0)
        .sum();
    (1.0 - invested) * wealth * (1.0 + risk_free) + wealth * risky
}

/// Desired holdings of one agent at `trial_prices`.
pub fn agent_demand_at(
    trial_prices: &[f64],
    prev_prices: &[f64],
    agent: &PreparedAgent<'_>,
    market: &MarketSnapshot<'_>,
    trend_source: TrendSource,
) -> Result<AgentDemand> {
    let n = market.n_assets();
    let mut demand = AgentDemand {
        wealth: 0.0,
        expected_returns: vec![0.0; n],
        trends: Vec::new(),
        desired_weights: vec![0.0; n],
        positions: vec![0.0; n],
    };
    evaluate_agent(trial_prices, prev_prices, agent, market, trend_source, &mut demand)?;
    Ok(demand)
}

fn evaluate_agent(
    prices: &[f64],
    prev_prices: &[f64],
    agent: &PreparedAgent<'_>,
    market: &MarketSnapshot<'_>,
    trend_source: TrendSource,
    out: &mut AgentDemand,
) -> Result<()> {
    let input = &agent.input;
    let profile = input.profile;
    let n = market.n_assets();

    if input.bankrupt {
        out.wealth = BANKRUPTCY_FLOOR;
        out.trends.clear();
        if profile.kind == AgentKind::Chartist {
            out.trends.extend_from_slice(&input.beliefs.trends);
        }
        out.positions.iter_mut().for_each(|z| *z = 0.0);
        out.desired_weights.iter_mut().for_each(|w| *w = 0.0);
        out.expected_returns.iter_mut().for_each(|e| *e = market.risk_free);
        return Ok(());
    }

    out.wealth = trial_wealth(
        input.wealth,
        input.weights,
        prices,
        prev_prices,
        market.dividends,
        market.risk_free,
    );

    match profile.kind {
        AgentKind::Fundamentalist => {
            out.trends.clear();
            for i in 0..n {
                out.expected_returns[i] = fundamentalist_expected_return(
                    prices[i],
                    market.fundamentals[i],
                    market.dividends[i],
                    profile.mean_reversion,
                    market.growth_rates[i],
                )?;
            }
        }
        AgentKind::Chartist => {
            out.trends.resize(n, 0.0);
            for i in 0..n {
                let trend = match trend_source {
                    TrendSource::TrialPrice => {
                        if !(prev_prices[i] > 0.0) {
                            return Err(MarketError::domain("previous price must be > 0"));
                        }
                        (1.0 - agent.trend_weight) * input.beliefs.trends[i]
                            + agent.trend_weight * (prices[i] - prev_prices[i]) / prev_prices[i]
                    }
                    TrendSource::Realized => input.beliefs.trends[i],
                };
                out.trends[i] = trend;
                out.expected_returns[i] =
                    chartist_expected_return(trend, market.dividends[i], prices[i], market.growth_rates[i])?;
            }
        }
    }

    for (a, w) in out.desired_weights.iter_mut().enumerate() {
        let row = &agent.precision[a * n..(a + 1) * n];
        *w = row
            .iter()
            .zip(&out.expected_returns)
            .map(|(q, e)| q * (e - market.risk_free))
            .sum();
    }
    if out.desired_weights.iter().any(|x| !x.is_finite()) {
        return Err(MarketError::Numerical(format!(
            "non-finite weights {:?}",
            out.desired_weights
        )));
    }
    clamp_weights(&mut out.desired_weights, profile.weight_bounds, profile.weight_clamp);
    desired_positions_into(
        out.wealth,
        &out.desired_weights,
        prices,
        profile.position_bounds,
        &mut out.positions,
    )
}

/// `Σ_j z_j(p) − M`, componentwise.
pub fn aggregate_excess_demand(
    trial_prices: &[f64],
    prev_prices: &[f64],
    agents: &[PreparedAgent<'_>],
    market: &MarketSnapshot<'_>,
    trend_source: TrendSource,
) -> Result<Vec<f64>> {
    let mut ws = Workspace::new(market.n_assets());
    ws.excess(trial_prices, prev_prices, agents, market, trend_source)?;
    Ok(ws.excess.clone())
}

/// Reusable scratch buffers so the inner bisection loop does not allocate.
struct Workspace {
    demand: AgentDemand,
    excess: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            demand: AgentDemand {
                wealth: 0.0,
                expected_returns: vec![0.0; n],
                trends: Vec::with_capacity(n),
                desired_weights: vec![0.0; n],
                positions: vec![0.0; n],
            },
            excess: vec![0.0; n],
        }
    }

    fn excess(
        &mut self,
        prices: &[f64],
        prev_prices: &[f64],
        agents: &[PreparedAgent<'_>],
        market: &MarketSnapshot<'_>,
        trend_source: TrendSource,
    ) -> Result<&[f64]> {
        for (e, m) in self.excess.iter_mut().zip(market.shares_outstanding) {
            *e = -m;
        }
        // Fixed agent order keeps the sum bit-reproducible.
        for agent in agents {
            evaluate_agent(prices, prev_prices, agent, market, trend_source, &mut self.demand)?;
            for (e, z) in self.excess.iter_mut().zip(&self.demand.positions) {
                *e += z;
            }
        }
        Ok(&self.excess)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClearingResult {
    pub prices: Vec<f64>,
    /// Per-agent evaluation at the clearing prices.
    pub demands: Vec<AgentDemand>,
    /// Per-agent realized weights `z·P/W`.
    pub realized_weights: Vec<Vec<f64>>,
    pub sweeps: usize,
    pub max_residual: f64,
}

impl ClearingResult {
    pub fn positions(&self, agent: usize) -> &[f64] {
        &self.demands[agent].positions
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn clearing_error(reason: impl Into<String>, prices: &[f64], residuals: &[f64]) -> MarketError {
    MarketError::Clearing {
        step: 0,
        reason: reason.into(),
        prices: prices.to_vec(),
        residuals: residuals.to_vec(),
    }
}

/// Brackets never leave `prev/factor^k .. prev*factor^k`.
const MAX_BRACKET_EXPANSIONS: usize = 6;

/// First relative step of the bracket search; it doubles in log terms.
const INITIAL_BRACKET_STEP: f64 = 0.01;

/// Solves for market-clearing prices, starting from `prev_prices`.
pub fn clear(
    prev_prices: &[f64],
    agents: &[PreparedAgent<'_>],
    market: &MarketSnapshot<'_>,
    cfg: &ClearingConfig,
) -> Result<ClearingResult> {
    let n = market.n_assets();
    if prev_prices.len() != n {
        return Err(MarketError::domain("price vector length does not match asset count"));
    }
    if !agents
        .iter()
        .any(|a| !a.input.bankrupt && a.input.wealth > BANKRUPTCY_FLOOR)
    {
        return Err(clearing_error("no solvent agents", prev_prices, &[]));
    }
    let mut ws = Workspace::new(n);
    let ts = cfg.trend_source;
    let inner_tol = cfg.residual_tolerance * 1e-3;

    let mut prices = prev_prices.to_vec();
    let mut residual = max_abs(ws.excess(&prices, prev_prices, agents, market, ts)?);
    let mut sweeps = 0;

    while residual > cfg.residual_tolerance {
        if sweeps == cfg.max_outer_sweeps {
            let res = ws.excess(&prices, prev_prices, agents, market, ts)?.to_vec();
            return Err(clearing_error(
                format!("outer sweeps exhausted after {sweeps}"),
                &prices,
                &res,
            ));
        }
        sweeps += 1;
        for i in 0..n {
            let current = ws.excess(&prices, prev_prices, agents, market, ts)?[i];
            if current.abs() <= inner_tol {
                continue;
            }
            let root = solve_one_asset(i, current, &mut prices, prev_prices, agents, market, cfg, &mut ws)?;
            let old = prices[i];
            prices[i] = old + cfg.damping * (root - old);
        }
        residual = max_abs(ws.excess(&prices, prev_prices, agents, market, ts)?);
    }

    let mut demands = Vec::with_capacity(agents.len());
    let mut realized_weights = Vec::with_capacity(agents.len());
    for agent in agents {
        let d = agent_demand_at(&prices, prev_prices, agent, market, ts)?;
        let w = if d.wealth > BANKRUPTCY_FLOOR {
            d.positions.iter().zip(&prices).map(|(z, p)| z * p / d.wealth).collect()
        } else {
            vec![0.0; n]
        };
        realized_weights.push(w);
        demands.push(d);
    }

    Ok(ClearingResult {
        prices,
        demands,
        realized_weights,
        sweeps,
        max_residual: residual,
    })
}

/// Bracketed bisection on asset `i` with all other prices held at `prices`.
/// The bracket grows geometrically from the current iterate, first in the
/// direction the excess demand points to, then the other way, and never
/// leaves the maximal bracket around the previous price.
/// Leaves `prices[i]` at its entry value and returns the root.
#[allow(clippy::too_many_arguments)]
fn solve_one_asset(
    i: usize,
    f_entry: f64,
    prices: &mut [f64],
    prev_prices: &[f64],
    agents: &[PreparedAgent<'_>],
    market: &MarketSnapshot<'_>,
    cfg: &ClearingConfig,
    ws: &mut Workspace,
) -> Result<f64> {
    let ts = cfg.trend_source;
    let entry = prices[i];
    let inner_tol = cfg.residual_tolerance * 1e-3;
    let eval = |x: f64, prices: &mut [f64], ws: &mut Workspace| -> Result<f64> {
        prices[i] = x;
        Ok(ws.excess(prices, prev_prices, agents, market, ts)?[i])
    };

    let reach = cfg.price_bracket_factor.powi(MAX_BRACKET_EXPANSIONS as i32 + 1);
    let floor = prev_prices[i] / reach;
    let ceiling = prev_prices[i] * reach;
    let up_first = f_entry > 0.0;

    let mut bracket = None;
    for up in [up_first, !up_first] {
        let (mut x, mut f) = (entry, f_entry);
        let mut ratio = 1.0 + INITIAL_BRACKET_STEP;
        loop {
            let at_limit = if up { x >= ceiling } else { x <= floor };
            if at_limit {
                break;
            }
            let next = if up {
                (x * ratio).min(ceiling)
            } else {
                (x / ratio).max(floor)
            };
            let f_next = eval(next, prices, ws)?;
            if f_next == 0.0 {
                prices[i] = entry;
                return Ok(next);
            }
            if f_next.signum() != f.signum() {
                bracket = Some(if up { (x, f, next, f_next) } else { (next, f_next, x, f) });
                break;
            }
            x = next;
            f = f_next;
            ratio *= ratio;
        }
        if bracket.is_some() {
            break;
        }
    }
    let Some((mut lo, mut f_lo, mut hi, mut f_hi)) = bracket else {
        prices[i] = entry;
        let res = ws.excess(prices, prev_prices, agents, market, ts)?.to_vec();
        return Err(clearing_error(
            format!("no sign change for asset {i} in [{floor:.3e}, {ceiling:.3e}]"),
            prices,
            &res,
        ));
    };

    // Illinois false position, with a plain bisection step every third
    // iteration and whenever the interpolant leaves the bracket.
    let mut best = (f64::INFINITY, lo);
    let mut last_side = 0i8;
    for step in 0..cfg.max_bisection_steps {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let secant = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        let x = if step % 3 == 2 || !(secant > lo && secant < hi) {
            mid
        } else {
            secant
        };
        let f_x = eval(x, prices, ws)?;
        if f_x.abs() < best.0 {
            best = (f_x.abs(), x);
        }
        if f_x.abs() <= inner_tol {
            break;
        }
        if f_x.signum() == f_lo.signum() {
            lo = x;
            f_lo = f_x;
            if last_side == -1 {
                f_hi *= 0.5;
            }
            last_side = -1;
        } else {
            hi = x;
            f_hi = f_x;
            if last_side == 1 {
                f_lo *= 0.5;
            }
            last_side = 1;
        }
    }
    prices[i] = entry;
    Ok(best.1)
}
