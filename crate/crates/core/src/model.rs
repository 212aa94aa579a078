//! Domain types and pure pricing/belief/demand functions.
//!
//! Everything here is a pure function of its arguments. Mutable belief state
//! lives in [`BeliefState`] and is owned by a single simulation run.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{MarketError, Result};

/// Eigenvalue floor applied to correlation matrices before building a covariance.
pub const CORRELATION_EIGEN_FLOOR: f64 = 1e-8;
/// Ridge added to every covariance before inversion.
pub const COVARIANCE_RIDGE: f64 = 1e-12;
/// Wealth at or below this level marks an agent bankrupt.
pub const BANKRUPTCY_FLOOR: f64 = 1e-9;

/// Closed interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    #[inline]
    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.min, self.max)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }
}

/// Per-asset dividend process parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetParams {
    /// Per-step dividend growth rate.
    pub growth_rate: f64,
    /// Per-step standard deviation of dividend growth.
    pub growth_stdev: f64,
    pub initial_dividend: f64,
    pub shares_outstanding: u32,
    pub initial_price: f64,
    pub initial_fundamental: f64,
}

impl AssetParams {
    pub fn validate(&self, risk_free: f64) -> Result<()> {
        if !(self.growth_rate >= 0.0) {
            return Err(MarketError::domain("dividend growth rate must be >= 0"));
        }
        if self.growth_rate >= risk_free && !(self.growth_rate == 0.0 && risk_free == 0.0) {
            return Err(MarketError::domain(format!(
                "dividend growth rate {} must be below the risk-free rate {}",
                self.growth_rate, risk_free
            )));
        }
        if !(self.growth_stdev >= 0.0) {
            return Err(MarketError::domain("dividend growth stdev must be >= 0"));
        }
        if !(self.initial_dividend > 0.0) {
            return Err(MarketError::domain("initial dividend must be > 0"));
        }
        if self.shares_outstanding == 0 {
            return Err(MarketError::domain("shares outstanding must be > 0"));
        }
        if !(self.initial_price > 0.0) || !(self.initial_fundamental > 0.0) {
            return Err(MarketError::domain("initial price and fundamental must be > 0"));
        }
        Ok(())
    }
}

/// Evolving per-asset market state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssetState {
    pub price: f64,
    pub fundamental: f64,
    pub dividend: f64,
    pub prev_price: f64,
}

impl AssetState {
    pub fn initial(params: &AssetParams) -> Self {
        Self {
            price: params.initial_price,
            fundamental: params.initial_fundamental,
            dividend: params.initial_dividend,
            prev_price: params.initial_price,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentKind {
    Fundamentalist,
    Chartist,
}

/// Fixed strategy parameters of one trader. Never mutated after construction.
#[derive(Debug, Clone)]
pub struct AgentProfile {
    pub kind: AgentKind,
    pub risk_aversion: f64,
    /// EMA period: variance recursion for both kinds, trend recursion for chartists.
    pub ema_period: f64,
    /// Mean-reversion speed; ignored for chartists.
    pub mean_reversion: f64,
    /// Expected correlation matrix, already repaired to be positive definite.
    correlation: DMatrix<f64>,
    pub weight_bounds: Bounds,
    pub weight_clamp: WeightClamp,
    pub position_bounds: Bounds,
}

impl AgentProfile {
    /// Builds a profile, validating parameters and repairing `correlation`
    /// to a positive-definite unit-diagonal matrix.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: AgentKind,
        risk_aversion: f64,
        ema_period: f64,
        mean_reversion: f64,
        correlation: DMatrix<f64>,
        weight_bounds: Bounds,
        position_bounds: Bounds,
    ) -> Result<Self> {
        if !(risk_aversion > 0.0) {
            return Err(MarketError::domain("risk aversion must be > 0"));
        }
        if !(ema_period >= 1.0) {
            return Err(MarketError::domain("EMA period must be >= 1"));
        }
        if kind == AgentKind::Fundamentalist && !(mean_reversion > 0.0) {
            return Err(MarketError::domain("mean reversion must be > 0"));
        }
        if !(weight_bounds.min < 0.0 && 0.0 < weight_bounds.max) {
            return Err(MarketError::domain("weight bounds must straddle zero"));
        }
        if !(position_bounds.min < position_bounds.max) {
            return Err(MarketError::domain("position bounds must be ordered"));
        }
        validate_correlation(&correlation)?;
        Ok(Self {
            kind,
            risk_aversion,
            ema_period,
            mean_reversion,
            correlation: repair_correlation(&correlation),
            weight_bounds,
            weight_clamp: WeightClamp::default(),
            position_bounds,
        })
    }

    pub fn with_weight_clamp(mut self, rule: WeightClamp) -> Self {
        self.weight_clamp = rule;
        self
    }

    pub fn correlation(&self) -> &DMatrix<f64> {
        &self.correlation
    }

    pub fn n_assets(&self) -> usize {
        self.correlation.nrows()
    }
}

/// Evolving beliefs of one trader.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    /// EMA of squared forecast errors, per asset.
    pub variances: Vec<f64>,
    /// Chartist price-change trend per asset (stays zero for fundamentalists).
    pub trends: Vec<f64>,
    /// Expected returns formed at the last clearing, used for the next forecast error.
    pub last_expected: Vec<f64>,
}

impl BeliefState {
    pub fn new(n_assets: usize, initial_variance: f64, initial_trend: f64, risk_free: f64) -> Self {
        Self {
            variances: vec![initial_variance; n_assets],
            trends: vec![initial_trend; n_assets],
            last_expected: vec![risk_free; n_assets],
        }
    }

    pub fn stdevs(&self) -> Vec<f64> {
        self.variances.iter().map(|v| v.max(0.0).sqrt()).collect()
    }
}

/// Expected return vector and covariance of one agent.
#[derive(Debug, Clone)]
pub struct ExpectedMoments {
    pub expected_returns: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

/// Weight given to the newest observation by an EMA with period `tau`.
#[inline]
pub fn ema_weight(tau: f64) -> f64 {
    1.0 - (-1.0 / tau).exp()
}

/// Constant-growth fundamental value `(1+φ)D/(r−φ)`.
pub fn fundamental_price_constant(growth: f64, dividend: f64, risk_free: f64) -> Result<f64> {
    if growth >= risk_free {
        return Err(MarketError::domain(format!(
            "growth {growth} >= risk-free rate {risk_free}: fundamental value is infinite"
        )));
    }
    if !(growth >= 0.0) || !(dividend > 0.0) {
        return Err(MarketError::domain("need growth >= 0 and dividend > 0"));
    }
    Ok((1.0 + growth) * dividend / (risk_free - growth))
}

/// One-step expected return of a fundamentalist who expects the price gap
/// to the fundamental to close at speed `mean_reversion`.
pub fn fundamentalist_expected_return(
    price: f64,
    fundamental: f64,
    dividend: f64,
    mean_reversion: f64,
    growth: f64,
) -> Result<f64> {
    if !(price > 0.0) {
        return Err(MarketError::domain(format!("price must be > 0, got {price}")));
    }
    Ok((growth * fundamental + mean_reversion * (fundamental - price) + (1.0 + growth) * dividend) / price)
}

/// EMA update of the chartist trend with the relative price change.
pub fn chartist_trend_update(prev_trend: f64, price_now: f64, price_prev: f64, tau: f64) -> Result<f64> {
    if !(price_prev > 0.0) {
        return Err(MarketError::domain(format!(
            "previous price must be > 0, got {price_prev}"
        )));
    }
    let w = ema_weight(tau);
    Ok((1.0 - w) * prev_trend + w * (price_now - price_prev) / price_prev)
}

/// Chartist expected return: trend plus expected dividend yield.
pub fn chartist_expected_return(trend: f64, dividend: f64, price: f64, growth: f64) -> Result<f64> {
    if !(price > 0.0) {
        return Err(MarketError::domain(format!("price must be > 0, got {price}")));
    }
    Ok(trend + (1.0 + growth) * dividend / price)
}

/// EMA update of a variance estimate with a new forecast error.
#[inline]
pub fn ema_variance_update(prev_variance: f64, forecast_error: f64, tau: f64) -> f64 {
    let w = ema_weight(tau);
    (1.0 - w) * prev_variance + w * forecast_error * forecast_error
}

fn validate_correlation(rho: &DMatrix<f64>) -> Result<()> {
    if !rho.is_square() || rho.nrows() == 0 {
        return Err(MarketError::domain("correlation matrix must be square and non-empty"));
    }
    let n = rho.nrows();
    for i in 0..n {
        if (rho[(i, i)] - 1.0).abs() > 1e-12 {
            return Err(MarketError::domain("correlation matrix must have unit diagonal"));
        }
        for j in 0..i {
            if (rho[(i, j)] - rho[(j, i)]).abs() > 1e-12 {
                return Err(MarketError::domain("correlation matrix must be symmetric"));
            }
            if !(-1.0..=1.0).contains(&rho[(i, j)]) {
                return Err(MarketError::domain("correlation entries must lie in [-1, 1]"));
            }
        }
    }
    Ok(())
}

/// Clips the eigenvalues of a symmetric matrix at [`CORRELATION_EIGEN_FLOOR`]
/// and rescales the result back to unit diagonal.
pub fn repair_correlation(rho: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(rho.clone());
    if eig.eigenvalues.iter().all(|&l| l >= CORRELATION_EIGEN_FLOOR) {
        return rho.clone();
    }
    let clipped = eig.eigenvalues.map(|l| l.max(CORRELATION_EIGEN_FLOOR));
    let mut m = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    let n = m.nrows();
    let d: Vec<f64> = (0..n).map(|i| m[(i, i)].sqrt()).collect();
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] /= d[i] * d[j];
        }
    }
    for i in 0..n {
        m[(i, i)] = 1.0;
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    m
}

/// Covariance `Σ_ij = ρ_ij σ_i σ_j` from a repaired correlation, plus the ridge.
pub fn build_covariance(stdevs: &[f64], rho: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = stdevs.len();
    if rho.nrows() != n || rho.ncols() != n {
        return Err(MarketError::domain("correlation size does not match stdev vector"));
    }
    if stdevs.iter().any(|s| !(*s >= 0.0)) {
        return Err(MarketError::domain("standard deviations must be >= 0"));
    }
    let rho = if Cholesky::new(rho.clone()).is_some() {
        rho.clone()
    } else {
        repair_correlation(rho)
    };
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let base = if i == j {
            stdevs[i] * stdevs[i]
        } else {
            rho[(i, j)] * stdevs[i] * stdevs[j]
        };
        base + if i == j { COVARIANCE_RIDGE } else { 0.0 }
    }))
}

/// Cached Cholesky factor of a covariance, reused across trial prices.
#[derive(Debug, Clone)]
pub struct CovarianceFactor {
    chol: Cholesky<f64, Dyn>,
}

impl CovarianceFactor {
    pub fn new(covariance: &DMatrix<f64>) -> Result<Self> {
        Cholesky::new(covariance.clone())
            .map(|chol| Self { chol })
            .ok_or_else(|| {
                MarketError::Numerical(format!(
                    "covariance not positive definite after repair: diag = {:?}",
                    covariance.diagonal().as_slice()
                ))
            })
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

/// Unconstrained CRRA weights `(1/λ) Σ⁻¹ (E − r·1)`.
pub fn raw_weights(
    expected_returns: &[f64],
    factor: &CovarianceFactor,
    risk_free: f64,
    risk_aversion: f64,
) -> Vec<f64> {
    let excess = DVector::from_iterator(expected_returns.len(), expected_returns.iter().map(|e| e - risk_free));
    factor.solve(&excess).iter().map(|x| x / risk_aversion).collect()
}

/// How the scalar weight bounds are applied to a weight vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightClamp {
    /// Each weight clamped independently.
    #[default]
    PerAsset,
    /// Per-asset clamp, then a proportional rescale when the total risky
    /// proportion leaves the bounds.
    PerAssetAndTotal,
}

/// Clamps each weight into `bounds`. Under [`WeightClamp::PerAssetAndTotal`]
/// the vector is then rescaled if its sum still falls outside `bounds`.
pub fn clamp_weights(weights: &mut [f64], bounds: Bounds, rule: WeightClamp) {
    for w in weights.iter_mut() {
        *w = bounds.clamp(*w);
    }
    if rule == WeightClamp::PerAsset {
        return;
    }
    let total: f64 = weights.iter().sum();
    let scale = if total > bounds.max {
        bounds.max / total
    } else if total < bounds.min {
        bounds.min / total
    } else {
        return;
    };
    for w in weights.iter_mut() {
        *w *= scale;
    }
}

/// CRRA-optimal risky weights, clamped by `rule`.
pub fn optimal_weights(
    expected_returns: &[f64],
    covariance: &DMatrix<f64>,
    risk_free: f64,
    risk_aversion: f64,
    bounds: Bounds,
    rule: WeightClamp,
) -> Result<Vec<f64>> {
    if !(risk_aversion > 0.0) {
        return Err(MarketError::domain("risk aversion must be > 0"));
    }
    let factor = CovarianceFactor::new(covariance)?;
    let mut w = raw_weights(expected_returns, &factor, risk_free, risk_aversion);
    if w.iter().any(|x| !x.is_finite()) {
        return Err(MarketError::Numerical(format!("non-finite weights {w:?}")));
    }
    clamp_weights(&mut w, bounds, rule);
    Ok(w)
}

/// Desired share holdings `clamp(W π / P)`. Bankrupt wealth demands nothing.
pub fn desired_positions(wealth: f64, weights: &[f64], prices: &[f64], bounds: Bounds) -> Result<Vec<f64>> {
    let mut out = vec![0.0; prices.len()];
    desired_positions_into(wealth, weights, prices, bounds, &mut out)?;
    Ok(out)
}

pub(crate) fn desired_positions_into(
    wealth: f64,
    weights: &[f64],
    prices: &[f64],
    bounds: Bounds,
    out: &mut [f64],
) -> Result<()> {
    if let Some(p) = prices.iter().find(|p| !(**p > 0.0)) {
        return Err(MarketError::domain(format!("price must be > 0, got {p}")));
    }
    if wealth <= BANKRUPTCY_FLOOR {
        out.iter_mut().for_each(|z| *z = 0.0);
        return Ok(());
    }
    for ((z, w), p) in out.iter_mut().zip(weights).zip(prices) {
        *z = bounds.clamp(wealth * w / p);
    }
    Ok(())
}
