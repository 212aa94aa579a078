//! Descriptive statistics and stylized-fact diagnostics for return series.

use serde::Serialize;

use crate::error::{MarketError, Result};

pub const MIN_STATS_LEN: usize = 4;
pub const MIN_DFA_LEN: usize = 500;
/// Two-sided 95% normal quantile used for white-noise bands.
pub const BAND_Z: f64 = 1.96;

/// Raw-return ACF lags checked for absence of memory.
pub const RAW_ACF_LAGS: usize = 50;
pub const RAW_VERDICT_LAGS: usize = 20;
/// Absolute-return ACF lags reported and checked for clustering.
pub const ABS_ACF_LAGS: usize = 200;
pub const ABS_VERDICT_LAGS: usize = 50;

pub const FAT_TAIL_KURTOSIS: f64 = 4.0;
pub const NO_MEMORY_FRACTION: f64 = 0.9;
pub const CLUSTERING_FRACTION: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub sd: f64,
    /// Non-excess kurtosis `m4 / m2²`; `None` when the series is constant.
    pub kurtosis: Option<f64>,
    /// `m3 / m2^1.5`; `None` when the series is constant.
    pub skewness: Option<f64>,
}

pub fn descriptive_stats(series: &[f64]) -> Result<StatsReport> {
    let n = series.len();
    if n < MIN_STATS_LEN {
        return Err(MarketError::Stats(format!(
            "need at least {MIN_STATS_LEN} observations, got {n}"
        )));
    }
    if let Some(x) = series.iter().find(|x| !x.is_finite()) {
        return Err(MarketError::Stats(format!("non-finite observation {x}")));
    }
    let nf = n as f64;
    let mean = series.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in series {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let sd = (m2 / (nf - 1.0)).sqrt();
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    let (kurtosis, skewness) = if m2 > 0.0 {
        (Some(m4 / (m2 * m2)), Some(m3 / m2.powf(1.5)))
    } else {
        (None, None)
    };

    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };

    Ok(StatsReport {
        n,
        mean,
        median,
        sd,
        kurtosis,
        skewness,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcfProfile {
    /// `values[k]` is the autocorrelation at lag `k`; `values[0] == 1`.
    pub values: Vec<f64>,
    /// Half-width of the 95% white-noise band, `1.96 / √T`.
    pub band: f64,
}

impl AcfProfile {
    pub fn max_lag(&self) -> usize {
        self.values.len() - 1
    }

    /// Fraction of lags `1..=lags` with |ACF| inside the band.
    pub fn fraction_inside(&self, lags: usize) -> f64 {
        let lags = lags.min(self.max_lag());
        let inside = self.values[1..=lags].iter().filter(|v| v.abs() <= self.band).count();
        inside as f64 / lags as f64
    }

    /// Fraction of lags `1..=lags` with ACF above the upper band.
    pub fn fraction_above(&self, lags: usize) -> f64 {
        let lags = lags.min(self.max_lag());
        let above = self.values[1..=lags].iter().filter(|v| **v > self.band).count();
        above as f64 / lags as f64
    }
}

/// Sample autocorrelation using the full-sample mean and variance.
pub fn acf(series: &[f64], max_lag: usize) -> Result<AcfProfile> {
    let n = series.len();
    if max_lag == 0 || n <= max_lag + 1 {
        return Err(MarketError::Stats(format!(
            "ACF to lag {max_lag} needs more than {} observations, got {n}",
            max_lag + 1
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let denom: f64 = dev.iter().map(|d| d * d).sum();
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(MarketError::Stats("ACF undefined for a constant series".into()));
    }
    let mut values = Vec::with_capacity(max_lag + 1);
    values.push(1.0);
    for k in 1..=max_lag {
        let num: f64 = dev[..n - k].iter().zip(&dev[k..]).map(|(a, b)| a * b).sum();
        values.push((num / denom).clamp(-1.0, 1.0));
    }
    Ok(AcfProfile {
        values,
        band: BAND_Z / (n as f64).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HurstEstimate {
    pub hurst: f64,
    pub slope_stderr: f64,
    pub scales: Vec<usize>,
    /// RMS detrended fluctuation at each scale.
    pub fluctuations: Vec<f64>,
}

const DFA_MIN_SCALE: usize = 10;
const DFA_SCALE_POINTS: usize = 20;

/// Log-spaced integer scales from 10 to `n / 4`, deduplicated.
fn dfa_scales(n: usize) -> Vec<usize> {
    let lo = DFA_MIN_SCALE as f64;
    let hi = (n / 4) as f64;
    let mut scales: Vec<usize> = (0..DFA_SCALE_POINTS)
        .map(|k| {
            let t = k as f64 / (DFA_SCALE_POINTS - 1) as f64;
            (lo * (hi / lo).powf(t)).round() as usize
        })
        .collect();
    scales.dedup();
    scales
}

/// Mean squared residual of a least-squares line through `y` against 0..len.
fn detrended_msq(y: &[f64]) -> f64 {
    let s = y.len() as f64;
    let tm = (s - 1.0) / 2.0;
    let ym = y.iter().sum::<f64>() / s;
    let (mut sty, mut stt) = (0.0, 0.0);
    for (t, v) in y.iter().enumerate() {
        let dt = t as f64 - tm;
        sty += dt * (v - ym);
        stt += dt * dt;
    }
    let b = sty / stt;
    y.iter()
        .enumerate()
        .map(|(t, v)| {
            let r = v - ym - b * (t as f64 - tm);
            r * r
        })
        .sum::<f64>()
        / s
}

/// Detrended fluctuation analysis with linear detrending. Windows are tiled
/// from both ends of the profile so no observation is dropped.
pub fn hurst_dfa(series: &[f64]) -> Result<HurstEstimate> {
    let n = series.len();
    if n < MIN_DFA_LEN {
        return Err(MarketError::Stats(format!(
            "DFA needs at least {MIN_DFA_LEN} observations, got {n}"
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let mut acc = 0.0;
    let profile: Vec<f64> = series
        .iter()
        .map(|x| {
            acc += x - mean;
            acc
        })
        .collect();

    let scales = dfa_scales(n);
    let mut fluctuations = Vec::with_capacity(scales.len());
    for &s in &scales {
        let windows = n / s;
        let mut total = 0.0;
        for w in 0..windows {
            total += detrended_msq(&profile[w * s..(w + 1) * s]);
            total += detrended_msq(&profile[n - (w + 1) * s..n - w * s]);
        }
        fluctuations.push((total / (2 * windows) as f64).sqrt());
    }
    if fluctuations.iter().any(|f| !(*f > 0.0)) {
        return Err(MarketError::Stats("DFA undefined for a constant series".into()));
    }

    let xs: Vec<f64> = scales.iter().map(|s| (*s as f64).ln()).collect();
    let ys: Vec<f64> = fluctuations.iter().map(|f| f.ln()).collect();
    let k = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / k;
    let ym = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - ym - slope * (x - xm)).powi(2))
        .sum();
    let slope_stderr = (sse / (k - 2.0) / sxx).sqrt();

    Ok(HurstEstimate {
        hurst: slope,
        slope_stderr,
        scales,
        fluctuations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StylizedReport {
    pub stats: StatsReport,
    pub acf_raw: AcfProfile,
    pub acf_abs: AcfProfile,
    pub hurst_abs: HurstEstimate,
    /// Kurtosis above 4.
    pub fat_tails: bool,
    /// At least 90% of raw-return ACF lags 1..20 inside the band.
    pub no_raw_memory: bool,
    /// At least 60% of |return| ACF lags 1..50 above the band.
    pub volatility_clustering: bool,
}

pub fn stylized_report(series: &[f64]) -> Result<StylizedReport> {
    let stats = descriptive_stats(series)?;
    let abs: Vec<f64> = series.iter().map(|x| x.abs()).collect();
    let acf_raw = acf(series, RAW_ACF_LAGS)?;
    let acf_abs = acf(&abs, ABS_ACF_LAGS)?;
    let hurst_abs = hurst_dfa(&abs)?;
    Ok(StylizedReport {
        fat_tails: stats.kurtosis.is_some_and(|k| k > FAT_TAIL_KURTOSIS),
        no_raw_memory: acf_raw.fraction_inside(RAW_VERDICT_LAGS) >= NO_MEMORY_FRACTION,
        volatility_clustering: acf_abs.fraction_above(ABS_VERDICT_LAGS) >= CLUSTERING_FRACTION,
        stats,
        acf_raw,
        acf_abs,
        hurst_abs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn symmetric_series() {
        let s = descriptive_stats(&[-1.0, -0.5, 0.0, 0.5, 1.0]).unwrap();
        assert_eq!(s.mean, 0.0);
        assert_eq!(s.median, 0.0);
        assert_eq!(s.skewness, Some(0.0));
    }

    #[test]
    fn five_element_fixture() {
        // m2 = 2, m3 = 0, m4 = 6.8 by hand for 1..=5.
        let s = descriptive_stats(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.median, 3.0);
        assert_relative_eq!(s.sd, 2.5f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(s.kurtosis.unwrap(), 1.7, epsilon = 1e-15);
        assert_eq!(s.skewness, Some(0.0));
    }

    #[test]
    fn constant_series_flags_shape_fields() {
        let s = descriptive_stats(&[2.0; 6]).unwrap();
        assert_eq!(s.sd, 0.0);
        assert_eq!(s.kurtosis, None);
        assert_eq!(s.skewness, None);
    }

    #[test]
    fn short_series_errors() {
        assert!(descriptive_stats(&[-1.0, 0.0, 1.0]).is_err());
        assert!(acf(&[1.0, 2.0, 3.0], 2).is_err());
        assert!(hurst_dfa(&[0.1; 499]).is_err());
    }

    #[test]
    fn acf_lag_zero_and_band() {
        let x: Vec<f64> = (0..100).map(|k| ((k * 37) % 11) as f64).collect();
        let a = acf(&x, 10).unwrap();
        assert_eq!(a.values[0], 1.0);
        assert_relative_eq!(a.band, 0.196, epsilon = 1e-15);
    }

    #[test]
    fn dfa_scales_cover_a_decade() {
        let s = dfa_scales(500);
        assert!(s.len() >= 10, "{s:?}");
        assert_eq!(s[0], 10);
        assert_eq!(*s.last().unwrap(), 125);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }
}
