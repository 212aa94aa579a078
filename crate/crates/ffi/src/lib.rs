//! C interface to the simulator.
//!
//! Every fallible function returns an [`HmStatus`]. On failure the message is
//! kept per thread and can be read with [`hm_last_error_message`].
//! Simulations are opaque handles released with [`hm_simulation_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hetmarket::config::SimConfig;
use hetmarket::output::{emit_outputs, run_reports, Emit};
use hetmarket::simulator::{run, Simulation};
use hetmarket::stats::{stylized_report, ABS_VERDICT_LAGS, RAW_VERDICT_LAGS};
use hetmarket::MarketError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Domain = 4,
    Numerical = 5,
    Clearing = 6,
    Stats = 7,
    Io = 8,
    Parse = 9,
    BufferTooSmall = 10,
    /// A previous step failed; the simulation cannot continue.
    Poisoned = 11,
    Panic = 12,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: HmStatus, msg: impl Into<String>) -> HmStatus {
    set_error(msg);
    status
}

fn from_error(err: &MarketError) -> HmStatus {
    let status = match err {
        MarketError::Domain(_) => HmStatus::Domain,
        MarketError::Numerical(_) => HmStatus::Numerical,
        MarketError::Clearing { .. } => HmStatus::Clearing,
        MarketError::Config { .. } => HmStatus::Config,
        MarketError::Stats(_) => HmStatus::Stats,
        MarketError::Io { .. } => HmStatus::Io,
        MarketError::Parse { .. } => HmStatus::Parse,
    };
    fail(status, err.to_string())
}

/// Runs `f`, converting panics into [`HmStatus::Panic`].
fn guard(f: impl FnOnce() -> HmStatus) -> HmStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(HmStatus::Panic, "internal panic"))
}

unsafe fn opt_str<'a>(s: *const c_char) -> Result<Option<&'a str>, HmStatus> {
    if s.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(s)
        .to_str()
        .map(Some)
        .map_err(|_| fail(HmStatus::InvalidUtf8, "string argument is not valid UTF-8"))
}

unsafe fn config_from(toml: *const c_char) -> Result<SimConfig, HmStatus> {
    match opt_str(toml)? {
        None => Ok(SimConfig::default()),
        Some(text) => SimConfig::from_toml_str(text).map_err(|e| from_error(&e)),
    }
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Opaque simulation handle.
pub struct HmSimulation {
    sim: Simulation,
    poisoned: bool,
}

/// Summary of one completed step.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HmStepInfo {
    pub step: usize,
    pub clearing_sweeps: usize,
    pub clearing_residual: f64,
    pub share_fundamentalist: f64,
    pub share_chartist: f64,
}

/// Creates a simulation from TOML config text (null for baseline values).
///
/// # Safety
/// `config_toml` must be null or a NUL-terminated string; `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hm_simulation_new(
    config_toml: *const c_char,
    seed: u64,
    out: *mut *mut HmSimulation,
) -> HmStatus {
    guard(|| {
        if out.is_null() {
            return fail(HmStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let cfg = match config_from(config_toml) {
            Ok(c) => c,
            Err(s) => return s,
        };
        match Simulation::new(&cfg, seed) {
            Ok(sim) => {
                *out = Box::into_raw(Box::new(HmSimulation { sim, poisoned: false }));
                HmStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Releases a simulation. Null is ignored.
///
/// # Safety
/// `sim` must be null or a handle from [`hm_simulation_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hm_simulation_free(sim: *mut HmSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances one period. `info` may be null.
///
/// # Safety
/// `sim` must be a live handle; `info` null or valid.
#[no_mangle]
pub unsafe extern "C" fn hm_simulation_step(sim: *mut HmSimulation, info: *mut HmStepInfo) -> HmStatus {
    guard(|| {
        let Some(h) = sim.as_mut() else {
            return fail(HmStatus::NullPointer, "simulation is null");
        };
        if h.poisoned {
            return fail(HmStatus::Poisoned, "simulation stopped after a failed step");
        }
        match h.sim.step() {
            Ok(r) => {
                if let Some(info) = info.as_mut() {
                    *info = HmStepInfo {
                        step: r.step,
                        clearing_sweeps: r.clearing_sweeps,
                        clearing_residual: r.clearing_residual,
                        share_fundamentalist: r.share_f,
                        share_chartist: r.share_c,
                    };
                }
                HmStatus::Ok
            }
            Err(e) => {
                h.poisoned = true;
                from_error(&e)
            }
        }
    })
}

/// Number of risky assets, or 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hm_simulation_assets(sim: *const HmSimulation) -> usize {
    sim.as_ref().map_or(0, |h| h.sim.assets().len())
}

/// Steps completed so far, or 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hm_simulation_step_index(sim: *const HmSimulation) -> usize {
    sim.as_ref().map_or(0, |h| h.sim.step_index())
}

/// Copies current prices into `out[0..len]`; `len` must be at least the
/// asset count.
///
/// # Safety
/// `sim` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn hm_simulation_prices(sim: *const HmSimulation, out: *mut f64, len: usize) -> HmStatus {
    guard(|| {
        let Some(h) = sim.as_ref() else {
            return fail(HmStatus::NullPointer, "simulation is null");
        };
        if out.is_null() {
            return fail(HmStatus::NullPointer, "out is null");
        }
        let assets = h.sim.assets();
        if len < assets.len() {
            return fail(HmStatus::BufferTooSmall, format!("need {} slots", assets.len()));
        }
        let dst = std::slice::from_raw_parts_mut(out, assets.len());
        for (d, a) in dst.iter_mut().zip(assets) {
            *d = a.price;
        }
        HmStatus::Ok
    })
}

/// Current (fundamentalist, chartist) wealth shares.
///
/// # Safety
/// `sim` must be a live handle; `fundamentalist` and `chartist` valid.
#[no_mangle]
pub unsafe extern "C" fn hm_simulation_wealth_shares(
    sim: *const HmSimulation,
    fundamentalist: *mut f64,
    chartist: *mut f64,
) -> HmStatus {
    guard(|| {
        let Some(h) = sim.as_ref() else {
            return fail(HmStatus::NullPointer, "simulation is null");
        };
        if fundamentalist.is_null() || chartist.is_null() {
            return fail(HmStatus::NullPointer, "output pointer is null");
        }
        match hetmarket::simulator::wealth_shares(&h.sim.wealth(), &h.sim.kinds()) {
            Ok((f, c)) => {
                *fundamentalist = f;
                *chartist = c;
                HmStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Runs a full simulation and writes its output files into `out_dir`.
///
/// # Safety
/// `config_toml` null or NUL-terminated; `out_dir` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn hm_run_to_dir(config_toml: *const c_char, seed: u64, out_dir: *const c_char) -> HmStatus {
    guard(|| {
        let cfg = match config_from(config_toml) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let dir = match opt_str(out_dir) {
            Ok(Some(d)) => d,
            Ok(None) => return fail(HmStatus::NullPointer, "out_dir is null"),
            Err(s) => return s,
        };
        let output = match run(&cfg, seed) {
            Ok(o) => o,
            Err(e) => return from_error(&e),
        };
        let reports = run_reports(&output);
        match emit_outputs(
            Emit::Run {
                run: &output,
                reports: &reports,
            },
            dir,
        ) {
            Ok(_) => HmStatus::Ok,
            Err(e) => from_error(&e),
        }
    })
}

/// Headline numbers of a stylized-facts report.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HmStylizedSummary {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    /// NaN for a constant series.
    pub kurtosis: f64,
    /// NaN for a constant series.
    pub skewness: f64,
    pub hurst_abs: f64,
    pub raw_acf_inside: f64,
    pub abs_acf_above: f64,
    pub fat_tails: bool,
    pub no_raw_memory: bool,
    pub volatility_clustering: bool,
}

/// Stylized-facts report of `series[0..len]`.
///
/// # Safety
/// `series` must be valid for `len` reads and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hm_stylized_report(series: *const f64, len: usize, out: *mut HmStylizedSummary) -> HmStatus {
    guard(|| {
        if series.is_null() || out.is_null() {
            return fail(HmStatus::NullPointer, "null argument");
        }
        let data = std::slice::from_raw_parts(series, len);
        match stylized_report(data) {
            Ok(r) => {
                *out = HmStylizedSummary {
                    n: r.stats.n,
                    mean: r.stats.mean,
                    median: r.stats.median,
                    sd: r.stats.sd,
                    kurtosis: r.stats.kurtosis.unwrap_or(f64::NAN),
                    skewness: r.stats.skewness.unwrap_or(f64::NAN),
                    hurst_abs: r.hurst_abs.hurst,
                    raw_acf_inside: r.acf_raw.fraction_inside(RAW_VERDICT_LAGS),
                    abs_acf_above: r.acf_abs.fraction_above(ABS_VERDICT_LAGS),
                    fat_tails: r.fat_tails,
                    no_raw_memory: r.no_raw_memory,
                    volatility_clustering: r.volatility_clustering,
                };
                HmStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}
