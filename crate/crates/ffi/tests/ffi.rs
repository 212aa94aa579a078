use std::ffi::{CStr, CString};
use std::ptr;

use hetmarket_ffi::*;

fn last_error() -> String {
    let p = hm_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn step_through_handle() {
    let cfg = CString::new("steps = 5").unwrap();
    let mut sim = ptr::null_mut();
    unsafe {
        assert_eq!(hm_simulation_new(cfg.as_ptr(), 0, &mut sim), HmStatus::Ok);
        assert!(!sim.is_null());
        assert_eq!(hm_simulation_assets(sim), 3);

        let (mut f, mut c) = (0.0, 0.0);
        assert_eq!(hm_simulation_wealth_shares(sim, &mut f, &mut c), HmStatus::Ok);
        assert_eq!((f, c), (0.5, 0.5));

        let mut info = HmStepInfo::default();
        for t in 1..=3 {
            assert_eq!(hm_simulation_step(sim, &mut info), HmStatus::Ok, "{}", last_error());
            assert_eq!(info.step, t);
            assert!(info.clearing_residual <= 1e-6);
            assert!((info.share_fundamentalist + info.share_chartist - 1.0).abs() < 1e-12);
        }
        assert_eq!(hm_simulation_step_index(sim), 3);

        let mut prices = [0.0; 3];
        assert_eq!(hm_simulation_prices(sim, prices.as_mut_ptr(), 3), HmStatus::Ok);
        assert!(prices.iter().all(|p| *p > 0.0));
        assert_eq!(
            hm_simulation_prices(sim, prices.as_mut_ptr(), 2),
            HmStatus::BufferTooSmall
        );

        hm_simulation_free(sim);
    }
}

#[test]
fn handle_matches_library_run() {
    let out = hetmarket::simulator::run(
        &hetmarket::config::SimConfig {
            steps: 4,
            ..Default::default()
        },
        11,
    )
    .unwrap();
    let cfg = CString::new("steps = 4").unwrap();
    let mut sim = ptr::null_mut();
    unsafe {
        assert_eq!(hm_simulation_new(cfg.as_ptr(), 11, &mut sim), HmStatus::Ok);
        for _ in 0..4 {
            assert_eq!(hm_simulation_step(sim, ptr::null_mut()), HmStatus::Ok);
        }
        let mut prices = [0.0; 3];
        hm_simulation_prices(sim, prices.as_mut_ptr(), 3);
        assert_eq!(prices.to_vec(), out.records[3].prices);
        hm_simulation_free(sim);
    }
}

#[test]
fn config_errors_map_to_status() {
    let bad = CString::new("numAgents = 40").unwrap();
    let mut sim = ptr::null_mut();
    unsafe {
        assert_eq!(hm_simulation_new(bad.as_ptr(), 0, &mut sim), HmStatus::Parse);
        assert!(sim.is_null());
        assert!(last_error().contains("numAgents"));

        let invalid = CString::new("fundamentalists = 3").unwrap();
        assert_eq!(hm_simulation_new(invalid.as_ptr(), 0, &mut sim), HmStatus::Config);

        assert_eq!(
            hm_simulation_new(ptr::null(), 0, ptr::null_mut()),
            HmStatus::NullPointer
        );
        assert_eq!(
            hm_simulation_step(ptr::null_mut(), ptr::null_mut()),
            HmStatus::NullPointer
        );
        assert_eq!(hm_simulation_assets(ptr::null()), 0);
        hm_simulation_free(ptr::null_mut());
    }
}

#[test]
fn run_to_dir_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let cfg = CString::new("steps = 600").unwrap();
    let status = unsafe { hm_run_to_dir(cfg.as_ptr(), 0, out.as_ptr()) };
    assert_eq!(status, HmStatus::Ok, "{}", last_error());
    let ts = std::fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
    assert_eq!(ts.lines().count(), 1 + 600 * 3);
    assert!(dir.path().join("stylized.csv").exists());
}

#[test]
fn stylized_summary() {
    let series: Vec<f64> = (0..600).map(|k| ((k * 7919) % 101) as f64 / 100.0 - 0.5).collect();
    let mut s = HmStylizedSummary::default();
    unsafe {
        assert_eq!(hm_stylized_report(series.as_ptr(), series.len(), &mut s), HmStatus::Ok);
        assert_eq!(s.n, 600);
        assert!(s.sd > 0.0 && s.kurtosis >= 1.0);
        assert_eq!(hm_stylized_report(series.as_ptr(), 10, &mut s), HmStatus::Stats);
    }
}

#[test]
fn header_declares_exports() {
    let header = include_str!("../include/hetmarket.h");
    for sym in [
        "hm_simulation_new",
        "hm_simulation_free",
        "hm_simulation_step",
        "hm_simulation_prices",
        "hm_simulation_wealth_shares",
        "hm_run_to_dir",
        "hm_stylized_report",
        "hm_last_error_message",
        "typedef struct HmSimulation HmSimulation",
        "HM_STATUS_OK = 0",
    ] {
        assert!(header.contains(sym), "missing {sym}");
    }
}

/// Builds examples/smoke.c against the generated header and static library.
#[test]
fn c_consumer_links_and_runs() {
    let Ok(probe) = std::process::Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    if !probe.status.success() {
        return;
    }
    let crate_dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap();
    let lib = profile_dir.join("libhetmarket_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let status = std::process::Command::new("cc")
        .args(["-std=c11", "-Wall", "-Werror"])
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(crate_dir.join("examples/smoke.c"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = std::process::Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("step 10 prices"));
}
