use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hetmarket::output::{SWEEP_RUNS_HEADER, SWEEP_SUMMARY_HEADER, TIMESERIES_HEADER};

fn hetmarket(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetmarket"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_reproducible_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = hetmarket(&["run", "--seed", "0", "--out", s(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let ts = fs::read_to_string(a.join("timeseries.csv")).unwrap();
    let mut lines = ts.lines();
    assert_eq!(lines.next(), Some(TIMESERIES_HEADER));
    assert_eq!(lines.count(), 3000);
    for f in ["timeseries.csv", "stylized.csv", "acf.csv"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn config_file_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "steps = 600\nseed = 4\n").unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(hetmarket(&["run", "--config", s(&cfg), "--out", s(&a)])
        .status
        .success());
    assert!(hetmarket(&["run", "--config", s(&cfg), "--seed", "4", "--out", s(&b)])
        .status
        .success());
    let ts = fs::read_to_string(a.join("timeseries.csv")).unwrap();
    assert_eq!(ts.lines().count(), 1 + 1800);
    assert_eq!(ts, fs::read_to_string(b.join("timeseries.csv")).unwrap());
}

#[test]
fn unknown_config_key_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "numAgents = 40\n").unwrap();
    let o = hetmarket(&["run", "--config", s(&cfg), "--out", s(&dir.path().join("x"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("numAgents"), "{}", stderr(&o));
    assert!(!dir.path().join("x").exists());

    fs::write(&cfg, "fundamentalists = 10\n").unwrap();
    let o = hetmarket(&["run", "--config", s(&cfg), "--out", s(&dir.path().join("x"))]);
    assert!(!o.status.success());
}

#[test]
fn small_sweep_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "steps = 100\n").unwrap();
    let spec = dir.path().join("sweep.toml");
    fs::write(
        &spec,
        "intervals = [[0.1, 0.5], [0.5, 1.0]]\ntau_values = [20.0, 60.0]\nseeds_per_cell = 2\n",
    )
    .unwrap();
    let out = dir.path().join("sweep");
    let o = hetmarket(&[
        "sweep",
        "--config",
        s(&cfg),
        "--spec",
        s(&spec),
        "--out",
        s(&out),
        "--workers",
        "2",
    ]);
    let summary = fs::read_to_string(out.join("sweep_summary.csv")).unwrap();
    let runs = fs::read_to_string(out.join("sweep_runs.csv")).unwrap();
    assert_eq!(summary.lines().next(), Some(SWEEP_SUMMARY_HEADER));
    assert_eq!(summary.lines().count(), 1 + 4);
    assert_eq!(runs.lines().next(), Some(SWEEP_RUNS_HEADER));
    assert_eq!(runs.lines().count(), 1 + 8);
    // Exit status reports whether every replicate cleared.
    let failed = runs.lines().skip(1).filter(|l| !l.ends_with(',')).count();
    assert_eq!(o.status.success(), failed == 0, "{}", stderr(&o));

    let again = dir.path().join("again");
    hetmarket(&[
        "sweep",
        "--config",
        s(&cfg),
        "--spec",
        s(&spec),
        "--out",
        s(&again),
        "--workers",
        "1",
    ]);
    assert_eq!(runs, fs::read_to_string(again.join("sweep_runs.csv")).unwrap());
}

#[test]
fn stats_accepts_every_layout() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    assert!(hetmarket(&["run", "--seed", "0", "--out", s(&run_dir)])
        .status
        .success());

    let o = hetmarket(&[
        "stats",
        "--input",
        s(&run_dir.join("timeseries.csv")),
        "--out",
        s(&dir.path().join("s1")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let st = fs::read_to_string(dir.path().join("s1/stylized.csv")).unwrap();
    assert_eq!(st.lines().count(), 1 + 3);

    let returns: String = (0..800)
        .map(|k| format!("{}\n", ((k * 37 % 101) as f64 - 50.0) * 1e-4))
        .collect();
    let single = dir.path().join("returns.txt");
    fs::write(&single, returns).unwrap();
    let o = hetmarket(&["stats", "--input", s(&single), "--out", s(&dir.path().join("s2"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("series"));

    let prices = reference_prices(700);
    let reference = dir.path().join("ref.csv");
    fs::write(&reference, &prices).unwrap();
    let o = hetmarket(&["stats", "--input", s(&reference), "--out", s(&dir.path().join("s3"))]);
    assert!(o.status.success(), "{}", stderr(&o));

    let o = hetmarket(&[
        "compare",
        "--sim-run",
        s(&run_dir),
        "--reference",
        s(&reference),
        "--out",
        s(&dir.path().join("c")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let st = fs::read_to_string(dir.path().join("c/stylized.csv")).unwrap();
    assert_eq!(st.lines().count(), 1 + 4);
    assert!(st.lines().any(|l| l.starts_with("reference,699,")));
}

#[test]
fn bad_inputs_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let o = hetmarket(&["stats", "--input", s(&missing), "--out", s(&dir.path().join("o"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("nope.csv"));

    let short = dir.path().join("short.csv");
    fs::write(&short, "date,close\n2020-01-01,10\n2020-01-02,11\n").unwrap();
    let o = hetmarket(&["stats", "--input", s(&short), "--out", s(&dir.path().join("o"))]);
    assert!(!o.status.success());

    assert!(!hetmarket(&["run"]).status.success());
    assert!(!hetmarket(&["frobnicate"]).status.success());
}

fn reference_prices(days: usize) -> String {
    let mut out = String::from("date,close\n");
    let mut p = 100.0f64;
    for k in 0..days {
        p *= 1.0 + ((k * 7919 % 97) as f64 - 48.0) * 2e-4;
        let (y, d) = (2000 + k / 300, k % 300);
        out.push_str(&format!("{y}-{:02}-{:02},{p:.4}\n", 1 + d / 28, 1 + d % 28));
    }
    out
}
