use hetmarket::config::SimConfig;
use hetmarket::model::AgentKind;
use hetmarket::simulator::{run, Simulation};

fn short(steps: usize) -> SimConfig {
    SimConfig {
        steps,
        ..Default::default()
    }
}

/// One agent type, near-identical parameters, no dividend noise.
fn noiseless_fundamentalists(steps: usize) -> SimConfig {
    SimConfig {
        fundamentalists: 40,
        chartists: 0,
        dividend_growth_stdev: 0.0,
        // A zero starting variance leaves only the ridge in the covariance.
        initial_variance: Some(1e-4),
        mean_reversion_min: 0.75,
        mean_reversion_max: 0.75 + 1e-12,
        tau_min: 50.0,
        tau_max: 50.0 + 1e-9,
        correlation_min: 0.3,
        correlation_max: 0.3 + 1e-12,
        steps,
        ..Default::default()
    }
}

#[test]
fn same_seed_is_bit_identical() {
    let a = run(&short(200), 0).unwrap();
    let b = run(&short(200), 0).unwrap();
    assert_eq!(a, b);
    let bits = |o: &hetmarket::simulator::RunOutput| -> Vec<u64> {
        o.records
            .iter()
            .flat_map(|r| r.prices.iter().map(|p| p.to_bits()))
            .collect()
    };
    assert_eq!(bits(&a), bits(&b));
    assert_ne!(a.records, run(&short(200), 1).unwrap().records);
}

#[test]
fn stepping_matches_full_run() {
    let cfg = short(50);
    let full = run(&cfg, 3).unwrap();
    let mut sim = Simulation::new(&cfg, 3).unwrap();
    for rec in &full.records {
        assert_eq!(&sim.step().unwrap(), rec);
    }
    assert_eq!(sim.step_index(), 50);
}

#[test]
fn initial_split_is_even() {
    let sim = Simulation::new(&SimConfig::default(), 0).unwrap();
    let shares = hetmarket::simulator::wealth_shares(&sim.wealth(), &sim.kinds()).unwrap();
    assert_eq!(shares, (0.5, 0.5));
}

#[test]
fn noiseless_prices_track_fundamental() {
    // Beyond a few hundred steps the vanishing forecast errors shrink the
    // variance towards zero and demand becomes a step function.
    let out = run(&noiseless_fundamentalists(300), 0).unwrap();
    let growth = 1.001;
    let mut fundamental = 10.0;
    for rec in &out.records {
        fundamental *= growth;
        for (p, f) in rec.prices.iter().zip(&rec.fundamentals) {
            assert!((f / fundamental - 1.0).abs() < 1e-12);
            assert!((p / f - 1.0).abs() < 1e-3, "step {}: {p} vs {f}", rec.step);
        }
        assert_eq!(rec.share_f, 1.0);
        assert_eq!(rec.floored_shocks, 0);
    }
    let w = &out.final_wealth;
    let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = w.iter().cloned().fold(0.0, f64::max);
    assert!((hi - lo) / lo < 1e-9, "wealth spread {lo}..{hi}");
}

#[test]
fn noiseless_dividends_grow_deterministically() {
    let out = run(&noiseless_fundamentalists(20), 0).unwrap();
    let mut d = 0.002;
    for rec in &out.records {
        d *= 1.001;
        assert!(rec.dividends.iter().all(|x| (x / d - 1.0).abs() < 1e-12));
    }
}

#[test]
fn fundamental_and_dividend_share_each_shock() {
    let out = run(&short(300), 0).unwrap();
    let mut prev_d = vec![0.002; 3];
    let mut prev_f = vec![10.0; 3];
    for rec in &out.records {
        for i in 0..3 {
            let rd = rec.dividends[i] / prev_d[i];
            let rf = rec.fundamentals[i] / prev_f[i];
            assert!((rd - rf).abs() <= 4.0 * f64::EPSILON, "step {} asset {i}", rec.step);
        }
        prev_d.clone_from(&rec.dividends);
        prev_f.clone_from(&rec.fundamentals);
    }
}

#[test]
fn dividend_growth_has_configured_mean() {
    let out = run(&short(1000), 0).unwrap();
    let mut factors = Vec::new();
    let mut prev = vec![0.002; 3];
    for rec in &out.records {
        factors.extend(rec.dividends.iter().zip(&prev).map(|(d, p)| d / p - 1.0));
        prev.clone_from(&rec.dividends);
    }
    let n = factors.len() as f64;
    let mean = factors.iter().sum::<f64>() / n;
    let sd = (factors.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((mean - 0.001).abs() < 4.0 * 0.01 / n.sqrt(), "mean {mean}");
    assert!((sd - 0.01).abs() < 0.001, "sd {sd}");
}

#[test]
fn accounting_identities_hold() {
    let out = run(&short(1000), 0).unwrap();
    let supply = 40.0;
    for rec in &out.records {
        assert!((rec.share_f + rec.share_c - 1.0).abs() <= 1e-12);
        for z in &rec.share_totals {
            assert!((z - supply).abs() <= 1e-6, "step {}: {z}", rec.step);
        }
        let total = rec.wealth_f + rec.wealth_c;
        let gap = rec.wealth_change - rec.accounting_change - rec.written_off;
        assert!(gap.abs() <= 1e-8 * total, "step {}: gap {gap}", rec.step);
        assert!(rec.clearing_residual <= 1e-6);
    }
}

#[test]
fn pinned_chartist_tau_leaves_other_draws_alone() {
    let free = Simulation::new(&SimConfig::default(), 9).unwrap();
    let pinned = Simulation::new(
        &SimConfig {
            chartist_tau: Some(35.0),
            ..Default::default()
        },
        9,
    )
    .unwrap();
    for (a, b) in free.traders().iter().zip(pinned.traders()) {
        assert_eq!(a.profile.kind, b.profile.kind);
        assert_eq!(a.profile.mean_reversion, b.profile.mean_reversion);
        assert_eq!(a.profile.correlation(), b.profile.correlation());
        match a.profile.kind {
            AgentKind::Fundamentalist => assert_eq!(a.profile.ema_period, b.profile.ema_period),
            AgentKind::Chartist => assert_eq!(b.profile.ema_period, 35.0),
        }
        assert!((20.0..80.0).contains(&a.profile.ema_period));
        assert!((0.5..1.0).contains(&a.profile.mean_reversion));
    }
}

#[test]
fn invalid_population_is_rejected() {
    let cfg = SimConfig {
        fundamentalists: 10,
        ..Default::default()
    };
    assert!(Simulation::new(&cfg, 0).is_err());
    let cfg = SimConfig {
        steps: 0,
        ..Default::default()
    };
    assert!(Simulation::new(&cfg, 0).is_err());
}
