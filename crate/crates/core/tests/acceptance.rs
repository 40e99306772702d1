//! Acceptance suite. Each test prints one PASS/FAIL line per criterion and
//! then asserts it, so `cargo test --test acceptance -- --nocapture` doubles
//! as a report.

use std::f64::consts::PI;
use std::time::Instant;

use opotwin::analysis::{fit_threshold, GainPoint};
use opotwin::apparatus::DriftModel;
use opotwin::config::RunConfig;
use opotwin::control::{optimize_temperatures, run_lock, TempOptimizer};
use opotwin::optics::{
    apply_passive_loss, gain_from_minmax, parametric_gain, pump_for_gain, quadrature_noise,
    threshold_from, threshold_power, CavityParams, Quadrature, ThermalState, TuningResponse,
};
use opotwin::runs::{locked_bench, noise_scan, squeeze_run};
use opotwin::session::{replay, Session, SessionMessage};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;

fn verdict(name: &str, ok: bool, detail: String) -> bool {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn db(v: f64) -> f64 {
    10.0 * v.log10()
}

fn lin(d: f64) -> f64 {
    10f64.powf(d / 10.0)
}

#[test]
fn threshold_consistency() {
    let p = threshold_from(0.14, 0.31, 7.43e-4).unwrap();
    let ok = verdict(
        "threshold consistency",
        (p * 1e3 - 870.0).abs() <= 1.0,
        format!("{:.2} mW, want 870 ± 1 mW", p * 1e3),
    );
    assert!(ok);
}

#[test]
fn gain_curve_fit_monte_carlo() {
    const P_TH: f64 = 0.87;
    let pumps = RunConfig::default().gain_curve.pumps_w;
    let noise = Normal::new(0.0, 0.02).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let started = Instant::now();
    let mut fits = Vec::with_capacity(1000);
    for _ in 0..1000 {
        let pts: Vec<GainPoint> = pumps
            .iter()
            .map(|&p| {
                let g = (1.0 - (p / P_TH).sqrt()).powi(-2);
                GainPoint {
                    pump_w: p,
                    gain: g * (1.0 + noise.sample(&mut rng)),
                }
            })
            .collect();
        fits.push(fit_threshold(&pts).map(|f| f.p_th).unwrap_or(f64::NAN));
    }
    let elapsed = started.elapsed().as_secs_f64();
    let worst = fits.iter().map(|p| (p - P_TH).abs()).fold(0.0, f64::max);
    let mean = fits.iter().sum::<f64>() / fits.len() as f64;
    let sd = (fits.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (fits.len() - 1) as f64).sqrt();
    let outside = fits.iter().filter(|p| (*p - P_TH).abs() > 0.02).count();
    // Cramér-Rao floor: d ln G / d ln P_th = -u/(1-u) with u = sqrt(P/P_th)
    let info: f64 = pumps
        .iter()
        .map(|&p| {
            let u = (p / P_TH).sqrt();
            (u / (1.0 - u)).powi(2)
        })
        .sum();
    let crb = P_TH * 0.02 / info.sqrt();
    let ok = verdict(
        "gain-curve fit",
        worst <= 0.02 && elapsed < 10.0,
        format!(
            "worst trial {worst:.4} W from 0.87, {outside}/1000 outside ± 0.02 W; \
             mean {mean:.4}, sd {sd:.4} (bound {crb:.4}); {elapsed:.2} s"
        ),
    );
    assert!(ok);
}

#[test]
fn squeezing_prediction() {
    let mu = 1.0 - 1.4f64.sqrt().recip();
    let sq = db(quadrature_noise(0.0, 125.0, mu, 0.75, Quadrature::Squeezed).unwrap());
    let asq = db(quadrature_noise(0.0, 125.0, mu, 0.75, Quadrature::Antisqueezed).unwrap());
    let ok = verdict(
        "squeezing prediction",
        (sq + 1.86).abs() <= 0.01 && (asq - 2.18).abs() <= 0.01,
        format!("{sq:.3} / +{asq:.3} dB, want -1.86 / +2.18 ± 0.01 dB"),
    );
    assert!(ok);
}

/// Clearance implied by one raw/corrected pair, as the ratio of shot to
/// electronic noise.
fn implied_clearance(raw_db: f64, corrected_db: f64) -> f64 {
    let (r, v) = (lin(raw_db), lin(corrected_db));
    (r - 1.0) / (v - r)
}

#[test]
fn end_to_end_squeezing_run() {
    let cfg = RunConfig::default();
    let started = Instant::now();
    let scan = noise_scan(&cfg, &cfg.noise_scan.lo_mw).unwrap();
    let run = squeeze_run(&cfg, &cfg.squeeze).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    let r = run.result;
    let scan_clearance = scan.fit.as_ref().unwrap().clearance_at(cfg.squeeze.lo_mw);

    let raw_ok = (r.raw_sq_db + 1.0).abs() <= 0.1 && (r.raw_asq_db - 1.2).abs() <= 0.1;
    let cor_ok = (r.corrected_sq_db + 1.6).abs() <= 0.1 && (r.corrected_asq_db - 1.7).abs() <= 0.1;
    let c = implied_clearance(r.raw_sq_db, r.corrected_sq_db);
    let predicted_asq = db(lin(r.raw_asq_db) * (1.0 + 1.0 / c) - 1.0 / c);
    let consistency = (predicted_asq - r.corrected_asq_db).abs();
    let same_fit = (r.clearance - scan_clearance).abs() <= 0.05 * scan_clearance;

    let mut ok = verdict(
        "end-to-end squeezing run (raw)",
        raw_ok && elapsed < 60.0,
        format!(
            "{:.3} / +{:.3} dB, want -1.0 / +1.2 ± 0.1 dB; {elapsed:.1} s",
            r.raw_sq_db, r.raw_asq_db
        ),
    );
    ok &= verdict(
        "end-to-end squeezing run (corrected)",
        cor_ok && same_fit,
        format!(
            "{:.3} / +{:.3} dB, want -1.6 / +1.7 ± 0.1 dB; clearance {:.3} vs noise scan {:.3}",
            r.corrected_sq_db, r.corrected_asq_db, r.clearance, scan_clearance
        ),
    );
    ok &= verdict(
        "end-to-end squeezing run (correction consistency)",
        consistency <= 0.02,
        format!("one clearance maps both pairs to within {consistency:.4} dB, want ≤ 0.02 dB"),
    );
    assert!(ok);
}

#[test]
fn attenuator_check() {
    let cfg = RunConfig::default();
    let mut s = cfg.squeeze;
    s.filter_transmission = Some(0.5);
    let run = squeeze_run(&cfg, &s).unwrap();
    let sq = run.result.raw_sq_db;
    let shift = run.baseline_shift_db.abs();
    let ok = verdict(
        "attenuator check",
        (sq + 0.47).abs() <= 0.05 && shift < 0.05,
        format!("raw {sq:.3} dB (want -0.47 ± 0.05), baseline shift {shift:.4} dB (want < 0.05)"),
    );
    assert!(ok);
}

#[test]
fn noise_scan_calibration() {
    let cfg = RunConfig::default();
    let scan = noise_scan(&cfg, &cfg.noise_scan.lo_mw).unwrap();
    let fit = scan.fit.as_ref().unwrap();
    let offset_err = (fit.offset_dbm + 70.75).abs();
    let resid = fit.max_residual_db(&scan.points, 3.0);
    let top = scan.points.iter().map(|p| p.lo_mw).fold(0.0, f64::max);
    let ok = verdict(
        "noise-scan calibration",
        offset_err <= 0.1 && resid < 0.1 && top >= 3.0,
        format!(
            "offset {:.3} dBm (want -70.75 ± 0.1), max residual {resid:.4} dB up to {top} mW",
            fit.offset_dbm
        ),
    );
    assert!(ok);
}

/// Worst |detuning| after the walk has settled, and whether lock held.
fn ramp_lock(ramp: f64, seconds: f64) -> (f64, bool, f64) {
    let cfg = RunConfig::default();
    let mut bench = locked_bench(&cfg).unwrap();
    bench.apparatus_mut().set_drift(DriftModel {
        ramp_mhz_per_s: ramp,
        ..cfg.drift
    });
    let samples = run_lock(&mut bench, seconds).unwrap();
    let settled = &samples[samples.len() / 10..];
    let worst = settled.iter().map(|s| s.detuning_mhz).fold(0.0, f64::max);
    let held = samples.iter().all(|s| s.locked);
    (worst, held, samples.last().unwrap().detuning_mhz)
}

#[test]
fn lock_robustness() {
    let s = RunConfig::default().lock;
    // the walk can follow at most one step per window
    let slew = s.step_mhz / s.period_s;
    let started = Instant::now();
    let (up, up_held, _) = ramp_lock(5.0, 300.0);
    let (down, down_held, _) = ramp_lock(-5.0, 300.0);
    let (_, fast_held, fast_end) = ramp_lock(40.0, 60.0);
    let elapsed = started.elapsed().as_secs_f64();

    let mut ok = verdict(
        "lock robustness (5 MHz/s)",
        up < 25.0 && down < 25.0 && up_held && down_held && slew > 5.0,
        format!("worst |detuning| {up:.2} / {down:.2} MHz over 300 s each way, want < 25 MHz"),
    );
    ok &= verdict(
        "lock robustness (40 MHz/s)",
        !fast_held && fast_end > 1000.0 && slew < 40.0 && elapsed < 30.0,
        format!(
            "lock lost, detuning {fast_end:.0} MHz after 60 s; slew limit {slew} MHz/s; {elapsed:.1} s wall"
        ),
    );
    assert!(ok);
}

#[test]
fn property_uncertainty_product_and_closure() {
    let mut worst_product = 0.0f64;
    for k in 1..=95 {
        let mu = k as f64 / 100.0;
        let sq = quadrature_noise(0.0, 125.0, mu, 1.0, Quadrature::Squeezed).unwrap();
        let asq = quadrature_noise(0.0, 125.0, mu, 1.0, Quadrature::Antisqueezed).unwrap();
        worst_product = worst_product.max((sq * asq - 1.0).abs());
    }
    let p_th = threshold_power(&CavityParams::default()).unwrap();
    let mut worst_closure = 0.0f64;
    for k in 0..200 {
        let p = p_th * 0.99 * k as f64 / 200.0;
        let mu = (p / p_th).sqrt();
        // amplified and deamplified seed powers for unit input
        let g = gain_from_minmax((1.0 - mu).powi(-2), (1.0 + mu).powi(-2)).unwrap();
        let direct = parametric_gain(p, p_th).unwrap();
        worst_closure = worst_closure
            .max((g - direct).abs() / direct)
            .max((pump_for_gain(direct, p_th).unwrap() - p).abs() / p_th);
    }
    let mut ok = verdict(
        "property: uncertainty product",
        worst_product < 1e-12,
        format!("|S-·S+ - 1| ≤ {worst_product:.1e} over mu = 0.01..0.95"),
    );
    ok &= verdict(
        "property: extrema/pump gain closure",
        worst_closure < 1e-9,
        format!("worst relative mismatch {worst_closure:.1e}, want < 1e-9"),
    );
    assert!(ok);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn property_squeezing_floor(mu in 0.0f64..0.999, eta in 0.0f64..=1.0, omega in 0.0f64..1000.0) {
        let v = quadrature_noise(omega, 125.0, mu, eta, Quadrature::Squeezed).unwrap();
        prop_assert!(v >= 1.0 - eta - 1e-12);
    }

    #[test]
    fn property_loss_composition(v in 0.01f64..50.0, t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0) {
        let twice = apply_passive_loss(apply_passive_loss(v, t1).unwrap(), t2).unwrap();
        let once = apply_passive_loss(v, t1 * t2).unwrap();
        prop_assert!((twice - once).abs() <= 1e-12 * v.max(1.0));
    }
}

#[test]
fn property_squeezing_floor_and_loss_composition() {
    // the proptests above carry the assertions; this line keeps the report complete
    let mut runner = proptest::test_runner::TestRunner::new(ProptestConfig::with_cases(2000));
    let floor = runner.run(&(0.0f64..0.999, 0.0f64..=1.0, 0.0f64..1000.0), |(mu, eta, omega)| {
        let v = quadrature_noise(omega, 125.0, mu, eta, Quadrature::Squeezed).unwrap();
        prop_assert!(v >= 1.0 - eta - 1e-12);
        Ok(())
    });
    let compose = runner.run(&(0.01f64..50.0, 0.0f64..=1.0, 0.0f64..=1.0), |(v, t1, t2)| {
        let twice = apply_passive_loss(apply_passive_loss(v, t1).unwrap(), t2).unwrap();
        prop_assert!((twice - apply_passive_loss(v, t1 * t2).unwrap()).abs() <= 1e-12 * v.max(1.0));
        Ok(())
    });
    let mut ok = verdict(
        "property: squeezed variance ≥ 1-η",
        floor.is_ok(),
        format!("2000 random (mu, eta, omega): {:?}", floor.err()),
    );
    ok &= verdict(
        "property: loss-map composition",
        compose.is_ok(),
        format!("2000 random (v, t1, t2): {:?}", compose.err()),
    );
    assert!(ok);
}

#[test]
fn property_replay_byte_equality() {
    let cfg = RunConfig::default();
    let line = |name: &str, seq: u64, p: serde_json::Value| SessionMessage::command(name, seq, p).to_line();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut mismatches = 0;
    let mut compared = 0;
    for trial in 0..4u64 {
        let mut s = Session::new(&RunConfig {
            rng_seed: trial,
            ..cfg.clone()
        })
        .unwrap();
        let mut live = Vec::new();
        let script = [
            line("set_lo_power", 1, json!({"mw": 2.5})),
            line("engage_lock", 2, json!({})),
            line("set_pump_power", 3, json!({"watts": 0.02})),
            "not json".to_owned(),
            line("set_temperatures", 4, json!({"diff": 1.0})),
            line("stop_sweep", 5, json!({"phase_rad": PI / 2.0})),
            line("insert_filter", 6, json!({"transmission": 0.5})),
        ];
        for cmd in &script {
            let gap = rand::Rng::random_range(&mut rng, 0..400);
            live.extend(s.advance(gap));
            live.push(s.handle_line(cmd));
        }
        live.extend(s.advance(250));
        let again = replay(
            &RunConfig {
                rng_seed: trial,
                ..cfg.clone()
            },
            s.journal(),
            s.tick(),
        )
        .unwrap();
        let a: String = live.iter().map(|m| m.to_line() + "\n").collect();
        let b: String = again.iter().map(|m| m.to_line() + "\n").collect();
        compared += a.len();
        if a != b {
            mismatches += 1;
        }
    }
    let ok = verdict(
        "property: deterministic replay",
        mismatches == 0,
        format!("4 randomized sessions, {compared} bytes compared, {mismatches} mismatching"),
    );
    assert!(ok);
}

/// Tuning factor written out from the physical model, independent of the
/// library: sinc² phase matching, Lorentzian pump resonance, cos² interference.
fn oracle_tuning(active: f64, sum: f64, diff: f64, r: &TuningResponse) -> f64 {
    let x = PI * (active - r.active_opt) / r.phase_match_width;
    let pm = if x == 0.0 { 1.0 } else { (x.sin() / x).powi(2) };
    let rs = 1.0 / (1.0 + ((sum - r.sum_opt) / r.resonance_width).powi(2));
    let it = (PI * (diff - r.diff_opt) / r.interference_period).cos().powi(2);
    pm * rs * it
}

#[test]
fn temperature_optimization() {
    let mut cfg = RunConfig::default();
    let r = cfg.tuning;
    let p_th = threshold_power(&cfg.cavity).unwrap();
    let pump = pump_for_gain(1.4, p_th).unwrap();
    let start = ThermalState::from_sum_diff(r.active_opt, r.sum_opt + 0.1, r.diff_opt + 0.2);
    cfg.initial.thermal = start;

    // grid-scan oracle over the two side-heater coordinates
    let gain = |f: f64| (1.0 - (pump * f / p_th).sqrt()).powi(-2);
    let mut oracle = 0.0f64;
    for i in 0..=400 {
        for j in 0..=400 {
            let sum = start.sum() - 1.0 + 2.0 * i as f64 / 400.0;
            let diff = start.diff() - 1.0 + 2.0 * j as f64 / 400.0;
            oracle = oracle.max(gain(oracle_tuning(start.active, sum, diff, &r)));
        }
    }

    let mut bench = locked_bench(&cfg).unwrap();
    let mut opt = TempOptimizer::new(cfg.optimizer).unwrap();
    let res = optimize_temperatures(&mut bench, &mut opt, pump);
    let held = bench.lock_state().is_locked();
    let (reached, detail) = match &res {
        Ok(o) => {
            let g = gain(oracle_tuning(o.thermal.active, o.sum(), o.diff(), &r));
            (
                g / oracle,
                format!(
                    "gain {g:.4} of oracle {oracle:.4} ({:.2}%), from {:.4}; probes {:?}",
                    100.0 * g / oracle,
                    gain(oracle_tuning(start.active, start.sum(), start.diff(), &r)),
                    o.probes_per_stage
                ),
            )
        }
        Err(e) => (0.0, format!("optimizer failed: {e}")),
    };
    let ok = verdict("temperature optimization", reached >= 0.99 && held, format!("{detail}; lock held: {held}"));
    assert!(ok);
}
