//! Batch runs that reproduce the calibration and squeezing measurements:
//! gain versus pump power, noise versus LO power, and the phase-swept
//! squeezing record with and without an attenuator.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::io::{write_gain_points, write_noise_points};
use crate::analysis::{
    fit_phase_sinusoid, fit_shot_noise, fit_threshold, to_db, AnalysisError, GainPoint,
    NoisePoint, Report, ShotNoiseFit, SqueezeResult, ThresholdFit,
};
use crate::apparatus::{lo_power_scan, MemsMode, MemsPosition, NoiseTrace, SimError};
use crate::bench::Bench;
use crate::config::{ConfigError, RunConfig, SqueezeSettings};
use crate::control::{optimize_temperatures, ControlError, TempOptimization, TempOptimizer};
use crate::optics::ThermalState;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl From<SimError> for RunError {
    fn from(e: SimError) -> Self {
        RunError::Control(e.into())
    }
}

impl RunError {
    /// Whether the run failed inside the simulation rather than on its
    /// inputs.
    pub fn is_fault(&self) -> bool {
        matches!(
            self,
            RunError::Control(
                ControlError::Sim(SimError::Fault { .. })
                    | ControlError::LockLost { .. }
                    | ControlError::AcquisitionFailed { .. }
            )
        )
    }
}

pub type Result<T> = std::result::Result<T, RunError>;

/// A bench with the lock acquired and settled onto resonance.
pub fn locked_bench(cfg: &RunConfig) -> Result<Bench> {
    let mut bench = Bench::new(cfg.apparatus(), cfg.lock, cfg.extrema)?;
    bench.engage_lock()?;
    let acq = cfg.lock.acquisition;
    let scan_windows = (2.0 * acq.range_mhz / acq.coarse_step_mhz).ceil() as usize + 1;
    for _ in 0..2 * scan_windows + 2 {
        if bench.lock_state().is_locked() {
            break;
        }
        bench.next_window()?;
    }
    if !bench.lock_state().is_locked() {
        return Err(ControlError::AcquisitionFailed {
            range_mhz: acq.range_mhz,
        }
        .into());
    }
    bench.run_for(cfg.squeeze.lock_settle_s)?;
    if !bench.lock_state().is_locked() {
        return Err(ControlError::LockLost {
            time_s: bench.clock(),
            transmission: bench.last_window().map_or(0.0, |w| w.transmission_mw)
                / bench.acquisition_peak_mw(),
        }
        .into());
    }
    Ok(bench)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointError {
    pub pump_w: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainCurveRun {
    pub points: Vec<GainPoint>,
    pub errors: Vec<PointError>,
    pub fit: std::result::Result<ThresholdFit, AnalysisError>,
    /// Set when the lock failed and the remaining pump powers were skipped.
    pub aborted: Option<String>,
}

impl GainCurveRun {
    pub fn report(&self) -> Report {
        let mut r = Report::new();
        r.push("run", "gain_curve").push("points", self.points.len());
        match &self.fit {
            Ok(f) => {
                r.push("p_th_w", f.p_th).push("rms_residual", f.rms_residual);
            }
            Err(e) => {
                r.push("fit_error", e.to_string());
            }
        }
        let errs: Vec<String> = self
            .errors
            .iter()
            .map(|e| format!("{} W: {}", e.pump_w, e.message))
            .collect();
        r.push("point_errors", errs);
        if let Some(a) = &self.aborted {
            r.push("aborted", a.clone());
        }
        r
    }
}

/// Measures the gain at each pump power with the lock running, then fits
/// the threshold. Per-point failures are recorded and the curve continues;
/// a lock failure ends the curve with the points gathered so far.
pub fn gain_curve(cfg: &RunConfig, pumps_w: &[f64]) -> Result<GainCurveRun> {
    cfg.validate()?;
    let mut bench = locked_bench(cfg)?;
    let threshold = bench.apparatus().threshold_w();
    let mut points = Vec::new();
    let mut errors = Vec::new();
    let mut aborted = None;
    for &p in pumps_w {
        if p >= threshold {
            errors.push(PointError {
                pump_w: p,
                message: format!("pump {p} W is at or above the threshold {threshold:.4} W"),
            });
            continue;
        }
        match gain_point(&mut bench, cfg, p) {
            Ok(g) => points.push(GainPoint { pump_w: p, gain: g }),
            Err(e @ (ControlError::LockLost { .. } | ControlError::Sim(SimError::Fault { .. }))) => {
                errors.push(PointError {
                    pump_w: p,
                    message: e.to_string(),
                });
                aborted = Some(e.to_string());
                break;
            }
            Err(e) => errors.push(PointError {
                pump_w: p,
                message: e.to_string(),
            }),
        }
    }
    let fit = fit_threshold(&points);
    Ok(GainCurveRun {
        points,
        errors,
        fit,
        aborted,
    })
}

fn gain_point(bench: &mut Bench, cfg: &RunConfig, pump_w: f64) -> std::result::Result<f64, ControlError> {
    bench.apparatus_mut().set_pump_power(pump_w)?;
    if cfg.gain_curve.optimize {
        let mut opt = TempOptimizer::new(cfg.optimizer)?;
        match optimize_temperatures(bench, &mut opt, pump_w) {
            Ok(_) | Err(ControlError::FlatGain { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    bench.next_window()?;
    bench.measure_gain(cfg.gain_curve.windows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseScanRun {
    pub points: Vec<NoisePoint>,
    pub fit: std::result::Result<ShotNoiseFit, AnalysisError>,
    pub linear_tolerance_db: f64,
}

impl NoiseScanRun {
    pub fn report(&self) -> Report {
        let mut r = Report::new();
        r.push("run", "noise_scan").push("points", self.points.len());
        match &self.fit {
            Ok(f) => {
                let top = self.points.iter().map(|p| p.lo_mw).fold(0.0, f64::max);
                r.push("electronic_floor_dbm", f.offset_dbm)
                    .push("shot_noise_mw_per_mw_lo", f.slope)
                    .push(
                        "shot_noise_limited_up_to_mw",
                        f.shot_noise_limited_up_to(&self.points, self.linear_tolerance_db),
                    )
                    .push("max_residual_db", f.max_residual_db(&self.points, top));
            }
            Err(e) => {
                r.push("fit_error", e.to_string());
            }
        }
        r
    }
}

/// Pump-off noise level against LO power and its straight-line fit in
/// linear units.
pub fn noise_scan(cfg: &RunConfig, lo_mw: &[f64]) -> Result<NoiseScanRun> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let points = lo_power_scan(
        lo_mw,
        &cfg.detector,
        &cfg.sa,
        cfg.noise_scan.dwell_s,
        cfg.schedule.tick_s,
        &mut rng,
    );
    let fit = fit_shot_noise(&points);
    Ok(NoiseScanRun {
        points,
        fit,
        linear_tolerance_db: cfg.noise_scan.linear_tolerance_db,
    })
}

/// Average of one LO window after the analyzer has settled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoWindow {
    pub time_s: f64,
    pub phase_rad: f64,
    pub power_mw: f64,
}

/// Splits a trace into LO windows, drops the first `settle_s` of each, and
/// averages the rest in linear units.
pub fn lo_windows(trace: &NoiseTrace, settle_s: f64) -> Vec<LoWindow> {
    let mut out = Vec::new();
    let mut start: Option<f64> = None;
    let (mut n, mut t, mut ph, mut p) = (0usize, 0.0, 0.0, 0.0);
    let mut flush = |n: &mut usize, t: &mut f64, ph: &mut f64, p: &mut f64| {
        if *n > 0 {
            let k = *n as f64;
            out.push(LoWindow {
                time_s: *t / k,
                phase_rad: *ph / k,
                power_mw: *p / k,
            });
        }
        (*n, *t, *ph, *p) = (0, 0.0, 0.0, 0.0);
    };
    for pt in &trace.points {
        match pt.mems {
            MemsPosition::Lo => {
                let s = *start.get_or_insert(pt.time_s);
                if pt.time_s - s >= settle_s - 1e-12 {
                    n += 1;
                    t += pt.time_s;
                    ph += pt.phase_rad;
                    p += pt.power_mw();
                }
            }
            MemsPosition::Seed => {
                if start.take().is_some() {
                    flush(&mut n, &mut t, &mut ph, &mut p);
                }
            }
        }
    }
    flush(&mut n, &mut t, &mut ph, &mut p);
    out
}

fn mean_power(windows: &[LoWindow]) -> std::result::Result<f64, AnalysisError> {
    if windows.is_empty() {
        return Err(AnalysisError::InsufficientData("no settled LO windows in the record".into()));
    }
    Ok(windows.iter().map(|w| w.power_mw).sum::<f64>() / windows.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqueezeRun {
    pub settings: SqueezeSettings,
    pub trace: NoiseTrace,
    pub reference: NoiseTrace,
    pub reference_mw: f64,
    /// Filtered reference over unfiltered, dB; zero without a filter.
    pub baseline_shift_db: f64,
    pub result: SqueezeResult,
    pub noise_fit: ShotNoiseFit,
    pub thermal: ThermalState,
    pub optimization: Option<TempOptimization>,
    pub gain: f64,
}

impl SqueezeRun {
    pub fn report(&self) -> Report {
        let mut r = Report::new();
        r.push("run", "squeeze")
            .push("pump_w", self.settings.pump_w)
            .push("lo_mw", self.settings.lo_mw)
            .push("filter_transmission", self.settings.filter_transmission.unwrap_or(1.0))
            .push("gain", self.gain)
            .push("t_sum_c", self.thermal.sum())
            .push("t_diff_c", self.thermal.diff())
            .push("reference_dbm", 10.0 * self.reference_mw.log10())
            .push("baseline_shift_db", self.baseline_shift_db)
            .push("clearance", self.result.clearance)
            .push("raw_sq_db", self.result.raw_sq_db)
            .push("raw_asq_db", self.result.raw_asq_db)
            .push("corrected_sq_db", self.result.corrected_sq_db)
            .push("corrected_asq_db", self.result.corrected_asq_db);
        r
    }
}

fn record(bench: &mut Bench, seconds: f64) -> Result<NoiseTrace> {
    bench.start_recording();
    let res = bench.run_for(seconds);
    let trace = bench.stop_recording();
    res?;
    Ok(trace)
}

/// Full squeezing measurement: calibrate the detector, lock, optimise the
/// temperatures, record a pump-off shot-noise reference and then the
/// phase-swept squeezed noise, and reduce both to dB levels.
pub fn squeeze_run(cfg: &RunConfig, settings: &SqueezeSettings) -> Result<SqueezeRun> {
    let mut cfg = cfg.clone();
    cfg.squeeze = *settings;
    cfg.validate()?;

    let noise = noise_scan(&cfg, &cfg.noise_scan.lo_mw)?;
    let noise_fit = noise.fit?;
    let clearance = noise_fit.clearance_at(settings.lo_mw);

    let mut bench = locked_bench(&cfg)?;
    let mut optimization = None;
    if settings.optimize && settings.pump_w > 0.0 {
        let mut opt = TempOptimizer::new(cfg.optimizer)?;
        optimization = Some(optimize_temperatures(&mut bench, &mut opt, settings.pump_w)?);
    }

    let app = bench.apparatus_mut();
    app.set_mems_mode(MemsMode::Switching);
    app.set_sweep(true);
    app.set_lo_power(settings.lo_mw)?;
    app.set_filter(None)?;
    app.set_pump_power(0.0)?;

    let open_ref = record(&mut bench, settings.reference_s)?;
    let open_mw = mean_power(&lo_windows(&open_ref, settings.settle_s))?;
    let (reference, reference_mw, baseline_shift_db) = match settings.filter_transmission {
        Some(t) => {
            bench.apparatus_mut().set_filter(Some(t))?;
            let r = record(&mut bench, settings.reference_s)?;
            let mw = mean_power(&lo_windows(&r, settings.settle_s))?;
            (r, mw, to_db(mw / open_mw)?)
        }
        None => (open_ref, open_mw, 0.0),
    };

    bench.apparatus_mut().set_pump_power(settings.pump_w)?;
    let trace = record(&mut bench, settings.duration_s)?;
    if !bench.lock_state().is_locked() {
        return Err(ControlError::LockLost {
            time_s: bench.clock(),
            transmission: bench.last_window().map_or(0.0, |w| w.transmission_mw)
                / bench.acquisition_peak_mw(),
        }
        .into());
    }
    let gain = bench.last_window().map_or(1.0, |w| w.gain);
    let windows = lo_windows(&trace, settings.settle_s);
    let phases: Vec<f64> = windows.iter().map(|w| w.phase_rad).collect();
    let powers: Vec<f64> = windows.iter().map(|w| w.power_mw).collect();
    let curve = fit_phase_sinusoid(&phases, &powers)?;
    let raw_sq = to_db(curve.min() / reference_mw)?;
    let raw_asq = to_db(curve.max() / reference_mw)?;
    let result = SqueezeResult::from_raw(raw_sq, raw_asq, clearance)?;

    Ok(SqueezeRun {
        settings: *settings,
        trace,
        reference,
        reference_mw,
        baseline_shift_db,
        result,
        noise_fit,
        thermal: bench.apparatus().state().thermal,
        optimization,
        gain,
    })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(|e| RunError::Io {
        path,
        message: e.to_string(),
    })
}

fn io_err(dir: &Path, name: &str) -> impl Fn(std::io::Error) -> RunError {
    let path = dir.join(name);
    move |e| RunError::Io {
        path: path.clone(),
        message: e.to_string(),
    }
}

pub fn write_report(dir: &Path, stem: &str, report: &Report) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir, ""))?;
    let txt = format!("{stem}.txt");
    std::fs::write(dir.join(&txt), report.to_text()).map_err(io_err(dir, &txt))?;
    let json = format!("{stem}.json");
    let body = serde_json::to_string_pretty(&report.to_json()).expect("report is valid JSON");
    std::fs::write(dir.join(&json), body + "\n").map_err(io_err(dir, &json))?;
    Ok(())
}

pub fn write_gain_curve(dir: &Path, run: &GainCurveRun) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir, ""))?;
    let w = create(dir, "gain_curve.csv")?;
    write_gain_points(w, &run.points)?;
    write_report(dir, "gain_curve_report", &run.report())
}

pub fn write_noise_scan(dir: &Path, run: &NoiseScanRun) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir, ""))?;
    let w = create(dir, "noise_scan.csv")?;
    write_noise_points(w, &run.points)?;
    write_report(dir, "noise_scan_report", &run.report())
}

pub fn write_squeeze_run(dir: &Path, run: &SqueezeRun) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir, ""))?;
    run.trace
        .write_csv(create(dir, "squeeze_trace.csv")?)
        .map_err(io_err(dir, "squeeze_trace.csv"))?;
    run.reference
        .write_csv(create(dir, "reference_trace.csv")?)
        .map_err(io_err(dir, "reference_trace.csv"))?;
    write_report(dir, "squeeze_report", &run.report())
}
