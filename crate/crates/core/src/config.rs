//! Run configuration: one TOML file with a flat section per component.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::ExtremaOptions;
use crate::apparatus::{
    ApparatusConfig, DetectorModel, DriftModel, InitialConditions, Linewidth, SAConfig,
    ScheduleConfig,
};
use crate::control::{LockSettings, OptimizerSettings};
use crate::optics::{CavityParams, EfficiencyBudget, KerrState, TuningResponse};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainCurveSettings {
    pub pumps_w: Vec<f64>,
    /// Seed windows averaged per pump setting.
    pub windows: usize,
    /// Re-optimise the crystal temperatures at every pump power.
    pub optimize: bool,
}

impl Default for GainCurveSettings {
    fn default() -> Self {
        Self {
            pumps_w: vec![0.02, 0.05, 0.08, 0.11, 0.14, 0.17, 0.20],
            windows: 5,
            optimize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseScanSettings {
    pub lo_mw: Vec<f64>,
    pub dwell_s: f64,
    /// Residual (dB) within which a point counts as shot-noise limited.
    pub linear_tolerance_db: f64,
}

impl Default for NoiseScanSettings {
    fn default() -> Self {
        Self {
            lo_mw: (0..=12).map(|k| 0.25 * k as f64).collect(),
            dwell_s: 1.0,
            linear_tolerance_db: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SqueezeSettings {
    pub pump_w: f64,
    pub lo_mw: f64,
    /// Length of the squeezing record, s.
    pub duration_s: f64,
    /// Length of the pump-off shot-noise reference, s.
    pub reference_s: f64,
    /// Part of each LO window discarded while the video filter settles, s.
    pub settle_s: f64,
    /// Time allowed after capture for the walk to reach resonance, s.
    pub lock_settle_s: f64,
    pub optimize: bool,
    pub filter_transmission: Option<f64>,
}

impl Default for SqueezeSettings {
    fn default() -> Self {
        Self {
            pump_w: 0.0131,
            lo_mw: 2.5,
            duration_s: 20.0,
            reference_s: 5.0,
            settle_s: 0.015,
            lock_settle_s: 10.0,
            optimize: true,
            filter_transmission: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionSettings {
    /// Simulated seconds per wall-clock second.
    pub time_factor: f64,
    pub telemetry_hz: f64,
    /// Analyzer points kept per telemetry message.
    pub max_trace_points: usize,
}

impl Default for SessionSettings {
    fn default() -> Self {
        Self {
            time_factor: 1.0,
            telemetry_hz: 20.0,
            max_trace_points: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub rng_seed: u64,
    pub output_dir: PathBuf,
    pub noise_linewidth: Linewidth,
    pub cavity: CavityParams,
    pub efficiency: EfficiencyBudget,
    pub tuning: TuningResponse,
    pub initial: InitialConditions,
    pub kerr: KerrState,
    pub schedule: ScheduleConfig,
    pub sa: SAConfig,
    pub detector: DetectorModel,
    pub drift: DriftModel,
    pub lock: LockSettings,
    pub optimizer: OptimizerSettings,
    pub extrema: ExtremaOptions,
    pub gain_curve: GainCurveSettings,
    pub noise_scan: NoiseScanSettings,
    pub squeeze: SqueezeSettings,
    pub session: SessionSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        let a = ApparatusConfig::default();
        Self {
            rng_seed: a.rng_seed,
            output_dir: PathBuf::from("out"),
            noise_linewidth: a.noise_linewidth,
            cavity: a.cavity,
            efficiency: a.efficiency,
            tuning: a.tuning,
            initial: a.initial,
            kerr: a.kerr,
            schedule: a.schedule,
            sa: a.sa,
            detector: a.detector,
            drift: a.drift,
            lock: LockSettings::default(),
            optimizer: OptimizerSettings::default(),
            extrema: ExtremaOptions::default(),
            gain_curve: GainCurveSettings::default(),
            noise_scan: NoiseScanSettings::default(),
            squeeze: SqueezeSettings::default(),
            session: SessionSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        let cfg = Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.to_owned(),
                message,
            },
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::from("<string>"),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration always serializes")
    }

    pub fn apparatus(&self) -> ApparatusConfig {
        ApparatusConfig {
            rng_seed: self.rng_seed,
            noise_linewidth: self.noise_linewidth,
            cavity: self.cavity,
            efficiency: self.efficiency,
            tuning: self.tuning,
            initial: self.initial,
            kerr: self.kerr,
            schedule: self.schedule,
            sa: self.sa,
            detector: self.detector,
            drift: self.drift,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |e: String| ConfigError::Invalid(e);
        self.apparatus().validate().map_err(|e| bad(e.to_string()))?;
        self.lock.validate().map_err(|e| bad(e.to_string()))?;
        crate::control::TempOptimizer::new(self.optimizer).map_err(|e| bad(e.to_string()))?;
        if !(0.0..0.5).contains(&self.extrema.percentile) {
            return Err(bad("extrema percentile must lie in [0, 0.5)".into()));
        }
        let s = &self.squeeze;
        if !(s.duration_s > 0.0 && s.reference_s > 0.0 && s.settle_s >= 0.0 && s.lock_settle_s >= 0.0) {
            return Err(bad("squeeze durations must be positive".into()));
        }
        if let Some(t) = s.filter_transmission {
            if !(0.0..=1.0).contains(&t) {
                return Err(bad(format!("filter transmission must lie in [0,1], got {t}")));
            }
        }
        if !(self.noise_scan.dwell_s > 0.0) {
            return Err(bad("noise-scan dwell must be positive".into()));
        }
        let ss = &self.session;
        if !(ss.time_factor > 0.0 && ss.telemetry_hz > 0.0) {
            return Err(bad("session time factor and telemetry rate must be positive".into()));
        }
        if self.gain_curve.windows == 0 {
            return Err(bad("gain-curve windows must be at least 1".into()));
        }
        Ok(())
    }
}
