//! Time-stepped virtual apparatus.
//!
//! One [`Apparatus`] owns the mutable state of the bench: laser and cavity
//! resonance, crystal temperatures, pump, MEMS switch, LO and filter. Each
//! call to [`Apparatus::step`] advances one tick and emits the seed
//! transmission seen on `D_R` (seed windows) and, when recording, the RF
//! samples of the homodyne difference current. All randomness comes from a
//! single seeded ChaCha stream, so identical seeds and command sequences
//! reproduce bit-identical trajectories.

pub mod detector;
pub mod spectrum;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::sweep_phase;
use crate::optics::{
    self, apply_passive_loss, kerr_step, pump_amplitude, quadrature_noise, tuning_factor,
    CavityParams, EfficiencyBudget, KerrState, OpticsError, Quadrature, ThermalState,
    TuningResponse,
};
pub use detector::{homodyne_block, homodyne_sample, lo_power_scan, DetectorModel};
pub use spectrum::{sa_zero_span, NoiseTrace, SAConfig, SampleBlock, SpectrumAnalyzer, TracePoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("simulation fault at t = {time_s} s: {what}")]
    Fault { time_s: f64, what: String },
}

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemsPosition {
    Seed,
    Lo,
}

impl MemsPosition {
    pub fn as_str(self) -> &'static str {
        match self {
            MemsPosition::Seed => "seed",
            MemsPosition::Lo => "lo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemsMode {
    /// Alternate seed and LO on the schedule.
    Switching,
    HoldSeed,
    HoldLo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepWaveform {
    /// Ramp up across the seed window, back down across the LO window.
    Triangle,
    /// Ramp up across the seed window, rest at zero during the LO window.
    Sawtooth,
}

/// Pump phase used while the LO is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoPhase {
    /// Follow the synchronized sweep waveform.
    Sweep,
    /// Advance slowly at `lo_scan_rate`, so that each LO window sees an
    /// almost constant quadrature and the video filter can follow.
    Scan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub mems_rate_hz: f64,
    /// Fraction of each MEMS period spent on the seed.
    pub duty: f64,
    /// Pump phase excursion per seed window, rad.
    pub sweep_span_rad: f64,
    pub tick_s: f64,
    pub waveform: SweepWaveform,
    pub lo_phase: LoPhase,
    /// rad/s of pump phase during LO windows in [`LoPhase::Scan`] mode.
    pub lo_scan_rate: f64,
    /// `D_R` samples per tick during seed windows.
    pub seed_subsamples: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            mems_rate_hz: 10.0,
            duty: 0.5,
            sweep_span_rad: 10.0 * PI,
            tick_s: 1e-3,
            waveform: SweepWaveform::Triangle,
            lo_phase: LoPhase::Scan,
            lo_scan_rate: 0.5 * PI,
            seed_subsamples: 10,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.mems_rate_hz > 0.0 && self.tick_s > 0.0) {
            return Err("mems_rate_hz and tick_s must be positive".into());
        }
        if !(self.duty > 0.0 && self.duty < 1.0) {
            return Err(format!("duty must lie in (0,1), got {}", self.duty));
        }
        if !(self.tick_s < 0.5 / self.mems_rate_hz) {
            return Err("tick must be shorter than half a MEMS period".into());
        }
        let per = self.period() / self.tick_s;
        let seed = self.duty * per;
        if (per - per.round()).abs() > 1e-6 || (seed - seed.round()).abs() > 1e-6 {
            return Err("MEMS period and seed window must be whole numbers of ticks".into());
        }
        if self.seed_subsamples == 0 {
            return Err("seed_subsamples must be at least 1".into());
        }
        if !self.sweep_span_rad.is_finite() || !self.lo_scan_rate.is_finite() {
            return Err("sweep parameters must be finite".into());
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.mems_rate_hz
    }

    pub fn ticks_per_period(&self) -> u64 {
        (self.period() / self.tick_s).round() as u64
    }

    pub fn seed_ticks(&self) -> u64 {
        (self.duty * self.ticks_per_period() as f64).round() as u64
    }

    pub fn position_at_tick(&self, tick: u64) -> MemsPosition {
        if tick % self.ticks_per_period() < self.seed_ticks() {
            MemsPosition::Seed
        } else {
            MemsPosition::Lo
        }
    }
}

/// Resonance drift of the cavity: a random walk plus an optional ramp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftModel {
    pub diffusion_mhz_per_sqrt_s: f64,
    pub ramp_mhz_per_s: f64,
}

impl Default for DriftModel {
    fn default() -> Self {
        Self {
            diffusion_mhz_per_sqrt_s: 0.5,
            ramp_mhz_per_s: 0.0,
        }
    }
}

/// Which cavity width the noise spectrum's frequency ratio uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linewidth {
    HalfWidth,
    FullWidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConditions {
    pub thermal: ThermalState,
    pub laser_offset_mhz: f64,
    pub seed_power_mw: f64,
    pub lo_power_mw: f64,
    pub pump_power_w: f64,
}

impl Default for InitialConditions {
    fn default() -> Self {
        let resp = TuningResponse::default();
        Self {
            thermal: resp.optimum(),
            laser_offset_mhz: 0.0,
            seed_power_mw: 1.0,
            lo_power_mw: 0.0,
            pump_power_w: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApparatusConfig {
    pub rng_seed: u64,
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
}

impl Default for ApparatusConfig {
    fn default() -> Self {
        Self {
            rng_seed: 1,
            noise_linewidth: Linewidth::HalfWidth,
            cavity: CavityParams::default(),
            efficiency: EfficiencyBudget::default(),
            tuning: TuningResponse::default(),
            initial: InitialConditions::default(),
            kerr: KerrState::default(),
            schedule: ScheduleConfig::default(),
            sa: SAConfig::default(),
            detector: DetectorModel::default(),
            drift: DriftModel::default(),
        }
    }
}

impl ApparatusConfig {
    pub fn validate(&self) -> Result<()> {
        self.cavity.validate()?;
        self.efficiency.validate()?;
        self.tuning.validate()?;
        self.kerr.validate()?;
        self.schedule.validate().map_err(SimError::Config)?;
        self.sa.validate().map_err(SimError::Config)?;
        self.detector.validate().map_err(SimError::Config)?;
        if !(self.drift.diffusion_mhz_per_sqrt_s >= 0.0) || !self.drift.ramp_mhz_per_s.is_finite() {
            return Err(SimError::Config("drift must be finite and non-negative".into()));
        }
        let i = &self.initial;
        if !(i.seed_power_mw >= 0.0 && i.lo_power_mw >= 0.0 && i.pump_power_w >= 0.0) {
            return Err(SimError::Config("initial powers must be non-negative".into()));
        }
        Ok(())
    }

    /// Cavity width entering the noise spectrum's frequency ratio.
    pub fn noise_linewidth_mhz(&self) -> f64 {
        match self.noise_linewidth {
            Linewidth::HalfWidth => self.cavity.half_width_mhz(),
            Linewidth::FullWidth => self.cavity.bandwidth_fwhm_mhz,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApparatusState {
    pub tick: u64,
    /// Laser frequency relative to the nominal cavity resonance, MHz.
    pub laser_offset_mhz: f64,
    /// Accumulated drift of the cavity resonance, MHz.
    pub resonance_drift_mhz: f64,
    pub thermal: ThermalState,
    pub kerr: KerrState,
    pub pump_power_w: f64,
    pub pump_phase_rad: f64,
    pub mems: MemsPosition,
    pub mems_mode: MemsMode,
    pub sweep_enabled: bool,
    pub lo_power_mw: f64,
    pub seed_power_mw: f64,
    pub filter_transmission: f64,
    pub drift: DriftModel,
    pub record_homodyne: bool,
    rng: ChaCha8Rng,
}

/// What the detectors saw during one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickOutputs {
    pub time_s: f64,
    pub mems: MemsPosition,
    pub pump_phase_rad: f64,
    pub detuning_mhz: f64,
    /// `D_R` power samples (mW), evenly spaced within the tick; empty while
    /// the LO is on.
    pub seed_mw: Vec<f64>,
    /// Homodyne RF samples; empty unless recording.
    pub homodyne: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Apparatus {
    config: ApparatusConfig,
    threshold_w: f64,
    state: ApparatusState,
}

impl Apparatus {
    pub fn new(config: ApparatusConfig) -> Result<Self> {
        config.validate()?;
        let threshold_w = optics::threshold_power(&config.cavity)?;
        let init = config.initial;
        if init.pump_power_w >= threshold_w {
            return Err(OpticsError::AboveThreshold {
                pump: init.pump_power_w,
                threshold: threshold_w,
            }
            .into());
        }
        let state = ApparatusState {
            tick: 0,
            laser_offset_mhz: init.laser_offset_mhz,
            resonance_drift_mhz: 0.0,
            thermal: init.thermal,
            kerr: config.kerr,
            pump_power_w: init.pump_power_w,
            pump_phase_rad: 0.0,
            mems: config.schedule.position_at_tick(0),
            mems_mode: MemsMode::Switching,
            sweep_enabled: true,
            lo_power_mw: init.lo_power_mw,
            seed_power_mw: init.seed_power_mw,
            filter_transmission: 1.0,
            drift: config.drift,
            record_homodyne: false,
            rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
        };
        Ok(Self {
            config,
            threshold_w,
            state,
        })
    }

    pub fn config(&self) -> &ApparatusConfig {
        &self.config
    }

    pub fn state(&self) -> &ApparatusState {
        &self.state
    }

    pub fn threshold_w(&self) -> f64 {
        self.threshold_w
    }

    pub fn schedule(&self) -> &ScheduleConfig {
        &self.config.schedule
    }

    pub fn clock(&self) -> f64 {
        self.state.tick as f64 * self.config.schedule.tick_s
    }

    /// Laser minus cavity resonance, including the slow dispersive shift.
    pub fn detuning_mhz(&self) -> f64 {
        self.state.laser_offset_mhz - self.state.resonance_drift_mhz - self.state.kerr.shift_mhz
    }

    pub fn tuning_factor(&self) -> f64 {
        tuning_factor(&self.state.thermal, &self.config.tuning)
    }

    /// Pump amplitude parameter after thermal tuning.
    pub fn mu(&self) -> Result<f64> {
        Ok(pump_amplitude(
            self.state.pump_power_w * self.tuning_factor(),
            self.threshold_w,
        )?)
    }

    /// Gain the seed would see with the current pump and temperatures.
    pub fn ideal_gain(&self) -> Result<f64> {
        Ok((1.0 - self.mu()?).powi(-2))
    }

    /// Squeezed and antisqueezed variances at the analyzer frequency, after
    /// the efficiency budget and any inserted filter.
    pub fn quadrature_levels(&self) -> Result<(f64, f64)> {
        let mu = self.mu()?;
        let eta = self.config.efficiency.total();
        let f = self.config.sa.center_freq_mhz;
        let w = self.config.noise_linewidth_mhz();
        let t = self.state.filter_transmission;
        let sq = quadrature_noise(f, w, mu, eta, Quadrature::Squeezed)?;
        let asq = quadrature_noise(f, w, mu, eta, Quadrature::Antisqueezed)?;
        Ok((apply_passive_loss(sq, t)?, apply_passive_loss(asq, t)?))
    }

    pub fn set_pump_power(&mut self, watts: f64) -> Result<()> {
        if !(watts >= 0.0) {
            return Err(SimError::Config(format!("pump power must be non-negative, got {watts}")));
        }
        if watts >= self.threshold_w {
            return Err(OpticsError::AboveThreshold {
                pump: watts,
                threshold: self.threshold_w,
            }
            .into());
        }
        self.state.pump_power_w = watts;
        Ok(())
    }

    pub fn set_lo_power(&mut self, mw: f64) -> Result<()> {
        if !(mw >= 0.0) || !mw.is_finite() {
            return Err(SimError::Config(format!("LO power must be non-negative, got {mw}")));
        }
        self.state.lo_power_mw = mw;
        Ok(())
    }

    pub fn set_seed_power(&mut self, mw: f64) -> Result<()> {
        if !(mw >= 0.0) || !mw.is_finite() {
            return Err(SimError::Config(format!("seed power must be non-negative, got {mw}")));
        }
        self.state.seed_power_mw = mw;
        Ok(())
    }

    pub fn set_thermal(&mut self, thermal: ThermalState) -> Result<()> {
        if ![thermal.active, thermal.side1, thermal.side2].iter().all(|t| t.is_finite()) {
            return Err(SimError::Config("temperatures must be finite".into()));
        }
        self.state.thermal = thermal;
        Ok(())
    }

    /// Inserts a neutral-density filter of power transmission `t` into the
    /// squeezed beam; `None` removes it.
    pub fn set_filter(&mut self, t: Option<f64>) -> Result<()> {
        let t = t.unwrap_or(1.0);
        if !(0.0..=1.0).contains(&t) {
            return Err(SimError::Config(format!("filter transmission must lie in [0,1], got {t}")));
        }
        self.state.filter_transmission = t;
        Ok(())
    }

    pub fn set_mems_mode(&mut self, mode: MemsMode) {
        self.state.mems_mode = mode;
    }

    pub fn set_sweep(&mut self, enabled: bool) {
        self.state.sweep_enabled = enabled;
    }

    /// Pump phase used while the sweep is stopped.
    pub fn set_pump_phase(&mut self, rad: f64) {
        self.state.pump_phase_rad = rad;
    }

    pub fn set_laser_offset(&mut self, mhz: f64) {
        self.state.laser_offset_mhz = mhz;
    }

    pub fn step_laser(&mut self, mhz: f64) {
        self.state.laser_offset_mhz += mhz;
    }

    pub fn set_drift(&mut self, drift: DriftModel) {
        self.state.drift = drift;
    }

    pub fn set_sa_config(&mut self, sa: SAConfig) -> Result<()> {
        sa.validate().map_err(SimError::Config)?;
        self.config.sa = sa;
        Ok(())
    }

    pub fn set_record_homodyne(&mut self, on: bool) {
        self.state.record_homodyne = on;
    }

    fn position_at_tick(&self, tick: u64) -> MemsPosition {
        match self.state.mems_mode {
            MemsMode::Switching => self.config.schedule.position_at_tick(tick),
            MemsMode::HoldSeed => MemsPosition::Seed,
            MemsMode::HoldLo => MemsPosition::Lo,
        }
    }

    fn phase_at(&self, t: f64, pos: MemsPosition) -> f64 {
        let s = &self.config.schedule;
        if !self.state.sweep_enabled {
            return self.state.pump_phase_rad;
        }
        match (pos, s.lo_phase) {
            (MemsPosition::Lo, LoPhase::Scan) => s.lo_scan_rate * t,
            // with the seed held on, the sweep repeats every seed window
            (MemsPosition::Seed, _) if self.state.mems_mode == MemsMode::HoldSeed => {
                let w = s.duty * s.period();
                s.sweep_span_rad * (t / w - (t / w + 1e-9).floor()).max(0.0)
            }
            _ => sweep_phase(t, s),
        }
    }

    /// Advances one tick.
    pub fn step(&mut self) -> Result<TickOutputs> {
        let dt = self.config.schedule.tick_s;
        let tick = self.state.tick;
        let t = tick as f64 * dt;
        let pos = self.position_at_tick(tick);
        let phase = self.phase_at(t, pos);

        let drift = self.state.drift;
        let kick: f64 = if drift.diffusion_mhz_per_sqrt_s > 0.0 {
            self.state.rng.sample(StandardNormal)
        } else {
            0.0
        };
        self.state.resonance_drift_mhz +=
            drift.ramp_mhz_per_s * dt + drift.diffusion_mhz_per_sqrt_s * dt.sqrt() * kick;

        let mu = self.mu()?;
        let detuning = self.detuning_mhz();
        let transmission = self.config.cavity.transmission(detuning);

        let mut seed_mw = Vec::new();
        let mut intracavity_w = 0.0;
        if pos == MemsPosition::Seed {
            let n = self.config.schedule.seed_subsamples;
            let g_amp = (1.0 - mu).powi(-2);
            let g_deamp = (1.0 + mu).powi(-2);
            let base = self.state.seed_power_mw * transmission;
            seed_mw = (0..n)
                .map(|j| {
                    let phi = self.phase_at(t + j as f64 * dt / n as f64, pos);
                    let c = (0.5 * phi).cos().powi(2);
                    base * (g_amp * c + g_deamp * (1.0 - c))
                })
                .collect();
            let mean = seed_mw.iter().sum::<f64>() / n as f64;
            intracavity_w = mean * 1e-3 / self.config.cavity.output_coupler;
        }

        let homodyne = if self.state.record_homodyne {
            let det = &self.config.detector;
            let freq = self.config.sa.center_freq_mhz;
            let (variance, shot) = match pos {
                MemsPosition::Lo => {
                    let (sq, asq) = self.quadrature_levels()?;
                    let c = (0.5 * phase).cos().powi(2);
                    (sq * c + asq * (1.0 - c), det.shot_mw(self.state.lo_power_mw, freq))
                }
                // seed light alone on one diode: coherent, shot-noise limited
                MemsPosition::Seed => {
                    let out = seed_mw.iter().sum::<f64>() / seed_mw.len().max(1) as f64;
                    (1.0, det.shot_mw(out, freq))
                }
            };
            homodyne_block(
                variance,
                shot,
                det.electronic_mw(),
                det.samples_per_tick,
                &mut self.state.rng,
            )
        } else {
            Vec::new()
        };

        self.state.kerr = kerr_step(&self.state.kerr, intracavity_w, dt);
        self.state.mems = pos;
        if self.state.sweep_enabled {
            self.state.pump_phase_rad = phase;
        }
        self.state.tick += 1;

        if !(self.state.resonance_drift_mhz.is_finite()
            && self.state.kerr.shift_mhz.is_finite()
            && self.state.laser_offset_mhz.is_finite()
            && phase.is_finite())
        {
            return Err(SimError::Fault {
                time_s: t,
                what: "non-finite apparatus state".into(),
            });
        }
        Ok(TickOutputs {
            time_s: t,
            mems: pos,
            pump_phase_rad: phase,
            detuning_mhz: detuning,
            seed_mw,
            homodyne,
        })
    }
}
