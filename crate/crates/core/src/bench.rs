//! The apparatus wired to its lock and spectrum analyzer.
//!
//! [`Bench`] is what the runs and the session server drive: every tick it
//! steps the apparatus, feeds the analyzer while recording, and at the close
//! of each seed window reduces the `D_R` samples to a [`WindowReading`] that
//! drives acquisition and the frequency walk.

use serde::{Deserialize, Serialize};

use crate::analysis::{extract_minmax, ExtremaOptions};
use crate::apparatus::{
    Apparatus, ApparatusConfig, NoiseTrace, SimError, SpectrumAnalyzer, TickOutputs, TracePoint,
};
use crate::control::{lock_update, ControlError, LockController, LockSettings};
use crate::optics::gain_from_minmax;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LockState {
    Idle,
    Surveying,
    Capturing,
    Locked,
    Lost,
}

impl LockState {
    pub fn is_locked(self) -> bool {
        self == LockState::Locked
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LockState::Idle => "idle",
            LockState::Surveying => "surveying",
            LockState::Capturing => "capturing",
            LockState::Locked => "locked",
            LockState::Lost => "lost",
        }
    }
}

/// Reduction of one seed window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowReading {
    pub time_s: f64,
    pub max_mw: f64,
    pub min_mw: f64,
    pub gain: f64,
    /// `max / gain`: the seed transmission with the parametric gain removed.
    pub transmission_mw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchTick {
    pub outputs: TickOutputs,
    pub window: Option<WindowReading>,
    pub trace: Option<TracePoint>,
}

#[derive(Debug, Clone)]
pub struct Bench {
    apparatus: Apparatus,
    settings: LockSettings,
    extrema: ExtremaOptions,
    lock: LockController,
    state: LockState,
    peak_mw: f64,
    scan_offset: f64,
    times: Vec<f64>,
    values: Vec<f64>,
    last_window: Option<WindowReading>,
    analyzer: Option<SpectrumAnalyzer>,
    trace: Vec<TracePoint>,
}

impl Bench {
    pub fn new(
        config: ApparatusConfig,
        settings: LockSettings,
        extrema: ExtremaOptions,
    ) -> Result<Self, ControlError> {
        let lock = LockController::new(&settings)?;
        let period = config.schedule.period();
        if (settings.period_s - period).abs() > 1e-9 * period {
            return Err(ControlError::Settings(format!(
                "lock period {} s must equal the MEMS period {period} s",
                settings.period_s
            )));
        }
        if !(0.0..0.5).contains(&extrema.percentile) {
            return Err(ControlError::Settings("extrema percentile must lie in [0, 0.5)".into()));
        }
        Ok(Self {
            apparatus: Apparatus::new(config)?,
            settings,
            extrema,
            lock,
            state: LockState::Idle,
            peak_mw: 0.0,
            scan_offset: 0.0,
            times: Vec::new(),
            values: Vec::new(),
            last_window: None,
            analyzer: None,
            trace: Vec::new(),
        })
    }

    pub fn apparatus(&self) -> &Apparatus {
        &self.apparatus
    }

    pub fn apparatus_mut(&mut self) -> &mut Apparatus {
        &mut self.apparatus
    }

    pub fn clock(&self) -> f64 {
        self.apparatus.clock()
    }

    pub fn lock_state(&self) -> LockState {
        self.state
    }

    pub fn lock_controller(&self) -> &LockController {
        &self.lock
    }

    pub fn lock_settings(&self) -> &LockSettings {
        &self.settings
    }

    /// True while the lock is acquiring, holding, or walking after a loss.
    pub fn lock_engaged(&self) -> bool {
        self.state != LockState::Idle
    }

    pub fn last_window(&self) -> Option<WindowReading> {
        self.last_window
    }

    /// Transmission found during acquisition, the reference for loss.
    pub fn acquisition_peak_mw(&self) -> f64 {
        self.peak_mw
    }

    /// Starts acquisition: a coarse survey across the scan range, then a
    /// second pass that hands over to the walk at the capture fraction.
    pub fn engage_lock(&mut self) -> Result<(), ControlError> {
        self.lock.disengage();
        self.state = LockState::Surveying;
        self.peak_mw = 0.0;
        self.scan_offset = -self.settings.acquisition.range_mhz;
        self.apparatus.set_laser_offset(self.scan_offset);
        Ok(())
    }

    /// Starts the walk at the current laser frequency, skipping acquisition.
    pub fn engage_lock_here(&mut self, reference_mw: f64) {
        self.peak_mw = reference_mw;
        self.lock.engage(0.0, 1);
        self.state = LockState::Locked;
    }

    pub fn disengage_lock(&mut self) {
        self.lock.disengage();
        self.state = LockState::Idle;
    }

    pub fn is_recording(&self) -> bool {
        self.analyzer.is_some()
    }

    /// Turns on homodyne synthesis and the analyzer; clears earlier points.
    pub fn start_recording(&mut self) {
        let cfg = self.apparatus.config();
        self.analyzer = Some(SpectrumAnalyzer::new(
            cfg.sa,
            cfg.detector.reference_rbw_mhz,
            cfg.schedule.tick_s,
        ));
        self.trace.clear();
        self.apparatus.set_record_homodyne(true);
    }

    pub fn stop_recording(&mut self) -> NoiseTrace {
        let config = self
            .analyzer
            .take()
            .map(|a| *a.config())
            .unwrap_or(self.apparatus.config().sa);
        self.apparatus.set_record_homodyne(false);
        NoiseTrace {
            config,
            points: std::mem::take(&mut self.trace),
        }
    }

    /// Moves the points recorded so far out of the bench.
    pub fn drain_trace(&mut self) -> Vec<TracePoint> {
        std::mem::take(&mut self.trace)
    }

    pub fn tick(&mut self) -> Result<BenchTick, ControlError> {
        let outputs = self.apparatus.step()?;
        let sched = *self.apparatus.schedule();
        if !outputs.seed_mw.is_empty() {
            let n = outputs.seed_mw.len();
            for (j, &p) in outputs.seed_mw.iter().enumerate() {
                self.times.push(outputs.time_s + j as f64 * sched.tick_s / n as f64);
                self.values.push(p);
            }
        }
        let trace = match self.analyzer.as_mut() {
            Some(sa) => {
                let pt = sa.push(
                    outputs.time_s,
                    outputs.pump_phase_rad,
                    outputs.mems,
                    &outputs.homodyne,
                );
                if let Some(p) = pt {
                    self.trace.push(p);
                }
                pt
            }
            None => None,
        };
        let tick_index = self.apparatus.state().tick - 1;
        let closes = (tick_index + 1) % sched.ticks_per_period() == sched.seed_ticks();
        let window = if closes { self.close_window()? } else { None };
        Ok(BenchTick {
            outputs,
            window,
            trace,
        })
    }

    /// Steps until the next seed window closes.
    pub fn next_window(&mut self) -> Result<WindowReading, ControlError> {
        // guards against a schedule holding the LO forever
        let limit = 2 * self.apparatus.schedule().ticks_per_period() + 1;
        for _ in 0..limit {
            if let Some(w) = self.tick()?.window {
                return Ok(w);
            }
        }
        Err(ControlError::Settings("no seed light reaches D_R with the current MEMS mode".into()))
    }

    /// Mean gain over the next `windows` seed windows, failing if the lock
    /// is lost meanwhile.
    pub fn measure_gain(&mut self, windows: usize) -> Result<f64, ControlError> {
        let mut sum = 0.0;
        for _ in 0..windows.max(1) {
            let w = self.next_window()?;
            if self.state == LockState::Lost {
                return Err(ControlError::LockLost {
                    time_s: w.time_s,
                    transmission: w.transmission_mw / self.peak_mw,
                });
            }
            sum += w.gain;
        }
        Ok(sum / windows.max(1) as f64)
    }

    pub fn run_for(&mut self, seconds: f64) -> Result<(), ControlError> {
        let end = self.clock() + seconds;
        while self.clock() < end - 1e-12 {
            self.tick()?;
        }
        Ok(())
    }

    fn close_window(&mut self) -> Result<Option<WindowReading>, ControlError> {
        if self.values.is_empty() {
            return Ok(None);
        }
        let span = self.apparatus.schedule().period();
        let ext = extract_minmax(&self.times, &self.values, span, &self.extrema)?;
        self.times.clear();
        self.values.clear();
        let Some(e) = ext.first() else {
            return Ok(None);
        };
        let gain = if e.min > 0.0 { gain_from_minmax(e.max, e.min).map_err(SimError::from)? } else { 1.0 };
        let reading = WindowReading {
            time_s: self.clock(),
            max_mw: e.max,
            min_mw: e.min,
            gain,
            transmission_mw: e.max / gain,
        };
        self.last_window = Some(reading);
        self.advance_lock(&reading)?;
        Ok(Some(reading))
    }

    fn advance_lock(&mut self, r: &WindowReading) -> Result<(), ControlError> {
        let acq = self.settings.acquisition;
        match self.state {
            LockState::Idle => {}
            LockState::Surveying => {
                self.peak_mw = self.peak_mw.max(r.transmission_mw);
                self.scan_offset += acq.coarse_step_mhz;
                if self.scan_offset > acq.range_mhz {
                    if !(self.peak_mw > 0.0) {
                        self.state = LockState::Lost;
                        return Err(ControlError::AcquisitionFailed {
                            range_mhz: acq.range_mhz,
                        });
                    }
                    self.state = LockState::Capturing;
                    self.scan_offset = -acq.range_mhz;
                }
                self.apparatus.set_laser_offset(self.scan_offset);
            }
            LockState::Capturing => {
                if r.transmission_mw >= acq.capture_fraction * self.peak_mw {
                    // arriving from below: keep walking up toward the peak
                    self.lock.engage(r.max_mw, 1);
                    self.state = LockState::Locked;
                    self.apparatus.step_laser(self.lock.step_mhz);
                } else {
                    self.scan_offset += acq.coarse_step_mhz;
                    if self.scan_offset > acq.range_mhz {
                        self.state = LockState::Lost;
                        return Err(ControlError::AcquisitionFailed {
                            range_mhz: acq.range_mhz,
                        });
                    }
                    self.apparatus.set_laser_offset(self.scan_offset);
                }
            }
            LockState::Locked | LockState::Lost => {
                let (next, action) = lock_update(&self.lock, r.max_mw)?;
                self.lock = next;
                self.apparatus.step_laser(action.mhz());
                if self.state == LockState::Locked
                    && r.transmission_mw < self.settings.loss_fraction * self.peak_mw
                {
                    self.state = LockState::Lost;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::pump_for_gain;

    fn quiet() -> ApparatusConfig {
        let mut c = ApparatusConfig::default();
        c.drift.diffusion_mhz_per_sqrt_s = 0.0;
        c
    }

    fn bench(cfg: ApparatusConfig) -> Bench {
        Bench::new(cfg, LockSettings::default(), ExtremaOptions::default()).unwrap()
    }

    #[test]
    fn acquisition_captures_from_far_detuning() {
        let mut cfg = quiet();
        cfg.initial.laser_offset_mhz = 400.0;
        let mut b = bench(cfg);
        b.engage_lock().unwrap();
        let mut t = 0.0;
        while !b.lock_state().is_locked() && t < 20.0 {
            b.next_window().unwrap();
            t = b.clock();
        }
        assert!(b.lock_state().is_locked());
        assert!(b.apparatus().detuning_mhz().abs() <= 125.0 + 25.0);
        b.run_for(12.0).unwrap();
        assert!(b.apparatus().detuning_mhz().abs() < 12.0, "{}", b.apparatus().detuning_mhz());
        assert!(b.lock_state().is_locked());
    }

    #[test]
    fn window_gain_matches_apparatus() {
        let mut b = bench(quiet());
        let p = pump_for_gain(1.4, b.apparatus().threshold_w()).unwrap();
        b.apparatus_mut().set_pump_power(p).unwrap();
        let w = b.next_window().unwrap();
        assert!((w.gain - 1.4).abs() < 0.01, "{}", w.gain);
        assert!((w.transmission_mw - 1.0).abs() < 0.01);
    }

    #[test]
    fn pump_off_reads_unit_gain() {
        let mut b = bench(quiet());
        let w = b.next_window().unwrap();
        assert!((w.gain - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_lock_period_is_rejected() {
        let s = LockSettings {
            period_s: 0.2,
            ..LockSettings::default()
        };
        assert!(Bench::new(quiet(), s, ExtremaOptions::default()).is_err());
    }

    #[test]
    fn recording_produces_one_point_per_tick() {
        let mut b = bench(quiet());
        b.apparatus_mut().set_lo_power(2.5).unwrap();
        b.start_recording();
        b.run_for(0.2).unwrap();
        let trace = b.stop_recording();
        assert_eq!(trace.points.len(), 200);
        assert!(!b.apparatus().state().record_homodyne);
    }

    #[test]
    fn held_lo_has_no_seed_windows() {
        let mut b = bench(quiet());
        b.apparatus_mut().set_mems_mode(crate::apparatus::MemsMode::HoldLo);
        assert!(b.next_window().is_err());
    }
}
