use serde::{Deserialize, Serialize};

use super::ControlError;
use crate::bench::Bench;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionSettings {
    /// Laser offsets scanned are `-range_mhz..=range_mhz`.
    pub range_mhz: f64,
    pub coarse_step_mhz: f64,
    /// Capture once transmission reaches this fraction of the scan peak.
    pub capture_fraction: f64,
}

impl Default for AcquisitionSettings {
    fn default() -> Self {
        Self {
            range_mhz: 600.0,
            coarse_step_mhz: 25.0,
            capture_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LockSettings {
    pub step_mhz: f64,
    pub period_s: f64,
    pub drop_threshold: f64,
    /// Declared lost once unamplified transmission falls below this fraction
    /// of the value found during acquisition.
    pub loss_fraction: f64,
    pub acquisition: AcquisitionSettings,
}

impl Default for LockSettings {
    fn default() -> Self {
        Self {
            step_mhz: 2.0,
            period_s: 0.1,
            drop_threshold: 0.005,
            loss_fraction: 0.5,
            acquisition: AcquisitionSettings::default(),
        }
    }
}

impl LockSettings {
    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |m: &str| Err(ControlError::Settings(m.into()));
        if !(self.step_mhz > 0.0 && self.step_mhz.is_finite()) {
            return bad("lock step must be positive");
        }
        if !(self.period_s > 0.0) {
            return bad("lock period must be positive");
        }
        if !(self.drop_threshold > 0.0 && self.drop_threshold < 1.0) {
            return bad("drop threshold must lie in (0,1)");
        }
        if !(self.loss_fraction > 0.0 && self.loss_fraction < 1.0) {
            return bad("loss fraction must lie in (0,1)");
        }
        let a = &self.acquisition;
        if !(a.range_mhz > 0.0 && a.coarse_step_mhz > 0.0 && a.coarse_step_mhz < a.range_mhz) {
            return bad("acquisition range and step must be positive, step below range");
        }
        if !(a.capture_fraction > 0.0 && a.capture_fraction <= 1.0) {
            return bad("capture fraction must lie in (0,1]");
        }
        Ok(())
    }
}

/// Laser frequency walk state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LockController {
    pub step_mhz: f64,
    pub period_s: f64,
    pub direction: i8,
    /// Highest window maximum seen since the last reversal.
    pub last_max: f64,
    pub drop_threshold: f64,
    pub engaged: bool,
}

impl LockController {
    pub fn new(settings: &LockSettings) -> Result<Self, ControlError> {
        settings.validate()?;
        Ok(Self {
            step_mhz: settings.step_mhz,
            period_s: settings.period_s,
            direction: 1,
            last_max: 0.0,
            drop_threshold: settings.drop_threshold,
            engaged: false,
        })
    }

    pub fn engage(&mut self, observed_max: f64, direction: i8) {
        self.engaged = true;
        self.last_max = observed_max;
        self.direction = if direction < 0 { -1 } else { 1 };
    }

    pub fn disengage(&mut self) {
        self.engaged = false;
    }

    /// Largest frequency correction the walk can apply per second.
    pub fn max_slew_mhz_per_s(&self) -> f64 {
        self.step_mhz / self.period_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreqAction {
    Step(f64),
    Hold,
}

impl FreqAction {
    pub fn mhz(self) -> f64 {
        match self {
            FreqAction::Step(d) => d,
            FreqAction::Hold => 0.0,
        }
    }
}

/// One walk step from the latest seed-window maximum.
///
/// The walk reverses when the maximum falls more than `drop_threshold` below
/// the best value seen since the previous reversal; a reversal resets that
/// reference to the current observation.
pub fn lock_update(
    ctrl: &LockController,
    observed_max: f64,
) -> Result<(LockController, FreqAction), ControlError> {
    if !ctrl.engaged {
        return Err(ControlError::NotLocked);
    }
    if !(observed_max >= 0.0) || !observed_max.is_finite() {
        return Err(ControlError::Settings(format!(
            "observed maximum must be finite and non-negative, got {observed_max}"
        )));
    }
    let mut next = *ctrl;
    if observed_max < ctrl.last_max * (1.0 - ctrl.drop_threshold) {
        next.direction = -ctrl.direction;
        next.last_max = observed_max;
    } else {
        next.last_max = ctrl.last_max.max(observed_max);
    }
    let action = FreqAction::Step(next.direction as f64 * next.step_mhz);
    Ok((next, action))
}

/// Detuning sample taken at the close of a seed window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetuningSample {
    pub time_s: f64,
    pub detuning_mhz: f64,
    pub locked: bool,
}

/// Runs the bench for `duration_s`, engaging the lock first if needed, and
/// records `|detuning|` once per seed window.
pub fn run_lock(bench: &mut Bench, duration_s: f64) -> Result<Vec<DetuningSample>, ControlError> {
    if !bench.lock_engaged() {
        bench.engage_lock()?;
    }
    let end = bench.clock() + duration_s;
    let mut out = Vec::new();
    while bench.clock() < end {
        let tick = bench.tick()?;
        if tick.window.is_some() {
            out.push(DetuningSample {
                time_s: bench.clock(),
                detuning_mhz: bench.apparatus().detuning_mhz().abs(),
                locked: bench.lock_state().is_locked(),
            });
        }
    }
    Ok(out)
}
