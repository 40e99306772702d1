use serde::{Deserialize, Serialize};

use super::ControlError;
use crate::bench::Bench;
use crate::optics::ThermalState;
use crate::search::{golden_max, INV_PHI};

/// Allowed range for either side heater, °C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TempBounds {
    pub min_c: f64,
    pub max_c: f64,
}

impl Default for TempBounds {
    fn default() -> Self {
        Self {
            min_c: 15.0,
            max_c: 80.0,
        }
    }
}

impl TempBounds {
    pub fn contains(&self, t: &ThermalState) -> bool {
        let ok = |x: f64| x >= self.min_c && x <= self.max_c;
        ok(t.side1) && ok(t.side2)
    }

    fn sum_range(&self, diff: f64) -> (f64, f64) {
        let h = 0.5 * diff.abs();
        (self.min_c + h, self.max_c - h)
    }

    fn diff_range(&self, sum: f64) -> (f64, f64) {
        let room = (sum - self.min_c).min(self.max_c - sum);
        (-2.0 * room, 2.0 * room)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    /// Half-width of the sum-temperature bracket, °C.
    pub probe_step: f64,
    /// Half-width of the difference-temperature bracket, °C.
    pub interference_step: f64,
    pub shrink: f64,
    pub tolerance: f64,
    /// Seed windows averaged per gain probe.
    pub windows_per_probe: usize,
    pub bounds: TempBounds,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            probe_step: 0.3,
            interference_step: 0.25,
            shrink: INV_PHI,
            tolerance: 0.005,
            windows_per_probe: 2,
            bounds: TempBounds::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    BlueResonance,
    Interference,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TempOptimizer {
    pub stage: Stage,
    pub settings: OptimizerSettings,
}

impl TempOptimizer {
    pub fn new(settings: OptimizerSettings) -> Result<Self, ControlError> {
        let s = &settings;
        if !(s.probe_step > 0.0 && s.interference_step > 0.0) {
            return Err(ControlError::Settings("probe steps must be positive".into()));
        }
        if !(s.shrink > 0.5 && s.shrink < 1.0) {
            return Err(ControlError::Settings("shrink must lie in (0.5, 1)".into()));
        }
        if !(s.tolerance > 0.0 && s.tolerance < s.probe_step.min(s.interference_step)) {
            return Err(ControlError::Settings("tolerance must be positive and below the steps".into()));
        }
        if !(s.bounds.min_c < s.bounds.max_c) {
            return Err(ControlError::Settings("temperature bounds are empty".into()));
        }
        Ok(Self {
            stage: Stage::BlueResonance,
            settings,
        })
    }

    fn advance(&mut self) {
        self.stage = match self.stage {
            Stage::BlueResonance => Stage::Interference,
            Stage::Interference | Stage::Done => Stage::Done,
        };
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TempOptimization {
    pub thermal: ThermalState,
    pub gain: f64,
    pub initial_gain: f64,
    /// Gain probes spent in the sum and difference stages.
    pub probes_per_stage: [usize; 2],
    /// Every temperature setting applied, in order.
    pub visited: Vec<ThermalState>,
}

impl TempOptimization {
    pub fn sum(&self) -> f64 {
        self.thermal.sum()
    }

    pub fn diff(&self) -> f64 {
        self.thermal.diff()
    }
}

struct Probe<'a> {
    bench: &'a mut Bench,
    windows: usize,
    visited: Vec<ThermalState>,
    count: usize,
}

impl Probe<'_> {
    fn gain_at(&mut self, t: ThermalState) -> Result<f64, ControlError> {
        self.bench.apparatus_mut().set_thermal(t)?;
        self.visited.push(t);
        self.count += 1;
        self.bench.measure_gain(self.windows)
    }
}

type Setter = fn(&ThermalState, f64) -> ThermalState;

/// Maximises measured gain first over the sum temperature (pump resonance),
/// then over the difference temperature (interference), keeping the lock
/// running throughout. The active-section temperature is left untouched.
pub fn optimize_temperatures(
    bench: &mut Bench,
    opt: &mut TempOptimizer,
    pump_w: f64,
) -> Result<TempOptimization, ControlError> {
    if !bench.lock_state().is_locked() {
        return Err(ControlError::NotLocked);
    }
    let s = opt.settings;
    let start = bench.apparatus().state().thermal;
    if !s.bounds.contains(&start) {
        return Err(ControlError::Settings(format!(
            "starting temperatures {:.3}/{:.3} °C are outside the safety bounds",
            start.side1, start.side2
        )));
    }
    bench.apparatus_mut().set_pump_power(pump_w)?;
    // realign so every probe sees whole windows at its own temperature
    bench.next_window()?;
    let initial_gain = bench.measure_gain(s.windows_per_probe)?;
    if initial_gain - 1.0 < 1e-9 {
        return Err(ControlError::FlatGain { gain: initial_gain });
    }

    let mut probe = Probe {
        bench,
        windows: s.windows_per_probe,
        visited: Vec::new(),
        count: 0,
    };
    let mut current = start;
    let mut best = initial_gain;
    let mut per_stage = [0usize; 2];

    while opt.stage != Stage::Done {
        let (coord, set, half, range): (f64, Setter, f64, (f64, f64)) =
            match opt.stage {
                Stage::BlueResonance => (
                    current.sum(),
                    ThermalState::with_sum,
                    s.probe_step,
                    s.bounds.sum_range(current.diff()),
                ),
                _ => (
                    current.diff(),
                    ThermalState::with_diff,
                    s.interference_step,
                    s.bounds.diff_range(current.sum()),
                ),
            };
        let clip = |x: f64| x.clamp(range.0, range.1);
        let base = current;
        let before = probe.count;

        let up = probe.gain_at(set(&base, clip(coord + s.tolerance)))?;
        let down = probe.gain_at(set(&base, clip(coord - s.tolerance)))?;
        if best >= up && best >= down {
            probe.bench.apparatus_mut().set_thermal(base)?;
            probe.visited.push(base);
        } else {
            let found = golden_max(
                |x| probe.gain_at(set(&base, x)),
                clip(coord - half),
                clip(coord + half),
                s.tolerance,
                s.shrink,
            )?;
            current = set(&base, found.x);
            best = probe.gain_at(current)?;
        }
        let idx = if opt.stage == Stage::BlueResonance { 0 } else { 1 };
        per_stage[idx] = probe.count - before;
        opt.advance();
    }

    let visited = probe.visited;
    Ok(TempOptimization {
        thermal: current,
        gain: best,
        initial_gain,
        probes_per_stage: per_stage,
        visited,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::ExtremaOptions;
    use crate::apparatus::ApparatusConfig;
    use crate::control::LockSettings;
    use crate::optics::{pump_for_gain, threshold_power, CavityParams};

    fn locked_bench(thermal: ThermalState, diffusion: f64) -> Bench {
        let mut cfg = ApparatusConfig::default();
        cfg.drift.diffusion_mhz_per_sqrt_s = diffusion;
        cfg.initial.thermal = thermal;
        let mut b = Bench::new(cfg, LockSettings::default(), ExtremaOptions::default()).unwrap();
        b.engage_lock_here(1.0);
        b
    }

    fn pump() -> f64 {
        pump_for_gain(1.4, threshold_power(&CavityParams::default()).unwrap()).unwrap()
    }

    #[test]
    fn already_optimal_stays_put() {
        let opt_t = crate::optics::TuningResponse::default().optimum();
        let mut b = locked_bench(opt_t, 0.0);
        let mut o = TempOptimizer::new(OptimizerSettings::default()).unwrap();
        let r = optimize_temperatures(&mut b, &mut o, pump()).unwrap();
        assert!(r.probes_per_stage.iter().all(|&n| n <= 2), "{:?}", r.probes_per_stage);
        assert!((r.sum() - opt_t.sum()).abs() <= 0.005);
        assert!((r.diff() - opt_t.diff()).abs() <= 0.005);
        assert_eq!(o.stage, Stage::Done);
    }

    #[test]
    fn zero_pump_is_flat() {
        let start = crate::optics::TuningResponse::default().optimum();
        let mut b = locked_bench(start, 0.0);
        let mut o = TempOptimizer::new(OptimizerSettings::default()).unwrap();
        assert!(matches!(
            optimize_temperatures(&mut b, &mut o, 0.0),
            Err(ControlError::FlatGain { .. })
        ));
    }

    #[test]
    fn requires_lock() {
        let mut cfg = ApparatusConfig::default();
        cfg.drift.diffusion_mhz_per_sqrt_s = 0.0;
        let mut b = Bench::new(cfg, LockSettings::default(), ExtremaOptions::default()).unwrap();
        let mut o = TempOptimizer::new(OptimizerSettings::default()).unwrap();
        assert_eq!(optimize_temperatures(&mut b, &mut o, pump()), Err(ControlError::NotLocked));
    }

    #[test]
    fn never_leaves_safety_bounds() {
        let resp = crate::optics::TuningResponse::default();
        let start = ThermalState::from_sum_diff(resp.active_opt, resp.sum_opt + 0.1, resp.diff_opt + 0.2);
        let mut b = locked_bench(start, 0.5);
        let settings = OptimizerSettings {
            bounds: TempBounds {
                min_c: 30.0,
                max_c: 37.2,
            },
            ..OptimizerSettings::default()
        };
        let mut o = TempOptimizer::new(settings).unwrap();
        let r = optimize_temperatures(&mut b, &mut o, pump()).unwrap();
        assert!(r.visited.iter().all(|t| settings.bounds.contains(t)));
    }

    #[test]
    fn settings_validation() {
        let bad = OptimizerSettings {
            shrink: 0.4,
            ..OptimizerSettings::default()
        };
        assert!(TempOptimizer::new(bad).is_err());
        assert!(Stage::BlueResonance < Stage::Interference && Stage::Interference < Stage::Done);
    }
}
