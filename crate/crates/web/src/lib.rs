//! Browser bindings for three interactive views of the twin: the squeezing
//! spectrum, the crystal-temperature landscape and the side-of-fringe walk.

use opotwin::control::{lock_update, LockController, LockSettings};
use opotwin::optics::{
    apply_passive_loss, pump_amplitude, quadrature_noise, threshold_power, tuning_factor,
    CavityParams, EfficiencyBudget, Quadrature, ThermalState, TuningResponse,
};
use wasm_bindgen::prelude::*;

fn js(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn db(v: f64) -> f64 {
    10.0 * v.log10()
}

/// Squeezed and anti-squeezed levels (dB re shot noise) at `points` sideband
/// frequencies from 0 to `max_mhz`, laid out as `[f, sq, anti, f, sq, anti, ..]`.
pub fn spectrum(
    pump_w: f64,
    eta: f64,
    filter: f64,
    max_mhz: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    let cav = CavityParams::default();
    let p_th = threshold_power(&cav).map_err(|e| e.to_string())?;
    let mu = pump_amplitude(pump_w, p_th).map_err(|e| e.to_string())?;
    if points < 2 || max_mhz.is_nan() || max_mhz <= 0.0 {
        return Err("need at least two points and a positive span".into());
    }
    let hw = cav.half_width_mhz();
    let mut out = Vec::with_capacity(3 * points);
    for k in 0..points {
        let f = max_mhz * k as f64 / (points - 1) as f64;
        out.push(f);
        for q in [Quadrature::Squeezed, Quadrature::Antisqueezed] {
            let v = quadrature_noise(f, hw, mu, eta, q).map_err(|e| e.to_string())?;
            let v = apply_passive_loss(v, filter).map_err(|e| e.to_string())?;
            out.push(db(v));
        }
    }
    Ok(out)
}

/// Tuning factor on an `n x n` grid of side-heater sum and difference
/// around the optimum, row-major with the sum along rows.
pub fn landscape(active_c: f64, span_sum: f64, span_diff: f64, n: usize) -> Vec<f64> {
    let resp = TuningResponse::default();
    let axis = |c: f64, span: f64, k: usize| c - span + 2.0 * span * k as f64 / (n - 1).max(1) as f64;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let s = axis(resp.sum_opt, span_sum, i);
            let d = axis(resp.diff_opt, span_diff, j);
            out.push(tuning_factor(&ThermalState::from_sum_diff(active_c, s, d), &resp));
        }
    }
    out
}

/// Noise-free walk lock on the cavity transmission with a drifting laser.
#[wasm_bindgen]
pub struct LockWalk {
    cavity: CavityParams,
    ctrl: LockController,
    offset_mhz: f64,
    laser_mhz: f64,
    time_s: f64,
}

impl LockWalk {
    pub fn create(start_mhz: f64) -> Result<LockWalk, String> {
        let cavity = CavityParams::default();
        let mut ctrl = LockController::new(&LockSettings::default()).map_err(|e| e.to_string())?;
        ctrl.engage(cavity.transmission(start_mhz), 1);
        Ok(LockWalk {
            cavity,
            ctrl,
            offset_mhz: 0.0,
            laser_mhz: start_mhz,
            time_s: 0.0,
        })
    }

    /// Advances `windows` seed windows while the laser drifts at `drift`
    /// MHz/s; returns the detuning after each window.
    pub fn advance(&mut self, windows: usize, drift: f64) -> Result<Vec<f64>, String> {
        let mut out = Vec::with_capacity(windows);
        for _ in 0..windows {
            self.time_s += self.ctrl.period_s;
            self.laser_mhz += drift * self.ctrl.period_s;
            let det = self.laser_mhz + self.offset_mhz;
            let (next, act) = lock_update(&self.ctrl, self.cavity.transmission(det)).map_err(|e| e.to_string())?;
            self.ctrl = next;
            self.offset_mhz += act.mhz();
            out.push(self.laser_mhz + self.offset_mhz);
        }
        Ok(out)
    }
}

#[wasm_bindgen]
impl LockWalk {
    #[wasm_bindgen(constructor)]
    pub fn new(start_mhz: f64) -> Result<LockWalk, JsValue> {
        Self::create(start_mhz).map_err(js)
    }

    pub fn step(&mut self, windows: usize, drift_mhz_per_s: f64) -> Result<Vec<f64>, JsValue> {
        self.advance(windows, drift_mhz_per_s).map_err(js)
    }

    pub fn kick(&mut self, mhz: f64) {
        self.laser_mhz += mhz;
    }

    #[wasm_bindgen(getter)]
    pub fn time_s(&self) -> f64 {
        self.time_s
    }

    #[wasm_bindgen(getter)]
    pub fn transmission(&self) -> f64 {
        self.cavity.transmission(self.laser_mhz + self.offset_mhz)
    }
}

#[wasm_bindgen]
pub fn squeezing_spectrum(
    pump_w: f64,
    eta: f64,
    filter: f64,
    max_mhz: f64,
    points: usize,
) -> Result<Vec<f64>, JsValue> {
    spectrum(pump_w, eta, filter, max_mhz, points).map_err(js)
}

#[wasm_bindgen]
pub fn tuning_landscape(active_c: f64, span_sum: f64, span_diff: f64, n: usize) -> Vec<f64> {
    landscape(active_c, span_sum, span_diff, n)
}

#[wasm_bindgen]
pub fn threshold_w() -> f64 {
    threshold_power(&CavityParams::default()).unwrap_or(f64::NAN)
}

#[wasm_bindgen]
pub fn default_efficiency() -> f64 {
    EfficiencyBudget::default().total()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_brackets_shot_noise_and_relaxes_with_frequency() {
        let s = spectrum(0.013, 0.78, 1.0, 500.0, 11).unwrap();
        assert_eq!(s.len(), 33);
        assert!(s[1] < 0.0 && s[2] > 0.0);
        let (sq0, sq_end) = (s[1], s[s.len() - 2]);
        assert!(sq_end > sq0);
        // attenuation pulls both levels toward shot noise
        let f = spectrum(0.013, 0.78, 0.5, 500.0, 11).unwrap();
        assert!(f[1] > s[1] && f[2] < s[2]);
    }

    #[test]
    fn spectrum_rejects_pump_above_threshold() {
        assert!(spectrum(2.0, 0.78, 1.0, 100.0, 5).is_err());
        assert!(spectrum(0.01, 0.78, 1.0, 100.0, 1).is_err());
    }

    #[test]
    fn landscape_peaks_at_centre() {
        let g = landscape(41.0, 0.5, 1.0, 21);
        let centre = g[10 * 21 + 10];
        assert!((centre - 1.0).abs() < 1e-12);
        assert!(g.iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
    }

    #[test]
    fn walk_holds_resonance_under_slow_drift() {
        let mut w = LockWalk::create(20.0).unwrap();
        let d = w.advance(600, 5.0).unwrap();
        let tail = &d[300..];
        assert!(tail.iter().all(|x| x.abs() < 15.0), "{:?}", &tail[..10]);
    }

    #[test]
    fn walk_recaptures_after_kick() {
        let mut w = LockWalk::create(0.0).unwrap();
        w.advance(100, 0.0).unwrap();
        w.kick(80.0);
        let d = w.advance(200, 0.0).unwrap();
        assert!(d.last().unwrap().abs() < 15.0, "{}", d.last().unwrap());
    }

    #[test]
    fn walk_falls_behind_fast_drift() {
        let mut w = LockWalk::create(0.0).unwrap();
        let d = w.advance(600, 40.0).unwrap();
        assert!(d.last().unwrap().abs() > 200.0);
    }
}
