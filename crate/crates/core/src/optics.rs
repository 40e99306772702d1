//! Closed-form optics of a below-threshold degenerate OPO.
//!
//! Everything here is a pure function over small value types: parametric
//! gain, threshold, quadrature noise spectra, passive loss, the thermal
//! tuning landscape of the three-section crystal and the slow dispersive
//! (Kerr-like) detuning.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("pump power {pump} W is at or above threshold {threshold} W")]
    AboveThreshold { pump: f64, threshold: f64 },
    #[error("pump amplitude {0} is at or above threshold (mu >= 1)")]
    MuAboveThreshold(f64),
    #[error("nonlinear efficiency is zero, threshold is infinite")]
    InfiniteThreshold,
}

pub type Result<T> = std::result::Result<T, OpticsError>;

fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(OpticsError::Domain(msg.into()))
}

/// Static optical constants of the monolithic cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavityParams {
    /// Fundamental (795 nm) output-coupler power transmission.
    pub output_coupler: f64,
    /// Pump (397 nm) input-coupler power transmission.
    pub pump_coupler: f64,
    /// Fundamental cavity linewidth, full width at half maximum, in MHz.
    pub bandwidth_fwhm_mhz: f64,
    /// Single-pass conversion efficiency per unit length, W^-1 cm^-1 (fraction).
    pub d_per_cm: f64,
    /// Effective length of the poled section in cm.
    pub crystal_length_cm: f64,
}

impl Default for CavityParams {
    fn default() -> Self {
        Self {
            output_coupler: 0.14,
            pump_coupler: 0.31,
            bandwidth_fwhm_mhz: 250.0,
            d_per_cm: 0.00106,
            crystal_length_cm: 0.70,
        }
    }
}

impl CavityParams {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [
            ("output_coupler", self.output_coupler),
            ("pump_coupler", self.pump_coupler),
        ] {
            if !(t > 0.0 && t < 1.0) {
                return domain(format!("{name} must lie in (0,1), got {t}"));
            }
        }
        if !(self.bandwidth_fwhm_mhz > 0.0) {
            return domain("bandwidth_fwhm_mhz must be positive");
        }
        if !(self.d_per_cm >= 0.0) {
            return domain("d_per_cm must be non-negative");
        }
        if !(self.crystal_length_cm > 0.0) {
            return domain("crystal_length_cm must be positive");
        }
        Ok(())
    }

    /// Single-pass efficiency of the whole crystal, W^-1.
    pub fn nonlinear_efficiency(&self) -> f64 {
        self.d_per_cm * self.crystal_length_cm
    }

    pub fn half_width_mhz(&self) -> f64 {
        0.5 * self.bandwidth_fwhm_mhz
    }

    /// Lorentzian power transmission of the fundamental at `detuning_mhz`
    /// from resonance, normalised to 1 on resonance.
    pub fn transmission(&self, detuning_mhz: f64) -> f64 {
        let x = detuning_mhz / self.half_width_mhz();
        1.0 / (1.0 + x * x)
    }
}

/// Loss factors that together set the observable squeezing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EfficiencyBudget {
    /// Photodiode quantum efficiency.
    pub detector: f64,
    /// Homodyne fringe visibility; enters squared.
    pub visibility: f64,
    /// Propagation transmission of the squeezed beam.
    pub propagation: f64,
    /// Cavity escape efficiency.
    pub escape: f64,
}

impl Default for EfficiencyBudget {
    fn default() -> Self {
        Self {
            detector: 0.90,
            visibility: 0.98,
            propagation: 0.95,
            escape: 0.95,
        }
    }
}

impl EfficiencyBudget {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("detector", self.detector),
            ("visibility", self.visibility),
            ("propagation", self.propagation),
            ("escape", self.escape),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return domain(format!("efficiency factor {name} must lie in [0,1], got {v}"));
            }
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.detector * self.visibility * self.visibility * self.propagation * self.escape
    }
}

/// Temperatures (°C) of the active section and the two non-poled sides.
///
/// The sum and difference coordinates are always derived from the two side
/// temperatures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalState {
    pub active: f64,
    pub side1: f64,
    pub side2: f64,
}

impl ThermalState {
    pub fn from_sum_diff(active: f64, sum: f64, diff: f64) -> Self {
        Self {
            active,
            side1: sum + 0.5 * diff,
            side2: sum - 0.5 * diff,
        }
    }

    /// Mean side temperature, tunes the pump resonance.
    pub fn sum(&self) -> f64 {
        0.5 * (self.side1 + self.side2)
    }

    /// Side temperature difference, tunes forward/backward interference.
    pub fn diff(&self) -> f64 {
        self.side1 - self.side2
    }

    pub fn with_sum(&self, sum: f64) -> Self {
        Self::from_sum_diff(self.active, sum, self.diff())
    }

    pub fn with_diff(&self, diff: f64) -> Self {
        Self::from_sum_diff(self.active, self.sum(), diff)
    }
}

/// Phenomenological thermal tuning landscape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningResponse {
    pub active_opt: f64,
    pub sum_opt: f64,
    pub diff_opt: f64,
    /// Phase-matching acceptance width (°C), sinc² argument scale.
    pub phase_match_width: f64,
    /// Pump-resonance half width (°C) of the Lorentzian in the sum temperature.
    pub resonance_width: f64,
    /// Interference period (°C) in the difference temperature.
    pub interference_period: f64,
}

impl Default for TuningResponse {
    fn default() -> Self {
        Self {
            active_opt: 41.0,
            sum_opt: 36.5,
            diff_opt: 0.8,
            phase_match_width: 0.5,
            resonance_width: 0.2,
            interference_period: 1.0,
        }
    }
}

impl TuningResponse {
    pub fn validate(&self) -> Result<()> {
        if !(self.phase_match_width > 0.0
            && self.resonance_width > 0.0
            && self.interference_period > 0.0)
        {
            return domain("tuning widths and period must be positive");
        }
        Ok(())
    }

    pub fn optimum(&self) -> ThermalState {
        ThermalState::from_sum_diff(self.active_opt, self.sum_opt, self.diff_opt)
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Fraction of the pump power that is effective for down-conversion at the
/// given crystal temperatures; 1 at the joint optimum.
pub fn tuning_factor(thermal: &ThermalState, resp: &TuningResponse) -> f64 {
    let pm = sinc(PI * (thermal.active - resp.active_opt) / resp.phase_match_width);
    let rs = (thermal.sum() - resp.sum_opt) / resp.resonance_width;
    let it = (PI * (thermal.diff() - resp.diff_opt) / resp.interference_period).cos();
    pm * pm / (1.0 + rs * rs) * it * it
}

/// Parametric gain from the extrema of a phase-modulated seed:
/// `G = ¼ (√(Pmax/Pmin) + 1)²`.
pub fn gain_from_minmax(p_max: f64, p_min: f64) -> Result<f64> {
    if !(p_min > 0.0) || !(p_max >= p_min) || !p_max.is_finite() {
        return domain(format!(
            "need p_max >= p_min > 0, got p_max={p_max}, p_min={p_min}"
        ));
    }
    let r = (p_max / p_min).sqrt() + 1.0;
    Ok(0.25 * r * r)
}

/// Pump amplitude parameter `mu = sqrt(P/Pth)`.
pub fn pump_amplitude(pump_w: f64, p_th: f64) -> Result<f64> {
    if !(p_th > 0.0) || !p_th.is_finite() {
        return domain(format!("threshold must be positive and finite, got {p_th}"));
    }
    if !(pump_w >= 0.0) {
        return domain(format!("pump power must be non-negative, got {pump_w}"));
    }
    if pump_w >= p_th {
        return Err(OpticsError::AboveThreshold {
            pump: pump_w,
            threshold: p_th,
        });
    }
    Ok((pump_w / p_th).sqrt())
}

/// Below-threshold parametric gain `(1 - mu)^-2`.
pub fn parametric_gain(pump_w: f64, p_th: f64) -> Result<f64> {
    let mu = pump_amplitude(pump_w, p_th)?;
    Ok((1.0 - mu).powi(-2))
}

/// Inverse of [`parametric_gain`]: pump power that yields `gain`.
pub fn pump_for_gain(gain: f64, p_th: f64) -> Result<f64> {
    if !(gain >= 1.0) || !gain.is_finite() {
        return domain(format!("gain must be finite and >= 1, got {gain}"));
    }
    let mu = 1.0 - gain.sqrt().recip();
    Ok(mu * mu * p_th)
}

/// Threshold from coupler transmissions and crystal single-pass efficiency
/// `e_nl` (W^-1), assuming a critically coupled pump cavity.
pub fn threshold_from(output_coupler: f64, pump_coupler: f64, e_nl: f64) -> Result<f64> {
    if e_nl == 0.0 {
        return Err(OpticsError::InfiniteThreshold);
    }
    if !(e_nl > 0.0) {
        return domain(format!("nonlinear efficiency must be positive, got {e_nl}"));
    }
    let b = (2.0 - 0.5 * pump_coupler).powi(2);
    Ok(pump_coupler / (1.0 - pump_coupler) * output_coupler * output_coupler / (4.0 * b * e_nl))
}

pub fn threshold_power(params: &CavityParams) -> Result<f64> {
    params.validate()?;
    threshold_from(
        params.output_coupler,
        params.pump_coupler,
        params.nonlinear_efficiency(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    Squeezed,
    Antisqueezed,
}

/// Homodyne noise variance relative to shot noise at detection frequency
/// `omega_mhz`, for a cavity of half width `linewidth_mhz`.
pub fn quadrature_noise(
    omega_mhz: f64,
    linewidth_mhz: f64,
    mu: f64,
    eta: f64,
    quadrature: Quadrature,
) -> Result<f64> {
    if mu >= 1.0 {
        return Err(OpticsError::MuAboveThreshold(mu));
    }
    if !(mu >= 0.0) {
        return domain(format!("mu must be non-negative, got {mu}"));
    }
    if !(0.0..=1.0).contains(&eta) {
        return domain(format!("eta must lie in [0,1], got {eta}"));
    }
    if !(omega_mhz >= 0.0) || !(linewidth_mhz > 0.0) {
        return domain("need omega >= 0 and a positive linewidth");
    }
    let x = omega_mhz / linewidth_mhz;
    let x2 = if x.is_finite() { x * x } else { f64::INFINITY };
    Ok(match quadrature {
        Quadrature::Squeezed => 1.0 - 4.0 * eta * mu / ((1.0 + mu).powi(2) + x2),
        Quadrature::Antisqueezed => 1.0 + 4.0 * eta * mu / ((1.0 - mu).powi(2) + x2),
    })
}

/// A beam-splitter loss of power transmission `transmission` mixes in vacuum.
pub fn apply_passive_loss(variance: f64, transmission: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return domain(format!("variance must be positive, got {variance}"));
    }
    if !(0.0..=1.0).contains(&transmission) {
        return domain(format!("transmission must lie in [0,1], got {transmission}"));
    }
    Ok(transmission * variance + (1.0 - transmission))
}

/// Slow dispersive shift of the fundamental resonance driven by the
/// intracavity power history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KerrState {
    pub shift_mhz: f64,
    pub tau_s: f64,
    pub coupling_mhz_per_w: f64,
}

impl Default for KerrState {
    fn default() -> Self {
        Self {
            shift_mhz: 0.0,
            tau_s: 12.0,
            coupling_mhz_per_w: 0.0,
        }
    }
}

impl KerrState {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_s > 0.0) || !self.shift_mhz.is_finite() {
            return domain("kerr tau_s must be positive and shift finite");
        }
        Ok(())
    }
}

/// First-order relaxation of the shift toward `coupling * power` over `dt`.
/// A non-positive `dt` leaves the state unchanged.
pub fn kerr_step(state: &KerrState, intracavity_w: f64, dt: f64) -> KerrState {
    if !(dt > 0.0) {
        return *state;
    }
    let target = state.coupling_mhz_per_w * intracavity_w;
    let k = -(-dt / state.tau_s).exp_m1();
    KerrState {
        shift_mhz: state.shift_mhz + (target - state.shift_mhz) * k,
        ..*state
    }
}
