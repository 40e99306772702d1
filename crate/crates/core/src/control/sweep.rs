use crate::apparatus::{ScheduleConfig, SweepWaveform};

/// Pump phase (rad) commanded by the sweep generator at time `t_s`.
///
/// The ramp starts from zero at the opening of every seed window and reaches
/// `sweep_span_rad` as the window closes. During the LO window a triangle
/// returns linearly to zero while a sawtooth rests at zero.
pub fn sweep_phase(t_s: f64, schedule: &ScheduleConfig) -> f64 {
    let period = schedule.period();
    let seed_len = schedule.duty * period;
    let cycles = t_s / period;
    // snap tick times that land a hair before a period boundary
    let whole = (cycles + 1e-9).floor();
    let u = ((cycles - whole) * period).max(0.0);
    let span = schedule.sweep_span_rad;
    if u < seed_len {
        span * u / seed_len
    } else {
        match schedule.waveform {
            SweepWaveform::Triangle => span * (1.0 - (u - seed_len) / (period - seed_len)),
            SweepWaveform::Sawtooth => 0.0,
        }
    }
}
