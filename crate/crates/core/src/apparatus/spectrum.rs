//! Zero-span spectrum-analyzer emulation.
//!
//! Samples arrive already band-limited to the analyzer's resolution band at
//! the center frequency, so the instrument reduces to a band-power estimate
//! per tick (scaled from the detector's reference RBW to the configured RBW)
//! followed by a single-pole video filter.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::MemsPosition;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SAConfig {
    pub center_freq_mhz: f64,
    pub rbw_mhz: f64,
    pub vbw_hz: f64,
}

impl Default for SAConfig {
    fn default() -> Self {
        Self {
            center_freq_mhz: 10.0,
            rbw_mhz: 3.0,
            vbw_hz: 100.0,
        }
    }
}

impl SAConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.center_freq_mhz > 0.0) {
            return Err("center frequency must be positive".into());
        }
        if !(self.rbw_mhz > 0.0 && self.vbw_hz > 0.0) {
            return Err("RBW and VBW must be positive".into());
        }
        if self.vbw_hz > self.rbw_mhz * 1e6 {
            return Err("VBW may not exceed RBW".into());
        }
        Ok(())
    }

    pub fn video_time_constant(&self) -> f64 {
        1.0 / (2.0 * PI * self.vbw_hz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub time_s: f64,
    pub phase_rad: f64,
    pub power_dbm: f64,
    pub mems: MemsPosition,
}

impl TracePoint {
    pub fn power_mw(&self) -> f64 {
        10f64.powf(self.power_dbm / 10.0)
    }
}

/// Power-versus-time record of the analyzer with its settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseTrace {
    pub config: SAConfig,
    pub points: Vec<TracePoint>,
}

impl NoiseTrace {
    pub fn new(config: SAConfig) -> Self {
        Self {
            config,
            points: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Writes `time_s,phase_rad,power_dbm,mems_pos` rows.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "time_s,phase_rad,power_dbm,mems_pos")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{}",
                p.time_s,
                p.phase_rad,
                p.power_dbm,
                p.mems.as_str()
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("trace CSV is ASCII")
    }
}

/// One tick worth of RF samples with the apparatus context they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBlock {
    pub time_s: f64,
    pub phase_rad: f64,
    pub mems: MemsPosition,
    pub samples: Vec<f64>,
}

/// Stateful analyzer fed one block of samples per tick.
#[derive(Debug, Clone)]
pub struct SpectrumAnalyzer {
    config: SAConfig,
    rbw_scale: f64,
    alpha: f64,
    video: Option<f64>,
}

impl SpectrumAnalyzer {
    pub fn new(config: SAConfig, reference_rbw_mhz: f64, tick_s: f64) -> Self {
        Self {
            config,
            rbw_scale: config.rbw_mhz / reference_rbw_mhz,
            alpha: -(-2.0 * PI * config.vbw_hz * tick_s).exp_m1(),
            video: None,
        }
    }

    pub fn config(&self) -> &SAConfig {
        &self.config
    }

    pub fn reset(&mut self) {
        self.video = None;
    }

    /// Feeds one block; returns the displayed point, or `None` for an empty
    /// block.
    pub fn push(
        &mut self,
        time_s: f64,
        phase_rad: f64,
        mems: MemsPosition,
        samples: &[f64],
    ) -> Option<TracePoint> {
        if samples.is_empty() {
            return None;
        }
        let band = samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64
            * self.rbw_scale;
        let y = match self.video {
            None => band,
            Some(y) => y + self.alpha * (band - y),
        };
        self.video = Some(y);
        Some(TracePoint {
            time_s,
            phase_rad,
            power_dbm: 10.0 * y.log10(),
            mems,
        })
    }
}

pub fn sa_zero_span(blocks: &[SampleBlock], config: SAConfig, reference_rbw_mhz: f64, tick_s: f64) -> NoiseTrace {
    let mut sa = SpectrumAnalyzer::new(config, reference_rbw_mhz, tick_s);
    let points = blocks
        .iter()
        .filter_map(|b| sa.push(b.time_s, b.phase_rad, b.mems, &b.samples))
        .collect();
    NoiseTrace { config, points }
}
