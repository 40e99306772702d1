use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::spectrum::{SAConfig, SpectrumAnalyzer};
use super::MemsPosition;
use crate::analysis::{dbm_to_mw, NoisePoint};

/// Balanced detector and RF chain feeding the spectrum analyzer.
///
/// Noise levels are quoted as powers within `reference_rbw_mhz`; synthesized
/// samples carry that normalisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorModel {
    /// LO-independent floor, dBm per reference RBW.
    pub electronic_noise_dbm: f64,
    /// Shot-noise level produced by 1 mW of LO well inside the detector
    /// bandwidth, dBm per reference RBW. Shot noise is linear in LO power.
    pub shot_noise_dbm_per_mw: f64,
    pub reference_rbw_mhz: f64,
    /// Single-pole bandwidth of the differential gain stage, MHz.
    pub bandwidth_mhz: f64,
    /// Independent RF samples synthesized per simulation tick.
    pub samples_per_tick: usize,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            electronic_noise_dbm: -70.75,
            shot_noise_dbm_per_mw: -71.50,
            reference_rbw_mhz: 3.0,
            bandwidth_mhz: 45.0,
            samples_per_tick: 1000,
        }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.reference_rbw_mhz > 0.0 && self.bandwidth_mhz > 0.0) {
            return Err("detector bandwidths must be positive".into());
        }
        if self.samples_per_tick == 0 {
            return Err("samples_per_tick must be at least 1".into());
        }
        if !self.electronic_noise_dbm.is_finite() || !self.shot_noise_dbm_per_mw.is_finite() {
            return Err("detector noise levels must be finite".into());
        }
        Ok(())
    }

    pub fn electronic_mw(&self) -> f64 {
        dbm_to_mw(self.electronic_noise_dbm)
    }

    /// Power response of the gain stage at `freq_mhz`.
    pub fn response(&self, freq_mhz: f64) -> f64 {
        let x = freq_mhz / self.bandwidth_mhz;
        1.0 / (1.0 + x * x)
    }

    /// Shot-noise power (mW per reference RBW) for `lo_mw` of LO, observed
    /// at `freq_mhz`.
    pub fn shot_mw(&self, lo_mw: f64, freq_mhz: f64) -> f64 {
        dbm_to_mw(self.shot_noise_dbm_per_mw) * lo_mw.max(0.0) * self.response(freq_mhz)
    }
}

/// One RF sample of the homodyne difference current: a zero-mean Gaussian
/// whose variance is the squeezed-light noise `variance * shot` plus the
/// electronic noise power.
pub fn homodyne_sample(variance: f64, shot: f64, electronic: f64, rng: &mut impl Rng) -> f64 {
    let sigma = (variance * shot + electronic).sqrt();
    let z: f64 = rng.sample(StandardNormal);
    sigma * z
}

pub fn homodyne_block(
    variance: f64,
    shot: f64,
    electronic: f64,
    n: usize,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let sigma = (variance * shot + electronic).sqrt();
    (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            sigma * z
        })
        .collect()
}

/// Pump-off noise level versus LO power, as read from the analyzer trace.
///
/// Each power is held for `dwell_s`; the first ten video time constants of
/// every dwell are discarded before averaging the trace in linear units.
pub fn lo_power_scan(
    powers_mw: &[f64],
    detector: &DetectorModel,
    sa: &SAConfig,
    dwell_s: f64,
    tick_s: f64,
    rng: &mut impl Rng,
) -> Vec<NoisePoint> {
    let ticks = (dwell_s / tick_s).round().max(1.0) as usize;
    let skip = ((10.0 * sa.video_time_constant() / tick_s).ceil() as usize).min(ticks - 1);
    let electronic = detector.electronic_mw();
    powers_mw
        .iter()
        .map(|&lo| {
            let shot = detector.shot_mw(lo, sa.center_freq_mhz);
            let mut analyzer = SpectrumAnalyzer::new(*sa, detector.reference_rbw_mhz, tick_s);
            let mut sum = 0.0;
            for k in 0..ticks {
                let block = homodyne_block(1.0, shot, electronic, detector.samples_per_tick, rng);
                let p = analyzer.push(k as f64 * tick_s, 0.0, MemsPosition::Lo, &block);
                if k >= skip {
                    sum += p.map(|p| p.power_mw()).unwrap_or(0.0);
                }
            }
            let mean = sum / (ticks - skip) as f64;
            NoisePoint {
                lo_mw: lo,
                noise_dbm: 10.0 * mean.log10(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn variance(xs: &[f64]) -> f64 {
        xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64
    }

    #[test]
    fn shot_noise_limit_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| homodyne_sample(1.0, 2.0, 0.0, &mut rng))
            .collect();
        assert!((variance(&xs) / 2.0 - 1.0).abs() < 0.005);
    }

    #[test]
    fn squeezed_variance_reads_back_in_db() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs = homodyne_block(0.6514, 1.0, 0.0, 1_000_000, &mut rng);
        let db = 10.0 * variance(&xs).log10();
        assert!((db + 1.862).abs() < 0.05, "{db}");
    }

    #[test]
    fn no_lo_leaves_electronic_noise() {
        let d = DetectorModel::default();
        assert_eq!(d.shot_mw(0.0, 10.0), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs = homodyne_block(0.5, d.shot_mw(0.0, 10.0), d.electronic_mw(), 400_000, &mut rng);
        assert!((variance(&xs) / d.electronic_mw() - 1.0).abs() < 0.01);
    }

    #[test]
    fn total_noise_increases_with_lo() {
        let d = DetectorModel::default();
        let mut last = d.electronic_mw();
        for lo in [0.1, 0.5, 1.0, 3.0] {
            let total = d.shot_mw(lo, 10.0) + d.electronic_mw();
            assert!(total > last);
            last = total;
        }
    }

    #[test]
    fn scan_starts_at_the_electronic_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = lo_power_scan(
            &[0.0, 1.0, 2.0, 3.0],
            &DetectorModel::default(),
            &SAConfig::default(),
            0.5,
            1e-3,
            &mut rng,
        );
        assert!((pts[0].noise_dbm + 70.75).abs() < 0.05, "{}", pts[0].noise_dbm);
        assert!(pts.windows(2).all(|w| w[1].noise_dbm > w[0].noise_dbm));
    }
}
