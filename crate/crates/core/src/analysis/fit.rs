use serde::{Deserialize, Serialize};

use super::{dbm_to_mw, mw_to_dbm, AnalysisError, Result};
use crate::search::{golden_max, INV_PHI};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    #[serde(rename = "pump_w")]
    pub pump_w: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisePoint {
    pub lo_mw: f64,
    pub noise_dbm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFit {
    pub p_th: f64,
    pub rms_residual: f64,
}

fn model_gain(pump: f64, p_th: f64) -> f64 {
    (1.0 - (pump / p_th).sqrt()).powi(-2)
}

fn sse(points: &[GainPoint], p_th: f64) -> f64 {
    points
        .iter()
        .map(|p| (p.gain - model_gain(p.pump_w, p_th)).powi(2))
        .sum()
}

/// Derivative of the squared error with respect to `ln p_th`.
fn sse_slope(points: &[GainPoint], p_th: f64) -> f64 {
    points
        .iter()
        .map(|p| {
            let u = (p.pump_w / p_th).sqrt();
            let m = (1.0 - u).powi(-2);
            -2.0 * (m - p.gain) * u * (1.0 - u).powi(-3)
        })
        .sum()
}

/// Least-squares fit of the below-threshold gain law in its single
/// parameter, the threshold power.
pub fn fit_threshold(points: &[GainPoint]) -> Result<ThresholdFit> {
    if points.len() < 3 {
        return Err(AnalysisError::InsufficientData(format!(
            "threshold fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    for p in points {
        if !(p.pump_w >= 0.0) || !p.pump_w.is_finite() || !p.gain.is_finite() {
            return Err(AnalysisError::Fit(format!("invalid point {p:?}")));
        }
        if p.gain < 1.0 {
            return Err(AnalysisError::Fit(format!(
                "gain {} < 1 at {} W is not a below-threshold amplifier",
                p.gain, p.pump_w
            )));
        }
    }
    // Per-point threshold estimates seed the bracket.
    let estimates: Vec<f64> = points
        .iter()
        .filter(|p| p.pump_w > 0.0 && p.gain > 1.0)
        .map(|p| p.pump_w / (1.0 - p.gain.sqrt().recip()).powi(2))
        .collect();
    if estimates.is_empty() {
        return Err(AnalysisError::Fit(
            "no point shows gain, threshold is unconstrained".into(),
        ));
    }
    let max_pump = points.iter().map(|p| p.pump_w).fold(0.0, f64::max);
    let max_est = estimates.iter().copied().fold(0.0, f64::max);
    let lo = (max_pump * (1.0 + 1e-9)).ln();
    let hi = (max_est * 10.0).ln();

    // Coarse log-grid scan, then refine around the best node.
    const NODES: usize = 400;
    let step = (hi - lo) / NODES as f64;
    let cost = |s: f64| sse(points, s.exp());
    let best = (0..=NODES)
        .map(|i| (i, cost(lo + i as f64 * step)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .expect("grid is non-empty");
    if best == NODES {
        return Err(AnalysisError::Fit(
            "fit did not converge: optimum runs to infinite threshold".into(),
        ));
    }
    let mut a = lo + best.saturating_sub(1) as f64 * step;
    let mut b = lo + (best + 1).min(NODES) as f64 * step;
    let slope = |s: f64| sse_slope(points, s.exp());
    let s_opt = if slope(a) < 0.0 && slope(b) > 0.0 {
        // bisect the stationarity condition to machine precision
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if slope(m) < 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    } else {
        golden_max(
            |s| Ok::<_, std::convert::Infallible>(-cost(s)),
            a,
            b,
            1e-12,
            INV_PHI,
        )
        .unwrap_or_else(|e| match e {})
        .x
    };
    let p_th = s_opt.exp();
    if !p_th.is_finite() {
        return Err(AnalysisError::Fit("fit did not converge".into()));
    }
    Ok(ThresholdFit {
        p_th,
        rms_residual: (sse(points, p_th) / points.len() as f64).sqrt(),
    })
}

/// Straight-line calibration of homodyne noise against LO power, fitted in
/// linear power units. The offset is the electronic floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotNoiseFit {
    /// Shot-noise power (mW in the analysis bandwidth) per mW of LO.
    pub slope: f64,
    pub offset_mw: f64,
    pub offset_dbm: f64,
    /// dB residual of each input point, in input order.
    pub residuals_db: Vec<f64>,
}

impl ShotNoiseFit {
    pub fn predict_mw(&self, lo_mw: f64) -> f64 {
        self.offset_mw + self.slope * lo_mw
    }

    /// Shot-plus-electronic over electronic noise at `lo_mw`.
    pub fn clearance_at(&self, lo_mw: f64) -> f64 {
        self.predict_mw(lo_mw) / self.offset_mw
    }

    /// Largest absolute dB residual among points at or below `up_to_mw`.
    pub fn max_residual_db(&self, points: &[NoisePoint], up_to_mw: f64) -> f64 {
        points
            .iter()
            .zip(&self.residuals_db)
            .filter(|(p, _)| p.lo_mw <= up_to_mw)
            .map(|(_, r)| r.abs())
            .fold(0.0, f64::max)
    }

    /// Highest tested LO power up to which every residual stays within
    /// `tol_db` of the straight line.
    pub fn shot_noise_limited_up_to(&self, points: &[NoisePoint], tol_db: f64) -> f64 {
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| points[a].lo_mw.total_cmp(&points[b].lo_mw));
        let mut limit = 0.0;
        for i in order {
            if self.residuals_db[i].abs() >= tol_db {
                break;
            }
            limit = points[i].lo_mw;
        }
        limit
    }
}

pub fn fit_shot_noise(points: &[NoisePoint]) -> Result<ShotNoiseFit> {
    if points.len() < 3 {
        return Err(AnalysisError::InsufficientData(format!(
            "shot-noise fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| !(p.lo_mw >= 0.0) || !p.noise_dbm.is_finite()) {
        return Err(AnalysisError::Domain("LO powers must be non-negative".into()));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.lo_mw).collect();
    let ys: Vec<f64> = points.iter().map(|p| dbm_to_mw(p.noise_dbm)).collect();
    let x_max = xs.iter().copied().fold(0.0, f64::max);
    let x_min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    if !(x_min <= 0.5 * x_max) {
        return Err(AnalysisError::InsufficientData(
            "calibration needs points in the low-power region".into(),
        ));
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let offset = my - slope * mx;
    // A slope whose whole contribution is at rounding level counts as zero.
    if !(slope * x_max > 1e-9 * my.abs()) {
        return Err(AnalysisError::Calibration(format!(
            "no shot-noise dependence on LO power (slope {slope:e})"
        )));
    }
    if !(offset > 0.0) {
        return Err(AnalysisError::Calibration(format!(
            "non-positive electronic floor {offset:e} mW"
        )));
    }
    let residuals_db = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| 10.0 * (y / (offset + slope * x)).log10())
        .collect();
    Ok(ShotNoiseFit {
        slope,
        offset_mw: offset,
        offset_dbm: mw_to_dbm(offset)?,
        residuals_db,
    })
}
