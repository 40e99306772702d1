use serde::{Deserialize, Serialize};

use super::{AnalysisError, Result};

/// Noise power against pump phase, `mean + amplitude·cos(φ − phase0)`.
///
/// The quadrature variance seen by a fixed LO is sinusoidal in the pump
/// phase, so the squeezed and antisqueezed levels are the two turning
/// points of this fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSinusoid {
    pub mean: f64,
    pub amplitude: f64,
    pub phase0: f64,
    pub rms_residual: f64,
}

impl PhaseSinusoid {
    pub fn min(&self) -> f64 {
        self.mean - self.amplitude
    }

    pub fn max(&self) -> f64 {
        self.mean + self.amplitude
    }

    pub fn eval(&self, phase: f64) -> f64 {
        self.mean + self.amplitude * (phase - self.phase0).cos()
    }
}

fn solve3(mut a: [[f64; 4]; 3]) -> Option<[f64; 3]> {
    for c in 0..3 {
        let p = (c..3).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        a.swap(c, p);
        if a[c][c].abs() < 1e-12 {
            return None;
        }
        for r in 0..3 {
            if r != c {
                let f = a[r][c] / a[c][c];
                let pivot = a[c];
                for (x, p) in a[r].iter_mut().zip(pivot).skip(c) {
                    *x -= f * p;
                }
            }
        }
    }
    Some([a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]])
}

/// Linear least-squares fit of a sinusoid in pump phase.
pub fn fit_phase_sinusoid(phases: &[f64], values: &[f64]) -> Result<PhaseSinusoid> {
    if phases.len() != values.len() {
        return Err(AnalysisError::Domain(format!(
            "{} phases for {} values",
            phases.len(),
            values.len()
        )));
    }
    if phases.len() < 3 {
        return Err(AnalysisError::InsufficientData(
            "phase fit needs at least 3 points".into(),
        ));
    }
    let n = phases.len() as f64;
    let mut m = [[0.0; 4]; 3];
    for (&p, &y) in phases.iter().zip(values) {
        let basis = [1.0, p.cos(), p.sin()];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] += basis[r] * basis[c] / n;
            }
            m[r][3] += basis[r] * y / n;
        }
    }
    let [mean, a, b] = solve3(m).ok_or_else(|| {
        AnalysisError::InsufficientData("pump phase does not cover enough of a cycle".into())
    })?;
    let amplitude = a.hypot(b);
    let phase0 = b.atan2(a);
    let fit = PhaseSinusoid {
        mean,
        amplitude,
        phase0,
        rms_residual: 0.0,
    };
    let ss: f64 = phases
        .iter()
        .zip(values)
        .map(|(&p, &y)| (y - fit.eval(p)).powi(2))
        .sum();
    Ok(PhaseSinusoid {
        rms_residual: (ss / n).sqrt(),
        ..fit
    })
}
