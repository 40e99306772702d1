use serde::{Deserialize, Serialize};

use super::{AnalysisError, Result};

/// How per-window extrema are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtremaOptions {
    /// Tail fraction cut from each end: the reported extrema are the
    /// `percentile` and `1 - percentile` quantiles.
    pub percentile: f64,
    /// Half-width (in samples) of the centred moving average applied first.
    pub smoothing: usize,
    /// Shortest modulation period (s) the window must contain.
    pub min_period: f64,
}

impl Default for ExtremaOptions {
    fn default() -> Self {
        Self {
            percentile: 0.01,
            smoothing: 0,
            min_period: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrema {
    pub start: f64,
    pub max: f64,
    pub min: f64,
    pub samples: usize,
}

fn smooth(values: &[f64], half: usize) -> Vec<f64> {
    if half == 0 {
        return values.to_vec();
    }
    let n = values.len();
    (0..n)
        .map(|i| {
            // symmetric truncation at the edges keeps the filter reversible
            let h = half.min(i).min(n - 1 - i);
            let s: f64 = values[i - h..=i + h].iter().sum();
            s / (2 * h + 1) as f64
        })
        .collect()
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// `(max, min)` of one block of samples under `opts`; `None` when empty.
pub fn robust_extrema(values: &[f64], opts: &ExtremaOptions) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut v = smooth(values, opts.smoothing);
    v.sort_by(f64::total_cmp);
    let p = opts.percentile.clamp(0.0, 0.5);
    Some((quantile(&v, 1.0 - p), quantile(&v, p)))
}

/// Splits a timestamped trace into consecutive windows of length `window`
/// (anchored at the first sample) and returns robust extrema for each
/// non-empty window.
pub fn extract_minmax(
    times: &[f64],
    values: &[f64],
    window: f64,
    opts: &ExtremaOptions,
) -> Result<Vec<Extrema>> {
    if times.len() != values.len() {
        return Err(AnalysisError::Domain(format!(
            "{} timestamps for {} values",
            times.len(),
            values.len()
        )));
    }
    if !(window > 0.0) || window < opts.min_period {
        return Err(AnalysisError::InsufficientData(format!(
            "window {window} s is shorter than one modulation period ({} s)",
            opts.min_period
        )));
    }
    let Some(&t0) = times.first() else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    let mut begin = 0;
    while begin < times.len() {
        let idx = ((times[begin] - t0) / window + 1e-9).floor();
        let end_t = t0 + (idx + 1.0) * window;
        let mut end = begin;
        while end < times.len() && times[end] < end_t - 1e-12 {
            end += 1;
        }
        if end == begin {
            end += 1;
        }
        let (max, min) = robust_extrema(&values[begin..end], opts).expect("non-empty window");
        out.push(Extrema {
            start: t0 + idx * window,
            max,
            min,
            samples: end - begin,
        });
        begin = end;
    }
    Ok(out)
}
