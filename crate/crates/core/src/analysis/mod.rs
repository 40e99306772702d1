//! Data reduction: dB bookkeeping, robust trace extrema, threshold and
//! shot-noise fits, phase-resolved quadrature levels, and electronic-noise
//! correction of squeezing levels.

mod db;
mod electronic;
mod extrema;
mod fit;
pub mod io;
mod quadrature;
mod report;

use thiserror::Error;

pub use db::{dbm_to_mw, from_db, mw_to_dbm, to_db};
pub use electronic::{correct_electronic, SqueezeResult};
pub use extrema::{extract_minmax, robust_extrema, Extrema, ExtremaOptions};
pub use fit::{fit_shot_noise, fit_threshold, GainPoint, NoisePoint, ShotNoiseFit, ThresholdFit};
pub use quadrature::{fit_phase_sinusoid, PhaseSinusoid};
pub use report::Report;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("unphysical measurement: raw level {raw_db} dB is at or below the electronic fraction {electronic_fraction}")]
    Unphysical { raw_db: f64, electronic_fraction: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;
