//! Feedback and optimisation loops that sit on top of the apparatus.

mod lock;
mod sweep;
mod tuning;

pub use lock::{
    lock_update, run_lock, AcquisitionSettings, DetuningSample, FreqAction, LockController,
    LockSettings,
};
pub use sweep::sweep_phase;
pub use tuning::{
    optimize_temperatures, OptimizerSettings, Stage, TempBounds, TempOptimization, TempOptimizer,
};

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::apparatus::SimError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("lock is not engaged")]
    NotLocked,
    #[error("lock lost at t = {time_s:.3} s (transmission {transmission:.3} of acquisition peak)")]
    LockLost { time_s: f64, transmission: f64 },
    #[error("lock acquisition found no resonance within ±{range_mhz} MHz")]
    AcquisitionFailed { range_mhz: f64 },
    #[error("gain is flat at {gain}: no pump light is being converted")]
    FlatGain { gain: f64 },
    #[error("invalid settings: {0}")]
    Settings(String),
}
