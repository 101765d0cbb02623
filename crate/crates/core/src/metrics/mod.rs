//! Scoring: accuracy/F1, privacy leakage and utility performance, group
//! fairness gaps, and distortion between original and sanitized records.

mod distortion;
mod fairness;
mod scores;
mod tradeoff;

pub use distortion::{
    distortion, distortion_aligned, histogram, CategoricalFlips, ContinuousDistortion,
    DistortionSummary, HistogramBin, DEFAULT_BINS,
};
pub use fairness::{fairness, FairnessScores};
pub use scores::{accuracy, class_f1, macro_f1, score, ScorePair};
pub use tradeoff::{
    privacy_leakage, tradeoff_ratio, utility_performance, Tradeoff, TradeoffScores,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no observations")]
    Empty,
    #[error("raw accuracy equals the random-guess baseline; ratio undefined")]
    DegenerateBaseline,
    #[error("undefined rate: {0}")]
    UndefinedRate(String),
    #[error("schema mismatch between original and sanitized tables")]
    SchemaMismatch,
}
