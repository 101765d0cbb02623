use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::dataset::{RecordTable, Value};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousDistortion {
    pub column: String,
    /// `sanitized - original` in raw units, one entry per compared row.
    pub differences: Vec<f64>,
    pub histogram: Vec<HistogramBin>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoricalFlips {
    pub column: String,
    pub flips: usize,
    pub compared: usize,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionSummary {
    pub continuous: Vec<ContinuousDistortion>,
    pub categorical: Vec<CategoricalFlips>,
    pub compared_rows: usize,
    /// Original rows with no sanitized counterpart (dropped by the mechanism).
    pub excluded_rows: usize,
}

pub const DEFAULT_BINS: usize = 20;

/// Compares each sanitized row with the original row it came from:
/// `sanitized.rows[j]` was produced from `original.rows[source_rows[j]]`.
pub fn distortion(
    original: &RecordTable,
    sanitized: &RecordTable,
    source_rows: &[usize],
    bins: usize,
) -> Result<DistortionSummary, MetricsError> {
    if original.schema.fingerprint() != sanitized.schema.fingerprint() {
        return Err(MetricsError::SchemaMismatch);
    }
    if sanitized.len() != source_rows.len() {
        return Err(MetricsError::LengthMismatch(
            sanitized.len(),
            source_rows.len(),
        ));
    }
    let schema = &original.schema;
    let mut continuous = Vec::new();
    let mut categorical = Vec::new();
    for (i, col) in schema.features().enumerate() {
        let pairs = sanitized
            .rows
            .iter()
            .zip(source_rows)
            .map(|(s, &o)| (original.rows[o].values[i], s.values[i]));
        if col.is_categorical() {
            let flips = pairs.filter(|(a, b)| a != b).count();
            let compared = source_rows.len();
            categorical.push(CategoricalFlips {
                column: col.name.clone(),
                flips,
                compared,
                rate: if compared == 0 {
                    0.0
                } else {
                    flips as f64 / compared as f64
                },
            });
        } else {
            let differences: Vec<f64> = pairs
                .map(|(a, b)| match (a, b) {
                    (Value::Number(a), Value::Number(b)) => b - a,
                    _ => f64::NAN,
                })
                .collect();
            continuous.push(ContinuousDistortion {
                column: col.name.clone(),
                histogram: histogram(&differences, bins),
                differences,
            });
        }
    }
    Ok(DistortionSummary {
        continuous,
        categorical,
        compared_rows: source_rows.len(),
        excluded_rows: original.len().saturating_sub(source_rows.len()),
    })
}

/// Row-by-row comparison of two equally long tables.
pub fn distortion_aligned(
    original: &RecordTable,
    sanitized: &RecordTable,
) -> Result<DistortionSummary, MetricsError> {
    let idx: Vec<usize> = (0..sanitized.len()).collect();
    if original.len() != sanitized.len() {
        return Err(MetricsError::LengthMismatch(
            original.len(),
            sanitized.len(),
        ));
    }
    distortion(original, sanitized, &idx, DEFAULT_BINS)
}

/// Fixed-width bins spanning `[min, max]`. A constant sample gets a single
/// unit-wide bin centred on the value.
pub fn histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return vec![HistogramBin {
            left: lo - 0.5,
            right: hi + 0.5,
            count: finite.len(),
        }];
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in finite {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            left: lo + width * k as f64,
            right: if k + 1 == bins {
                hi
            } else {
                lo + width * (k + 1) as f64
            },
            count,
        })
        .collect()
}
