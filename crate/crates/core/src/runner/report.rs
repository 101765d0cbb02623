use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, RunError, Task};
use crate::classifiers::{ClassifierKind, Target};
use crate::metrics::{CategoricalFlips, HistogramBin, TradeoffScores};

pub const REPORT_FORMAT: &str = "tabsan-evaluation";
pub const REPORT_VERSION: u32 = 1;

/// Sample mean and standard deviation (`n - 1` denominator; 0 for one value).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(MeanStd { mean, std, n })
    }
}

/// One attacker's score on one (seed, mechanism, target).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub seed: u64,
    pub mechanism: String,
    pub classifier: ClassifierKind,
    pub target: Target,
    pub accuracy: f64,
    pub f1: f64,
    /// Same attacker on the raw versions of the evaluated rows.
    pub raw_accuracy: f64,
    pub raw_f1: f64,
    pub evaluated_rows: usize,
    /// Rows answered by the zero-shot fallback class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_rows: Option<usize>,
}

/// Per (seed, mechanism) bookkeeping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub mechanism: String,
    pub test_rows: usize,
    pub evaluated_rows: usize,
    pub coverage: f64,
    pub sanitized: usize,
    pub passthrough: usize,
    pub dropped: usize,
    /// Best-constant accuracy on this seed's full test split.
    pub majority_rate_private: f64,
    pub majority_rate_utility: f64,
    /// Mechanism-reported settings (template hashes, backend, tokens).
    pub settings: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierScores {
    pub classifier: ClassifierKind,
    pub label: String,
    pub target: Target,
    pub accuracy: MeanStd,
    pub f1: MeanStd,
    pub raw_accuracy: MeanStd,
    pub raw_f1: MeanStd,
}

/// Best mean score over classifiers, per target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub accuracy: f64,
    pub accuracy_classifier: ClassifierKind,
    pub f1: f64,
    pub f1_classifier: ClassifierKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub private: TargetSummary,
    pub utility: TargetSummary,
}

/// Which predictions the fairness gaps are computed on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairnessVariant {
    /// Utility predictions grouped by the true private label (headline).
    UtilityByPrivate,
    /// Private predictions grouped by the true utility label.
    PrivateByUtility,
}

impl FairnessVariant {
    pub const BOTH: [FairnessVariant; 2] = [
        FairnessVariant::UtilityByPrivate,
        FairnessVariant::PrivateByUtility,
    ];

    pub fn id(self) -> &'static str {
        match self {
            FairnessVariant::UtilityByPrivate => "utility_by_private",
            FairnessVariant::PrivateByUtility => "private_by_utility",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairnessEntry {
    pub classifier: ClassifierKind,
    pub variant: FairnessVariant,
    pub headline: bool,
    pub group_attribute: String,
    pub equalized_odds: Option<MeanStd>,
    pub equal_opportunity: Option<MeanStd>,
    pub demographic_parity: Option<MeanStd>,
    /// Seeds where a group-conditional rate was undefined.
    pub undefined_seeds: Vec<u64>,
}

/// Signed `sanitized - original` differences of one continuous column,
/// pooled over seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnDistortion {
    pub column: String,
    pub n: usize,
    pub mean: f64,
    pub mean_abs: f64,
    pub max_abs: f64,
    pub histogram: Vec<HistogramBin>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionDigest {
    pub continuous: Vec<ColumnDistortion>,
    pub categorical: Vec<CategoricalFlips>,
    pub compared_rows: usize,
    pub excluded_rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismReport {
    pub mechanism: String,
    pub label: String,
    pub seeds: Vec<u64>,
    pub scores: Vec<ClassifierScores>,
    pub summary: Option<Summary>,
    /// Always computed against the `none` mechanism of the same report.
    pub tradeoff: Option<TradeoffScores>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tradeoff_error: Option<String>,
    pub fairness: Vec<FairnessEntry>,
    pub distortion: Option<DistortionDigest>,
    pub coverage: Option<MeanStd>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub seed: u64,
    pub mechanism: String,
    pub stage: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub schema_fingerprint: String,
    pub template_sha256: BTreeMap<String, String>,
    pub model_ids: Vec<String>,
    pub backend: serde_json::Value,
    pub conventions: BTreeMap<String, String>,
    pub tool_version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub format: String,
    pub version: u32,
    pub task: Task,
    pub private_feature: String,
    pub utility_feature: String,
    pub seeds: Vec<u64>,
    pub classifiers: Vec<ClassifierKind>,
    pub mechanisms: Vec<MechanismReport>,
    pub cells: Vec<CellResult>,
    pub seed_runs: Vec<SeedRun>,
    pub failures: Vec<Failure>,
    pub provenance: Provenance,
}

impl EvaluationReport {
    pub fn mechanism(&self, id: &str) -> Option<&MechanismReport> {
        self.mechanisms.iter().find(|m| m.mechanism == id)
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    /// Stable, pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let r: EvaluationReport =
            serde_json::from_str(text).map_err(|e| RunError::Report(e.to_string()))?;
        if r.format != REPORT_FORMAT || r.version != REPORT_VERSION {
            return Err(RunError::Report(format!(
                "expected {REPORT_FORMAT} v{REPORT_VERSION}, found {} v{}",
                r.format, r.version
            )));
        }
        Ok(r)
    }
}

impl MechanismReport {
    pub fn scores_for(
        &self,
        classifier: ClassifierKind,
        target: Target,
    ) -> Option<&ClassifierScores> {
        self.scores
            .iter()
            .find(|s| s.classifier == classifier && s.target == target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_uses_sample_deviation() {
        let m = MeanStd::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        assert!((m.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(MeanStd::of(&[0.7]).unwrap().std, 0.0);
        assert!(MeanStd::of(&[]).is_none());
    }
}
