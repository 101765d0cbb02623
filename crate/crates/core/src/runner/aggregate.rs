use std::collections::BTreeMap;

use super::report::{
    CellResult, ClassifierScores, ColumnDistortion, DistortionDigest, EvaluationReport,
    FairnessEntry, MeanStd, MechanismReport, Provenance, Summary, TargetSummary, REPORT_FORMAT,
    REPORT_VERSION,
};
use super::{Experiment, Failure, SeedMechanismResult};
use crate::classifiers::{ClassifierKind, Target};
use crate::metrics::{histogram, CategoricalFlips, TradeoffScores, DEFAULT_BINS};

/// Best mean accuracy and best mean F1 over `scores` for `target`. Ties
/// keep the earlier classifier.
fn summarize(scores: &[ClassifierScores], target: Target) -> Option<TargetSummary> {
    let mut it = scores.iter().filter(|s| s.target == target);
    let first = it.next()?;
    let mut out = TargetSummary {
        accuracy: first.accuracy.mean,
        accuracy_classifier: first.classifier,
        f1: first.f1.mean,
        f1_classifier: first.classifier,
    };
    for s in it {
        if s.accuracy.mean > out.accuracy {
            out.accuracy = s.accuracy.mean;
            out.accuracy_classifier = s.classifier;
        }
        if s.f1.mean > out.f1 {
            out.f1 = s.f1.mean;
            out.f1_classifier = s.classifier;
        }
    }
    Some(out)
}

fn classifier_scores(cells: &[&CellResult], order: &[ClassifierKind]) -> Vec<ClassifierScores> {
    let mut out = Vec::new();
    for &kind in order {
        for target in Target::BOTH {
            let sel: Vec<&&CellResult> = cells
                .iter()
                .filter(|c| c.classifier == kind && c.target == target)
                .collect();
            let col = |f: fn(&CellResult) -> f64| {
                MeanStd::of(&sel.iter().map(|c| f(c)).collect::<Vec<_>>())
            };
            if let (Some(accuracy), Some(f1), Some(raw_accuracy), Some(raw_f1)) = (
                col(|c| c.accuracy),
                col(|c| c.f1),
                col(|c| c.raw_accuracy),
                col(|c| c.raw_f1),
            ) {
                out.push(ClassifierScores {
                    classifier: kind,
                    label: kind.label().to_string(),
                    target,
                    accuracy,
                    f1,
                    raw_accuracy,
                    raw_f1,
                });
            }
        }
    }
    out
}

fn fairness_entries(
    results: &[&SeedMechanismResult],
    schema_names: [&str; 2],
) -> Vec<FairnessEntry> {
    // keyed by first appearance so the order follows the config
    let mut keys = Vec::new();
    for r in results {
        for (k, v, _) in &r.fairness {
            if !keys.contains(&(*k, *v)) {
                keys.push((*k, *v));
            }
        }
    }
    keys.into_iter()
        .map(|(kind, variant)| {
            let mut eo = Vec::new();
            let mut op = Vec::new();
            let mut dp = Vec::new();
            let mut undefined = Vec::new();
            for r in results {
                for (k, v, f) in &r.fairness {
                    if (*k, *v) != (kind, variant) {
                        continue;
                    }
                    match f {
                        Ok(s) => {
                            eo.push(s.equalized_odds);
                            op.push(s.equal_opportunity);
                            dp.push(s.demographic_parity);
                        }
                        Err(_) => undefined.push(r.run.seed),
                    }
                }
            }
            let headline = variant == super::FairnessVariant::UtilityByPrivate;
            FairnessEntry {
                classifier: kind,
                variant,
                headline,
                group_attribute: if headline {
                    schema_names[0]
                } else {
                    schema_names[1]
                }
                .to_string(),
                equalized_odds: MeanStd::of(&eo),
                equal_opportunity: MeanStd::of(&op),
                demographic_parity: MeanStd::of(&dp),
                undefined_seeds: undefined,
            }
        })
        .collect()
}

/// Pools per-seed distortion over seeds: differences are concatenated
/// before summarizing; flips and compared rows are summed.
fn pool_distortion(results: &[&SeedMechanismResult]) -> Option<DistortionDigest> {
    let first = &results.first()?.distortion;
    let continuous = first
        .continuous
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let diffs: Vec<f64> = results
                .iter()
                .flat_map(|r| r.distortion.continuous[i].differences.iter().copied())
                .collect();
            let n = diffs.len();
            let (sum, sum_abs, max_abs) = diffs.iter().fold((0.0, 0.0, 0.0f64), |(s, a, m), &d| {
                (s + d, a + d.abs(), m.max(d.abs()))
            });
            let denom = n.max(1) as f64;
            ColumnDistortion {
                column: c.column.clone(),
                n,
                mean: sum / denom,
                mean_abs: sum_abs / denom,
                max_abs,
                histogram: histogram(&diffs, DEFAULT_BINS),
            }
        })
        .collect();
    let categorical = first
        .categorical
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let flips: usize = results
                .iter()
                .map(|r| r.distortion.categorical[i].flips)
                .sum();
            let compared: usize = results
                .iter()
                .map(|r| r.distortion.categorical[i].compared)
                .sum();
            CategoricalFlips {
                column: c.column.clone(),
                flips,
                compared,
                rate: if compared == 0 {
                    0.0
                } else {
                    flips as f64 / compared as f64
                },
            }
        })
        .collect();
    Some(DistortionDigest {
        continuous,
        categorical,
        compared_rows: results.iter().map(|r| r.distortion.compared_rows).sum(),
        excluded_rows: results.iter().map(|r| r.distortion.excluded_rows).sum(),
    })
}

fn conventions() -> BTreeMap<String, String> {
    [
        ("f1", "macro average of per-class F1"),
        ("std", "sample standard deviation across seeds (n - 1)"),
        ("summary", "maximum over classifiers of the mean score, per target and metric"),
        (
            "random_guess",
            "majority-class rate of each seed's test split, averaged over seeds",
        ),
        (
            "tradeoff",
            "(c_a - c_r) / (c_n - c_r) on summary accuracies, clamped to [0, 1]; c_n from the none mechanism",
        ),
        (
            "fairness_headline",
            "utility predictions, groups from the true private label, class 1 positive",
        ),
        (
            "fairness_secondary",
            "private predictions, groups from the true utility label, class 1 positive",
        ),
        (
            "threat_model",
            "attackers trained on raw auxiliary rows unless adaptive_attacker is set",
        ),
        ("coverage", "evaluated rows / test rows; dropped rows are excluded from scores"),
        ("distortion", "sanitized minus original in raw units, pooled over seeds"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

pub(crate) fn provenance(exp: &Experiment) -> Provenance {
    let cfg = &exp.config;
    let mut model_ids = Vec::new();
    if exp.backend.is_some() {
        model_ids.push(cfg.backend.chat.model_id.clone());
    }
    Provenance {
        config_hash: cfg.hash(),
        config: cfg.clone(),
        schema_fingerprint: exp.table.schema.fingerprint(),
        template_sha256: exp.templates.hashes(),
        model_ids,
        backend: exp
            .backend
            .as_ref()
            .map_or(serde_json::Value::Null, |b| b.describe()),
        conventions: conventions(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

/// Builds the report from per-(seed, mechanism) results. The `none`
/// mechanism's summary supplies `c_n` for every other mechanism.
pub(crate) fn aggregate(
    exp: &Experiment,
    results: Vec<SeedMechanismResult>,
    failures: Vec<Failure>,
) -> EvaluationReport {
    let cfg = &exp.config;
    let schema = &exp.table.schema;
    let names = [
        schema.private_column().name.as_str(),
        schema.utility_column().name.as_str(),
    ];
    let mut mechanisms: Vec<MechanismReport> = Vec::new();
    for m in cfg.mechanism_order() {
        let id = m.id();
        let rs: Vec<&SeedMechanismResult> =
            results.iter().filter(|r| r.run.mechanism == id).collect();
        let cells: Vec<&CellResult> = rs.iter().flat_map(|r| r.cells.iter()).collect();
        let scores = classifier_scores(&cells, &cfg.classifiers);
        let summary = match (
            summarize(&scores, Target::Private),
            summarize(&scores, Target::Utility),
        ) {
            (Some(private), Some(utility)) => Some(Summary { private, utility }),
            _ => None,
        };
        let coverage = MeanStd::of(&rs.iter().map(|r| r.run.coverage).collect::<Vec<_>>());
        mechanisms.push(MechanismReport {
            mechanism: id,
            label: m.label(),
            seeds: rs.iter().map(|r| r.run.seed).collect(),
            scores,
            summary,
            tradeoff: None,
            tradeoff_error: None,
            fairness: fairness_entries(&rs, names),
            distortion: pool_distortion(&rs),
            coverage,
        });
    }

    // c_r: majority rate averaged over every seed that produced a split
    let mut majority: BTreeMap<u64, [f64; 2]> = BTreeMap::new();
    for r in &results {
        majority.insert(
            r.run.seed,
            [r.run.majority_rate_private, r.run.majority_rate_utility],
        );
    }
    let c_r = |k: usize| {
        MeanStd::of(&majority.values().map(|m| m[k]).collect::<Vec<_>>()).map(|s| s.mean)
    };
    let baseline = mechanisms.first().and_then(|m| m.summary.clone());
    for m in &mut mechanisms {
        match (&baseline, &m.summary, c_r(0), c_r(1)) {
            (Some(b), Some(s), Some(rp), Some(ru)) => {
                match TradeoffScores::compute(
                    [b.private.accuracy, s.private.accuracy, rp],
                    [b.utility.accuracy, s.utility.accuracy, ru],
                ) {
                    Ok(t) => m.tradeoff = Some(t),
                    Err(e) => m.tradeoff_error = Some(e.to_string()),
                }
            }
            _ => m.tradeoff_error = Some("baseline or mechanism has no scores".into()),
        }
    }

    let mut cells = Vec::new();
    let mut seed_runs = Vec::new();
    for r in results {
        cells.extend(r.cells);
        seed_runs.push(r.run);
    }
    EvaluationReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        task: cfg.task,
        private_feature: names[0].to_string(),
        utility_feature: names[1].to_string(),
        seeds: cfg.seeds.clone(),
        classifiers: cfg.classifiers.clone(),
        mechanisms,
        cells,
        seed_runs,
        failures,
        provenance: provenance(exp),
    }
}
