use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::report::{EvaluationReport, MeanStd};
use super::RunError;
use crate::classifiers::Target;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    /// `report.txt`
    Human,
    /// `report.json`
    Machine,
    /// CSV series under `plots/`
    Plots,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [
        ReportFormat::Human,
        ReportFormat::Machine,
        ReportFormat::Plots,
    ];
}

/// `hist_<mechanism>_<column>.csv` with characters unsafe in file names
/// replaced by `-`.
pub fn histogram_file_name(mechanism: &str, column: &str) -> String {
    let clean = |s: &str| -> String {
        s.chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                    c
                } else {
                    '-'
                }
            })
            .collect()
    };
    format!("hist_{}_{}.csv", clean(mechanism), clean(column))
}

fn write(path: &Path, text: &str) -> Result<(), RunError> {
    std::fs::write(path, text).map_err(|e| RunError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn pm(m: &MeanStd) -> String {
    format!("{:.4} ±{:.4}", m.mean, m.std)
}

fn opt_pm(m: &Option<MeanStd>) -> String {
    m.as_ref().map_or_else(|| "undefined".to_string(), pm)
}

/// Plain-text rendering of the report. Contains nothing run-dependent
/// beyond the report itself, so equal reports render to equal bytes.
pub fn render_human(r: &EvaluationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} (private: {}, utility: {}), seeds {:?}",
        r.task.id(),
        r.private_feature,
        r.utility_feature,
        r.seeds
    );
    let _ = writeln!(s, "config sha256 {}", r.provenance.config_hash);
    for m in &r.mechanisms {
        let _ = writeln!(s, "\n== {} [{}]", m.label, m.mechanism);
        if let Some(c) = &m.coverage {
            let _ = writeln!(s, "coverage {}", pm(c));
        }
        let _ = writeln!(
            s,
            "{:<24} {:<8} {:>18} {:>18} {:>18}",
            "classifier", "target", "accuracy", "f1", "raw accuracy"
        );
        for c in &m.scores {
            let _ = writeln!(
                s,
                "{:<24} {:<8} {:>18} {:>18} {:>18}",
                c.label,
                c.target.id(),
                pm(&c.accuracy),
                pm(&c.f1),
                pm(&c.raw_accuracy)
            );
        }
        if let Some(sum) = &m.summary {
            for (t, ts) in [
                (Target::Private, &sum.private),
                (Target::Utility, &sum.utility),
            ] {
                let _ = writeln!(
                    s,
                    "best {}: accuracy {:.4} ({}), f1 {:.4} ({})",
                    t.id(),
                    ts.accuracy,
                    ts.accuracy_classifier.id(),
                    ts.f1,
                    ts.f1_classifier.id()
                );
            }
        }
        match (&m.tradeoff, &m.tradeoff_error) {
            (Some(t), _) => {
                let _ = writeln!(
                    s,
                    "M_p {:.4} (raw {:.4})  M_u {:.4} (raw {:.4})",
                    t.m_p, t.m_p_raw, t.m_u, t.m_u_raw
                );
            }
            (None, Some(e)) => {
                let _ = writeln!(s, "tradeoff undefined: {e}");
            }
            (None, None) => {}
        }
        for f in m.fairness.iter().filter(|f| f.headline) {
            let _ = writeln!(
                s,
                "fairness {:<6} by {}: EO {}  EOpp {}  DP {}",
                f.classifier.id(),
                f.group_attribute,
                opt_pm(&f.equalized_odds),
                opt_pm(&f.equal_opportunity),
                opt_pm(&f.demographic_parity)
            );
        }
        if let Some(d) = &m.distortion {
            for c in &d.continuous {
                let _ = writeln!(
                    s,
                    "distortion {:<16} mean {:+.4} mean|d| {:.4} max|d| {:.4}",
                    c.column, c.mean, c.mean_abs, c.max_abs
                );
            }
            for c in d.categorical.iter().filter(|c| c.flips > 0) {
                let _ = writeln!(
                    s,
                    "flips {:<16} {}/{} ({:.4})",
                    c.column, c.flips, c.compared, c.rate
                );
            }
        }
    }
    if !r.failures.is_empty() {
        let _ = writeln!(s, "\nINCOMPLETE: {} failure(s)", r.failures.len());
        for f in &r.failures {
            let _ = writeln!(
                s,
                "seed {} {} at {}: {}",
                f.seed, f.mechanism, f.stage, f.message
            );
        }
    }
    s
}

fn fairness_csv(r: &EvaluationReport) -> String {
    let mut s = String::from("mechanism,classifier,variant,metric,mean,std,n\n");
    for m in &r.mechanisms {
        for f in &m.fairness {
            for (name, v) in [
                ("equalized_odds", &f.equalized_odds),
                ("equal_opportunity", &f.equal_opportunity),
                ("demographic_parity", &f.demographic_parity),
            ] {
                if let Some(v) = v {
                    let _ = writeln!(
                        s,
                        "{},{},{},{name},{},{},{}",
                        m.mechanism,
                        f.classifier.id(),
                        f.variant.id(),
                        v.mean,
                        v.std,
                        v.n
                    );
                }
            }
        }
    }
    s
}

fn flips_csv(r: &EvaluationReport) -> String {
    let mut s = String::from("mechanism,column,flips,compared,rate\n");
    for m in &r.mechanisms {
        for c in m.distortion.iter().flat_map(|d| &d.categorical) {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                m.mechanism, c.column, c.flips, c.compared, c.rate
            );
        }
    }
    s
}

/// Writes the requested artifacts into `out_dir` and returns their paths.
pub fn emit_report(
    report: &EvaluationReport,
    formats: &[ReportFormat],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, RunError> {
    let mkdir = |p: &Path| {
        std::fs::create_dir_all(p).map_err(|e| RunError::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        })
    };
    mkdir(out_dir)?;
    let mut written = Vec::new();
    let mut put = |path: PathBuf, text: String| -> Result<(), RunError> {
        write(&path, &text)?;
        written.push(path);
        Ok(())
    };
    for f in formats {
        match f {
            ReportFormat::Human => put(out_dir.join("report.txt"), render_human(report))?,
            ReportFormat::Machine => put(out_dir.join("report.json"), report.to_json())?,
            ReportFormat::Plots => {
                let plots = out_dir.join("plots");
                mkdir(&plots)?;
                put(plots.join("fairness.csv"), fairness_csv(report))?;
                put(plots.join("flips.csv"), flips_csv(report))?;
                for m in &report.mechanisms {
                    for c in m.distortion.iter().flat_map(|d| &d.continuous) {
                        let mut s = String::from("bin_left,bin_right,count\n");
                        for b in &c.histogram {
                            let _ = writeln!(s, "{},{},{}", b.left, b.right, b.count);
                        }
                        put(plots.join(histogram_file_name(&m.mechanism, &c.column)), s)?;
                    }
                }
            }
        }
    }
    Ok(written)
}
