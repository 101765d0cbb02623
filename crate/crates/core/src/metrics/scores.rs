use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Accuracy and macro-averaged F1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScorePair {
    pub accuracy: f64,
    pub f1: f64,
}

fn check(pred: &[usize], labels: &[usize]) -> Result<(), MetricsError> {
    if pred.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(pred.len(), labels.len()));
    }
    if pred.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

pub fn accuracy(pred: &[usize], labels: &[usize]) -> Result<f64, MetricsError> {
    check(pred, labels)?;
    let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// One-vs-rest F1 of `class`; `None` when the class never occurs in either
/// predictions or labels.
pub fn class_f1(pred: &[usize], labels: &[usize], class: usize) -> Option<f64> {
    let (mut tp, mut fp, mut fun) = (0usize, 0usize, 0usize);
    for (&p, &l) in pred.iter().zip(labels) {
        match (p == class, l == class) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fun += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fun;
    (denom > 0).then(|| 2.0 * tp as f64 / denom as f64)
}

/// Unweighted mean of per-class F1 over classes that occur in predictions
/// or labels.
pub fn macro_f1(pred: &[usize], labels: &[usize]) -> Result<f64, MetricsError> {
    check(pred, labels)?;
    let k = pred.iter().chain(labels).max().copied().unwrap_or(0) + 1;
    let per: Vec<f64> = (0..k).filter_map(|c| class_f1(pred, labels, c)).collect();
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

pub fn score(pred: &[usize], labels: &[usize]) -> Result<ScorePair, MetricsError> {
    Ok(ScorePair {
        accuracy: accuracy(pred, labels)?,
        f1: macro_f1(pred, labels)?,
    })
}
