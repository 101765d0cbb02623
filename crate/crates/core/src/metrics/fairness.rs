use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Absolute gaps between two groups; 0 is perfectly fair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairnessScores {
    pub equalized_odds: f64,
    pub equal_opportunity: f64,
    pub demographic_parity: f64,
    pub group_attribute: String,
}

#[derive(Default, Clone, Copy)]
struct GroupCounts {
    tp: usize,
    fp: usize,
    pos: usize,
    neg: usize,
}

impl GroupCounts {
    fn n(&self) -> usize {
        self.pos + self.neg
    }
}

/// Group gaps of a binary classifier. Class 1 is the positive class; `groups`
/// holds 0/1 membership of each row.
pub fn fairness(
    pred: &[usize],
    labels: &[usize],
    groups: &[usize],
    group_attribute: &str,
) -> Result<FairnessScores, MetricsError> {
    if pred.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(pred.len(), labels.len()));
    }
    if pred.len() != groups.len() {
        return Err(MetricsError::LengthMismatch(pred.len(), groups.len()));
    }
    let mut g = [GroupCounts::default(); 2];
    for ((&p, &l), &grp) in pred.iter().zip(labels).zip(groups) {
        if grp > 1 {
            return Err(MetricsError::UndefinedRate(format!(
                "group index {grp} is not binary"
            )));
        }
        let c = &mut g[grp];
        if l == 1 {
            c.pos += 1;
            c.tp += usize::from(p == 1);
        } else {
            c.neg += 1;
            c.fp += usize::from(p == 1);
        }
    }
    let rate = |num: usize, den: usize, what: &str, grp: usize| {
        if den == 0 {
            Err(MetricsError::UndefinedRate(format!(
                "{what} of group {grp} has no denominator"
            )))
        } else {
            Ok(num as f64 / den as f64)
        }
    };
    let tpr = [
        rate(g[0].tp, g[0].pos, "TPR", 0)?,
        rate(g[1].tp, g[1].pos, "TPR", 1)?,
    ];
    let fpr = [
        rate(g[0].fp, g[0].neg, "FPR", 0)?,
        rate(g[1].fp, g[1].neg, "FPR", 1)?,
    ];
    let ppr = [
        rate(g[0].tp + g[0].fp, g[0].n(), "positive rate", 0)?,
        rate(g[1].tp + g[1].fp, g[1].n(), "positive rate", 1)?,
    ];
    let opp = (tpr[0] - tpr[1]).abs();
    Ok(FairnessScores {
        equalized_odds: opp.max((fpr[0] - fpr[1]).abs()),
        equal_opportunity: opp,
        demographic_parity: (ppr[0] - ppr[1]).abs(),
        group_attribute: group_attribute.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Rows for one group with the given confusion counts.
    fn rows(tp: usize, fun: usize, fp: usize, tn: usize, grp: usize) -> Vec<(usize, usize, usize)> {
        let mut v = Vec::new();
        v.extend(std::iter::repeat((1, 1, grp)).take(tp));
        v.extend(std::iter::repeat((0, 1, grp)).take(fun));
        v.extend(std::iter::repeat((1, 0, grp)).take(fp));
        v.extend(std::iter::repeat((0, 0, grp)).take(tn));
        v
    }

    fn run(v: &[(usize, usize, usize)]) -> Result<FairnessScores, MetricsError> {
        let p: Vec<_> = v.iter().map(|r| r.0).collect();
        let l: Vec<_> = v.iter().map(|r| r.1).collect();
        let g: Vec<_> = v.iter().map(|r| r.2).collect();
        fairness(&p, &l, &g, "g")
    }

    #[test]
    fn identical_groups_are_fair() {
        let mut v = rows(3, 1, 2, 4, 0);
        v.extend(rows(3, 1, 2, 4, 1));
        let f = run(&v).unwrap();
        assert_eq!(
            (f.equalized_odds, f.equal_opportunity, f.demographic_parity),
            (0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn opportunity_and_odds_gaps() {
        // g0: TPR 0.9, FPR 0.2; g1: TPR 0.6, FPR 0.25
        let mut v = rows(9, 1, 2, 8, 0);
        v.extend(rows(6, 4, 1, 3, 1));
        let f = run(&v).unwrap();
        assert_abs_diff_eq!(f.equal_opportunity, 0.30, epsilon = 1e-12);
        assert_abs_diff_eq!(f.equalized_odds, 0.30, epsilon = 1e-12);
    }

    #[test]
    fn demographic_parity_gap() {
        // g0 predicts positive at 0.5, g1 at 0.2
        let mut v = rows(3, 2, 2, 3, 0);
        v.extend(rows(1, 4, 1, 4, 1));
        assert_abs_diff_eq!(run(&v).unwrap().demographic_parity, 0.30, epsilon = 1e-12);
    }

    #[test]
    fn missing_positives_is_undefined() {
        let mut v = rows(0, 0, 1, 1, 0);
        v.extend(rows(1, 1, 1, 1, 1));
        assert!(matches!(run(&v), Err(MetricsError::UndefinedRate(_))));
    }

    #[test]
    fn swapping_groups_is_invariant() {
        let mut v = rows(5, 2, 1, 7, 0);
        v.extend(rows(2, 3, 4, 1, 1));
        let swapped: Vec<_> = v.iter().map(|&(p, l, g)| (p, l, 1 - g)).collect();
        let (a, b) = (run(&v).unwrap(), run(&swapped).unwrap());
        assert_eq!(a, b);
    }
}
