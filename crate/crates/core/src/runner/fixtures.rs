//! Published accuracy summaries and the leakage/utility ratios derived
//! from them, used to check the ratio arithmetic end to end.

use serde::{Deserialize, Serialize};

use super::Task;
use crate::metrics::TradeoffScores;

/// Published ratios carry two decimals.
pub const FIXTURE_TOLERANCE: f64 = 0.01;

/// Baseline accuracy on raw data and best-constant accuracy, per attribute.
const GENDER_RAW: f64 = 0.84;
const GENDER_GUESS: f64 = 0.69;
const INCOME_RAW: f64 = 0.88;
const INCOME_GUESS: f64 = 0.74;

struct Row {
    mechanism: &'static str,
    /// Sanitized (private, utility) accuracy per task.
    task1: (f64, f64),
    task2: (f64, f64),
    /// Published (M_p, M_u) per task.
    expected1: (f64, f64),
    expected2: (f64, f64),
}

const ROWS: [Row; 4] = [
    Row {
        mechanism: "alfr",
        task1: (0.65, 0.81),
        task2: (0.75, 0.81),
        expected1: (0.00, 0.50),
        expected2: (0.07, 0.80),
    },
    Row {
        mechanism: "uae_pupet",
        task1: (0.67, 0.80),
        task2: (0.74, 0.82),
        expected1: (0.00, 0.42),
        expected2: (0.00, 0.87),
    },
    Row {
        mechanism: "llm:p1",
        task1: (0.65, 0.89),
        task2: (0.67, 0.81),
        expected1: (0.00, 1.00),
        expected2: (0.00, 0.80),
    },
    Row {
        mechanism: "llm:p2",
        task1: (0.75, 0.88),
        task2: (0.74, 0.79),
        expected1: (0.40, 1.00),
        expected2: (0.00, 0.67),
    },
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureCheck {
    pub mechanism: String,
    pub task: Task,
    /// `m_p` or `m_u`
    pub quantity: String,
    pub expected: f64,
    pub computed: f64,
    pub passed: bool,
}

/// Recomputes every published ratio from the published accuracies.
pub fn verify_published_fixtures() -> Vec<FixtureCheck> {
    let mut out = Vec::new();
    for row in &ROWS {
        for (task, acc, expected) in [
            (Task::Task1, row.task1, row.expected1),
            (Task::Task2, row.task2, row.expected2),
        ] {
            let ((p_raw, p_guess), (u_raw, u_guess)) = match task {
                Task::Task1 => ((GENDER_RAW, GENDER_GUESS), (INCOME_RAW, INCOME_GUESS)),
                Task::Task2 => ((INCOME_RAW, INCOME_GUESS), (GENDER_RAW, GENDER_GUESS)),
            };
            let t = TradeoffScores::compute([p_raw, acc.0, p_guess], [u_raw, acc.1, u_guess])
                .expect("published baselines differ from guessing");
            for (quantity, computed, want) in
                [("m_p", t.m_p, expected.0), ("m_u", t.m_u, expected.1)]
            {
                out.push(FixtureCheck {
                    mechanism: row.mechanism.into(),
                    task,
                    quantity: quantity.into(),
                    expected: want,
                    computed,
                    passed: (computed - want).abs() <= FIXTURE_TOLERANCE + 1e-12,
                });
            }
        }
    }
    out
}
