use serde::{Deserialize, Serialize};

use crate::dataset::RecordTable;

/// Fate of one input record under a sanitization mechanism.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Sanitized,
    /// Original values kept because sanitization failed.
    Passthrough,
    Dropped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordProvenance {
    pub source_row: usize,
    pub status: RecordStatus,
    /// Parse outcome of the last model response, for prompt-based mechanisms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_status: Option<String>,
    pub attempts: u32,
}

/// Sanitized table plus per-record provenance.
///
/// `table.rows[j]` was produced from input row `source_rows[j]`; dropped
/// records have no row in `table`. `records` has one entry per input row.
#[derive(Clone, Debug, PartialEq)]
pub struct MechanismOutput {
    pub mechanism: String,
    pub variant: Option<String>,
    pub table: RecordTable,
    pub source_rows: Vec<usize>,
    pub records: Vec<RecordProvenance>,
    pub settings: serde_json::Value,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub sanitized: usize,
    pub passthrough: usize,
    pub dropped: usize,
}

impl MechanismOutput {
    /// Output of a mechanism that returns every row, in order, sanitized.
    pub fn complete(
        mechanism: &str,
        variant: Option<String>,
        table: RecordTable,
        settings: serde_json::Value,
    ) -> Self {
        let n = table.len();
        MechanismOutput {
            mechanism: mechanism.to_string(),
            variant,
            table,
            source_rows: (0..n).collect(),
            records: (0..n)
                .map(|i| RecordProvenance {
                    source_row: i,
                    status: RecordStatus::Sanitized,
                    parse_status: None,
                    attempts: 1,
                })
                .collect(),
            settings,
        }
    }

    /// The no-op mechanism: rows pass through unchanged.
    pub fn identity(table: &RecordTable) -> Self {
        let mut out = Self::complete("none", None, table.clone(), serde_json::Value::Null);
        for r in &mut out.records {
            r.attempts = 0;
        }
        out
    }

    pub fn counts(&self) -> StatusCounts {
        let mut c = StatusCounts::default();
        for r in &self.records {
            match r.status {
                RecordStatus::Sanitized => c.sanitized += 1,
                RecordStatus::Passthrough => c.passthrough += 1,
                RecordStatus::Dropped => c.dropped += 1,
            }
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::test_support::toy_table;

    #[test]
    fn identity_keeps_every_row() {
        let t = toy_table(7, 1);
        let out = MechanismOutput::identity(&t);
        assert_eq!(out.table, t);
        assert_eq!(out.source_rows, (0..7).collect::<Vec<_>>());
        assert_eq!(
            out.counts(),
            StatusCounts {
                sanitized: 7,
                passthrough: 0,
                dropped: 0
            }
        );
    }
}
