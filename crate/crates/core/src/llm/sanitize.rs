use serde::{Deserialize, Serialize};

use super::{run_prompt_batch, ChatBackend, ChatSettings, TokenBudget};
use crate::dataset::{Labels, Record, RecordTable};
use crate::mechanism::{MechanismOutput, RecordProvenance, RecordStatus};
use crate::prompting::{
    apply_fallback, build_prompt, FallbackDecision, FallbackPolicy, PromptBundle, PromptError,
    PromptTemplates, VariantTag,
};

/// Prompt-based sanitizer: one chat request per record, re-asked per the
/// fallback policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmSanitizer {
    pub variant: VariantTag,
    pub templates: PromptTemplates,
    pub settings: ChatSettings,
    pub policy: FallbackPolicy,
    pub parallelism: usize,
}

impl LlmSanitizer {
    pub fn new(variant: VariantTag) -> Self {
        LlmSanitizer {
            variant,
            templates: PromptTemplates::default(),
            settings: ChatSettings::default(),
            policy: FallbackPolicy::default(),
            parallelism: 4,
        }
    }

    pub fn mechanism_id(&self) -> String {
        format!("llm:{}", self.variant.id())
    }

    pub fn prompts(&self, table: &RecordTable) -> Result<Vec<PromptBundle>, PromptError> {
        table
            .rows
            .iter()
            .zip(&table.labels)
            .enumerate()
            .map(|(i, (row, l))| {
                let labels = self.variant.is_supervised().then_some(*l);
                build_prompt(i, row, labels, &table.schema, self.variant, &self.templates)
            })
            .collect()
    }

    pub fn sanitize_table(
        &self,
        table: &RecordTable,
        backend: &dyn ChatBackend,
        budget: &TokenBudget,
    ) -> Result<MechanismOutput, PromptError> {
        let bundles = self.prompts(table)?;
        let n = table.len();
        let mut decided: Vec<Option<FallbackDecision>> = vec![None; n];
        let mut provenance: Vec<RecordProvenance> = (0..n)
            .map(|i| RecordProvenance {
                source_row: i,
                status: RecordStatus::Dropped,
                parse_status: None,
                attempts: 0,
            })
            .collect();
        let mut tokens = 0u64;
        let mut pending: Vec<usize> = (0..n).collect();
        while !pending.is_empty() {
            let round: Vec<PromptBundle> = pending.iter().map(|&i| bundles[i].clone()).collect();
            let outcomes = run_prompt_batch(
                &round,
                &table.schema,
                &self.settings,
                &self.templates.refusal_phrases,
                backend,
                budget,
                self.parallelism,
            );
            let mut retry = Vec::new();
            for (&i, out) in pending.iter().zip(outcomes) {
                let p = &mut provenance[i];
                p.attempts += 1;
                p.parse_status = Some(out.parsed.status.id().to_string());
                tokens += out.usage.map_or(0, |u| u.total_tokens);
                match apply_fallback(&out.parsed, &table.rows[i], self.policy, p.attempts) {
                    FallbackDecision::Retry => retry.push(i),
                    d => decided[i] = Some(d),
                }
            }
            pending = retry;
        }

        let mut rows: Vec<Record> = Vec::new();
        let mut labels: Vec<Labels> = Vec::new();
        let mut source_rows = Vec::new();
        for (i, d) in decided.into_iter().enumerate() {
            if let Some(FallbackDecision::Keep(record, status)) = d {
                provenance[i].status = status;
                rows.push(record);
                labels.push(table.labels[i]);
                source_rows.push(i);
            }
        }
        let out_table = RecordTable::new(table.schema.clone(), rows, labels)
            .expect("parsed and original records are schema-valid");
        let settings = serde_json::json!({
            "variant": self.variant.id(),
            "supervised": self.variant.is_supervised(),
            "model_id": self.settings.model_id,
            "temperature": self.settings.temperature,
            "max_output_tokens": self.settings.max_output_tokens,
            "system_message": self.settings.system_prompt.is_some(),
            "fallback_policy": self.policy,
            "template_sha256": self.templates.hashes(),
            "backend": backend.describe(),
            "tokens_charged": tokens,
        });
        Ok(MechanismOutput {
            mechanism: self.mechanism_id(),
            variant: Some(self.variant.id().to_string()),
            table: out_table,
            source_rows,
            records: provenance,
            settings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::test_support::toy_table;
    use crate::llm::{MockBackend, MockEntry, MockTransform, RemapRule, DAY};
    use crate::mechanism::StatusCounts;

    fn budget() -> TokenBudget {
        TokenBudget::new(10_000_000, DAY)
    }

    #[test]
    fn echo_mock_leaves_table_unchanged() {
        let t = toy_table(20, 1);
        let out = LlmSanitizer::new(VariantTag::P1)
            .sanitize_table(&t, &MockBackend::echo(), &budget())
            .unwrap();
        assert_eq!(out.table, t);
        assert_eq!(out.mechanism, "llm:p1");
        assert_eq!(out.counts().sanitized, 20);
        assert!(out
            .records
            .iter()
            .all(|r| r.attempts == 1 && r.parse_status.as_deref() == Some("ok")));
    }

    #[test]
    fn remap_mock_changes_only_the_mapped_column() {
        let t = toy_table(30, 2);
        let mock = MockBackend::new(
            vec![],
            Some(MockTransform {
                remap: vec![RemapRule {
                    column: "color".into(),
                    mapping: [("red".to_string(), "blue".to_string())].into(),
                }],
            }),
        );
        let out = LlmSanitizer::new(VariantTag::Combined)
            .sanitize_table(&t, &mock, &budget())
            .unwrap();
        let red = t
            .schema
            .column("color")
            .unwrap()
            .category_index("red")
            .unwrap();
        for (a, b) in out.table.rows.iter().zip(&t.rows) {
            assert_eq!(a.values[0], b.values[0]);
            assert_eq!(a.values[2], b.values[2]);
            if b.values[1].as_category() == Some(red) {
                assert_ne!(a.values[1], b.values[1]);
            } else {
                assert_eq!(a.values[1], b.values[1]);
            }
        }
    }

    #[test]
    fn failures_follow_the_policy() {
        let t = toy_table(4, 3);
        // record 1 always malformed, record 2 refuses, others echo
        let mock = MockBackend::new(
            vec![
                MockEntry::indexed(1, "garbage"),
                MockEntry::indexed(2, "I cannot help with that."),
            ],
            Some(MockTransform::echo()),
        );
        let mut s = LlmSanitizer::new(VariantTag::P2);
        let out = s.sanitize_table(&t, &mock, &budget()).unwrap();
        assert_eq!(out.source_rows, vec![0, 3]);
        assert_eq!(out.records[1].attempts, 3);
        assert_eq!(out.records[1].status, RecordStatus::Dropped);
        assert_eq!(out.records[2].parse_status.as_deref(), Some("refusal"));
        assert_eq!(mock.calls(), 2 + 3 + 3);

        s.policy = FallbackPolicy::Passthrough;
        let out = s.sanitize_table(&t, &mock, &budget()).unwrap();
        assert_eq!(out.table, t);
        assert_eq!(
            out.counts(),
            StatusCounts {
                sanitized: 2,
                passthrough: 2,
                dropped: 0
            }
        );
    }

    #[test]
    fn unsupervised_requests_carry_no_labels() {
        let t = toy_table(6, 4);
        let s = LlmSanitizer::new(VariantTag::Unsupervised);
        for b in s.prompts(&t).unwrap() {
            for label in ["a", "b", "n", "p"] {
                assert_eq!(
                    crate::prompting::count_token(&b.text, label),
                    0,
                    "{label} in {}",
                    b.text
                );
            }
        }
    }

    #[test]
    fn mock_run_is_reproducible() {
        let t = toy_table(15, 5);
        let s = LlmSanitizer::new(VariantTag::P1);
        let a = s
            .sanitize_table(&t, &MockBackend::echo(), &budget())
            .unwrap();
        let b = s
            .sanitize_table(&t, &MockBackend::echo(), &budget())
            .unwrap();
        assert_eq!(a, b);
    }
}
