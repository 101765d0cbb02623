use serde::{Deserialize, Serialize};

use super::{ClassifierError, Target};
use crate::dataset::RecordTable;
use crate::llm::{
    run_batch, BatchItem, ChatBackend, ChatRequest, ChatSettings, LlmError, TokenBudget,
};
use crate::prompting::{build_classification_prompt, parse_class_answer, PromptTemplates};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotOptions {
    pub settings: ChatSettings,
    pub templates: PromptTemplates,
    pub parallelism: usize,
    /// Class assigned when an answer names no single class or the request
    /// fails; the caller passes the auxiliary-data majority class.
    pub fallback_class: usize,
}

impl ZeroShotOptions {
    pub fn new(fallback_class: usize) -> Self {
        ZeroShotOptions {
            settings: ChatSettings::default(),
            templates: PromptTemplates::default(),
            parallelism: 4,
            fallback_class,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotPredictions {
    pub predictions: Vec<usize>,
    /// True where `predictions` holds the fallback class.
    pub fallback: Vec<bool>,
    pub fallback_count: usize,
    pub tokens_charged: u64,
}

/// Asks the backend to name `target`'s class for each row.
///
/// Authentication and configuration errors abort the whole call; per-row
/// failures (budget, transport, unscripted mock) become flagged fallbacks.
pub fn llm_zero_shot_predict(
    table: &RecordTable,
    target: Target,
    backend: &dyn ChatBackend,
    budget: &TokenBudget,
    options: &ZeroShotOptions,
) -> Result<ZeroShotPredictions, ClassifierError> {
    let column = target.column(&table.schema);
    let categories = column
        .categories()
        .ok_or_else(|| ClassifierError::NonBinaryTarget(column.name.clone()))?;
    let items = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let text = build_classification_prompt(row, &table.schema, column, &options.templates)?;
            Ok(BatchItem {
                index: i,
                request: ChatRequest::user(text, &options.settings),
            })
        })
        .collect::<Result<Vec<_>, ClassifierError>>()?;
    let results = run_batch(&items, backend, budget, options.parallelism);
    let mut out = ZeroShotPredictions {
        predictions: Vec::with_capacity(items.len()),
        fallback: Vec::with_capacity(items.len()),
        fallback_count: 0,
        tokens_charged: 0,
    };
    for r in results {
        let class = match r.outcome {
            Ok(c) => {
                out.tokens_charged += c.usage.total_tokens;
                parse_class_answer(&c.text, categories)
            }
            Err(e @ (LlmError::AuthFailure(_) | LlmError::Config(_))) => return Err(e.into()),
            Err(e) => {
                log::debug!("zero-shot row {}: {e}", r.index);
                None
            }
        };
        out.fallback.push(class.is_none());
        out.predictions
            .push(class.unwrap_or(options.fallback_class));
    }
    out.fallback_count = out.fallback.iter().filter(|&&f| f).count();
    Ok(out)
}
