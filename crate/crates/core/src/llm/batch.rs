use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{
    send_reserved, ChatBackend, ChatRequest, ChatSettings, Completion, LlmError, TokenBudget, Usage,
};
use crate::dataset::FeatureSchema;
use crate::prompting::{parse_response, ParsedResponse, PromptBundle};

#[derive(Clone, Debug, PartialEq)]
pub struct BatchItem {
    pub index: usize,
    pub request: ChatRequest,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchResult {
    pub index: usize,
    pub outcome: Result<Completion, LlmError>,
    pub latency: Duration,
}

/// Sends every item with at most `parallelism` requests in flight.
///
/// Budget is reserved in input order, so when it runs out the tail of the
/// batch is rejected, never a scattered subset. Results are in input order.
pub fn run_batch(
    items: &[BatchItem],
    backend: &dyn ChatBackend,
    budget: &TokenBudget,
    parallelism: usize,
) -> Vec<BatchResult> {
    let workers = parallelism.max(1).min(items.len().max(1));
    let next = Mutex::new(0usize);
    let slots: Vec<Mutex<Option<BatchResult>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                // claim and reserve under one lock to keep reservations ordered
                let (pos, reservation) = {
                    let mut n = next.lock().unwrap_or_else(|e| e.into_inner());
                    if *n >= items.len() {
                        return;
                    }
                    let pos = *n;
                    *n += 1;
                    (pos, budget.reserve(items[pos].request.estimated_tokens()))
                };
                let item = &items[pos];
                let start = Instant::now();
                let outcome = reservation
                    .and_then(|r| send_reserved(item.index, &item.request, backend, budget, r));
                let latency = start.elapsed();
                match &outcome {
                    Ok(c) => log::debug!(
                        "record {}: {} tokens, {} attempt(s), {latency:?}",
                        item.index,
                        c.usage.total_tokens,
                        c.attempts
                    ),
                    Err(e) => log::debug!("record {}: {e}", item.index),
                }
                *slots[pos].lock().unwrap_or_else(|e| e.into_inner()) = Some(BatchResult {
                    index: item.index,
                    outcome,
                    latency,
                });
            });
        }
    });
    slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .unwrap_or_else(|e| e.into_inner())
                .expect("every slot filled")
        })
        .collect()
}

/// Parsed reply of one prompt. Transport or budget errors appear as a
/// Malformed parse with the error in `error`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptOutcome {
    pub record_index: usize,
    pub parsed: ParsedResponse,
    pub error: Option<String>,
    pub usage: Option<Usage>,
    pub attempts: u32,
    pub request_fingerprint: String,
}

pub fn run_prompt_batch(
    bundles: &[PromptBundle],
    schema: &FeatureSchema,
    settings: &ChatSettings,
    refusal_phrases: &[String],
    backend: &dyn ChatBackend,
    budget: &TokenBudget,
    parallelism: usize,
) -> Vec<PromptOutcome> {
    let items: Vec<BatchItem> = bundles
        .iter()
        .map(|b| BatchItem {
            index: b.record_index,
            request: ChatRequest::user(b.text.clone(), settings),
        })
        .collect();
    let results = run_batch(&items, backend, budget, parallelism);
    results
        .into_iter()
        .zip(bundles.iter().zip(&items))
        .map(|(r, (b, item))| {
            let fp = item.request.fingerprint();
            match r.outcome {
                Ok(c) => PromptOutcome {
                    record_index: r.index,
                    parsed: parse_response(&c.text, schema, &b.expected_columns, refusal_phrases),
                    error: None,
                    usage: Some(c.usage),
                    attempts: c.attempts,
                    request_fingerprint: fp,
                },
                Err(e) => PromptOutcome {
                    record_index: r.index,
                    parsed: ParsedResponse::malformed("", e.to_string()),
                    error: Some(e.to_string()),
                    usage: None,
                    attempts: 0,
                    request_fingerprint: fp,
                },
            }
        })
        .collect()
}
