use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::{estimate_tokens, ChatBackend, ChatRequest, Completion, LlmError, Usage};

/// One scripted reply, keyed by request fingerprint or record index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
    pub response: String,
}

impl MockEntry {
    pub fn indexed(index: usize, response: impl Into<String>) -> Self {
        MockEntry {
            index: Some(index),
            fingerprint: None,
            response: response.into(),
        }
    }
}

/// Replaces values of one output column.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemapRule {
    pub column: String,
    pub mapping: BTreeMap<String, String>,
}

/// Reply synthesized from the prompt when no scripted entry matches: the
/// record's values are echoed in the requested `name: value` format, with
/// `remap` rules applied.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockTransform {
    #[serde(default)]
    pub remap: Vec<RemapRule>,
}

impl MockTransform {
    pub fn echo() -> Self {
        MockTransform::default()
    }

    /// Applies the transform to a sanitization prompt built with the
    /// default layout (record paragraph first, `name: <value>` lines).
    pub fn respond(&self, prompt: &str) -> Result<String, String> {
        let names: Vec<&str> = prompt
            .lines()
            .filter_map(|l| l.trim().strip_suffix(": <value>"))
            .filter(|n| !n.is_empty() && !n.contains(char::is_whitespace))
            .collect();
        if names.is_empty() {
            return Err("prompt requests no `name: <value>` lines".into());
        }
        let paragraph = prompt.split("\n\n").next().unwrap_or("");
        let body = paragraph
            .strip_prefix("My ")
            .ok_or("record paragraph does not start with `My `")?;
        let body = body.strip_suffix('.').unwrap_or(body);
        let values: Vec<&str> = body
            .split(". My ")
            .map(|frag| frag.split_once(" is ").map(|(_, v)| v))
            .collect::<Option<_>>()
            .ok_or("record fragment without ` is `")?;
        if values.len() != names.len() {
            return Err(format!(
                "{} record values for {} output columns",
                values.len(),
                names.len()
            ));
        }
        let lines: Vec<String> = names
            .iter()
            .zip(values)
            .map(|(name, value)| {
                let mapped = self
                    .remap
                    .iter()
                    .filter(|r| r.column == *name)
                    .find_map(|r| r.mapping.get(value))
                    .map_or(value, String::as_str);
                format!("{name}: {mapped}")
            })
            .collect();
        Ok(lines.join("\n"))
    }
}

/// Deterministic offline backend. Usage equals the request's estimate.
#[derive(Debug, Default)]
pub struct MockBackend {
    by_fingerprint: BTreeMap<String, String>,
    by_index: BTreeMap<usize, String>,
    transform: Option<MockTransform>,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(entries: Vec<MockEntry>, transform: Option<MockTransform>) -> Self {
        let mut m = MockBackend {
            transform,
            ..MockBackend::default()
        };
        for e in entries {
            if let Some(fp) = e.fingerprint {
                m.by_fingerprint.insert(fp, e.response.clone());
            }
            if let Some(i) = e.index {
                m.by_index.insert(i, e.response);
            }
        }
        m
    }

    pub fn echo() -> Self {
        MockBackend::new(Vec::new(), Some(MockTransform::echo()))
    }

    /// Script file: a JSON list of entries.
    pub fn load_script(path: impl AsRef<Path>) -> Result<Vec<MockEntry>, LlmError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            LlmError::Config(format!("cannot read mock script {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| LlmError::Config(format!("mock script {}: {e}", path.display())))
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl ChatBackend for MockBackend {
    fn send(&self, index: usize, request: &ChatRequest) -> Result<Completion, LlmError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let scripted = self
            .by_fingerprint
            .get(&request.fingerprint())
            .or_else(|| self.by_index.get(&index))
            .cloned();
        let text = match (scripted, &self.transform) {
            (Some(t), _) => t,
            (None, Some(tr)) => tr
                .respond(request.user_text())
                .map_err(|reason| LlmError::MockMiss { index, reason })?,
            (None, None) => {
                return Err(LlmError::MockMiss {
                    index,
                    reason: "no scripted entry".into(),
                })
            }
        };
        let prompt_tokens: u64 = request
            .messages
            .iter()
            .map(|m| estimate_tokens(&m.content))
            .sum();
        Ok(Completion {
            text,
            usage: Usage {
                prompt_tokens,
                completion_tokens: request.max_output_tokens,
                total_tokens: request.estimated_tokens(),
            },
            attempts: 1,
        })
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": "mock",
            "scripted_by_index": self.by_index.len(),
            "scripted_by_fingerprint": self.by_fingerprint.len(),
            "transform": self.transform,
        })
    }
}
