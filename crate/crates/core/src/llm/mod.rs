//! Chat-completion backends, token budgeting and ordered batch dispatch.

mod batch;
mod budget;
mod live;
mod mock;
mod sanitize;

pub use batch::{run_batch, run_prompt_batch, BatchItem, BatchResult, PromptOutcome};
pub use budget::{Reservation, TokenBudget, DAY};
pub use live::{LiveBackend, LiveConfig};
pub use mock::{MockBackend, MockEntry, MockTransform, RemapRule};
pub use sanitize::LlmSanitizer;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LlmError {
    #[error("token budget exhausted: need {needed}, {remaining} remaining")]
    BudgetExhausted { needed: u64, remaining: u64 },
    #[error("transport failure after {attempts} attempts: {message}")]
    TransportFailure { attempts: u32, message: String },
    #[error("authentication failure: {0}")]
    AuthFailure(String),
    #[error("mock has no response for record {index}: {reason}")]
    MockMiss { index: usize, reason: String },
    #[error("unusable response: {0}")]
    InvalidResponse(String),
    #[error("configuration: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

/// Request defaults shared by every call of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChatSettings {
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: u64,
    /// No system message is sent when absent.
    pub system_prompt: Option<String>,
}

impl Default for ChatSettings {
    fn default() -> Self {
        ChatSettings {
            model_id: "gpt-4-1106-preview".into(),
            temperature: 0.1,
            max_output_tokens: 400,
            system_prompt: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_output_tokens: u64,
}

impl ChatRequest {
    /// Optional system message followed by exactly one user message.
    pub fn user(content: impl Into<String>, settings: &ChatSettings) -> Self {
        let mut messages = Vec::with_capacity(2);
        if let Some(sys) = &settings.system_prompt {
            messages.push(ChatMessage {
                role: Role::System,
                content: sys.clone(),
            });
        }
        messages.push(ChatMessage {
            role: Role::User,
            content: content.into(),
        });
        ChatRequest {
            model_id: settings.model_id.clone(),
            messages,
            temperature: settings.temperature,
            max_output_tokens: settings.max_output_tokens,
        }
    }

    pub fn user_text(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map_or("", |m| m.content.as_str())
    }

    /// Upper-bound cost: estimated prompt tokens plus the output cap.
    pub fn estimated_tokens(&self) -> u64 {
        self.messages
            .iter()
            .map(|m| estimate_tokens(&m.content))
            .sum::<u64>()
            + self.max_output_tokens
    }

    /// SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("request serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_tokens: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
    pub attempts: u32,
}

pub trait ChatBackend: Send + Sync {
    /// `index` identifies the record the request belongs to.
    fn send(&self, index: usize, request: &ChatRequest) -> Result<Completion, LlmError>;

    /// Description for provenance; never contains credentials.
    fn describe(&self) -> serde_json::Value;
}

/// `ceil(bytes / 4)`: a deliberately generous token estimate.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.len() as u64).div_ceil(4)
}

/// Reserves the request's estimated cost, sends it and settles the
/// reservation with the reported usage. Nothing is sent when the budget
/// cannot cover the estimate.
pub fn complete(
    index: usize,
    request: &ChatRequest,
    backend: &dyn ChatBackend,
    budget: &TokenBudget,
) -> Result<Completion, LlmError> {
    let reservation = budget.reserve(request.estimated_tokens())?;
    send_reserved(index, request, backend, budget, reservation)
}

pub(crate) fn send_reserved(
    index: usize,
    request: &ChatRequest,
    backend: &dyn ChatBackend,
    budget: &TokenBudget,
    reservation: Reservation,
) -> Result<Completion, LlmError> {
    match backend.send(index, request) {
        Ok(c) => {
            budget.settle(reservation, c.usage.total_tokens);
            Ok(c)
        }
        Err(e) => {
            budget.settle(reservation, 0);
            Err(e)
        }
    }
}
