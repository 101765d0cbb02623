use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatRequest, Completion, LlmError, Usage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiveConfig {
    pub endpoint: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
    /// Retries after the first attempt on transport errors, 429 and 5xx.
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for LiveConfig {
    fn default() -> Self {
        LiveConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 120,
            max_retries: 5,
            initial_backoff_ms: 1000,
            max_backoff_ms: 60_000,
        }
    }
}

impl LiveConfig {
    /// Delay before retry `k` (0-based): doubling, capped.
    pub fn backoff(&self, k: u32) -> Duration {
        let ms = self.initial_backoff_ms.saturating_mul(1u64 << k.min(32));
        Duration::from_millis(ms.min(self.max_backoff_ms))
    }
}

pub struct LiveBackend {
    config: LiveConfig,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl fmt::Debug for LiveBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LiveBackend")
            .field("config", &self.config)
            .field("api_key", &"<redacted>")
            .finish()
    }
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    max_tokens: u64,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireReply,
}

#[derive(Deserialize)]
struct WireReply {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
    #[serde(default)]
    total_tokens: u64,
}

enum Failure {
    Retryable(String),
    Fatal(LlmError),
}

impl LiveBackend {
    /// Reads the API key from the configured environment variable.
    pub fn from_env(config: LiveConfig) -> Result<Self, LlmError> {
        let key = std::env::var(&config.api_key_env).map_err(|_| {
            LlmError::AuthFailure(format!(
                "environment variable {} is not set",
                config.api_key_env
            ))
        })?;
        Self::with_key(config, key)
    }

    pub fn with_key(config: LiveConfig, api_key: String) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Config(format!("http client: {e}")))?;
        Ok(LiveBackend {
            config,
            api_key,
            client,
        })
    }

    fn attempt(&self, request: &ChatRequest) -> Result<Completion, Failure> {
        let body = WireRequest {
            model: &request.model_id,
            messages: request
                .messages
                .iter()
                .map(|m| WireMessage {
                    role: match m.role {
                        super::Role::System => "system",
                        super::Role::User => "user",
                    },
                    content: &m.content,
                })
                .collect(),
            temperature: request.temperature,
            max_tokens: request.max_output_tokens,
        };
        let resp = self
            .client
            .post(&self.config.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| Failure::Retryable(e.to_string()))?;
        let status = resp.status();
        if status == 401 || status == 403 {
            return Err(Failure::Fatal(LlmError::AuthFailure(format!(
                "HTTP {status}"
            ))));
        }
        if status == 429 || status.is_server_error() {
            return Err(Failure::Retryable(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(Failure::Fatal(LlmError::InvalidResponse(format!(
                "HTTP {status}: {text}"
            ))));
        }
        let parsed: WireResponse = resp
            .json()
            .map_err(|e| Failure::Fatal(LlmError::InvalidResponse(e.to_string())))?;
        let text = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| {
                Failure::Fatal(LlmError::InvalidResponse(
                    "no choices[0].message.content".into(),
                ))
            })?;
        let usage = match parsed.usage {
            Some(u) => Usage {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
                total_tokens: if u.total_tokens > 0 {
                    u.total_tokens
                } else {
                    u.prompt_tokens + u.completion_tokens
                },
            },
            // without counters, charge the reservation-sized estimate
            None => Usage {
                prompt_tokens: 0,
                completion_tokens: 0,
                total_tokens: request.estimated_tokens(),
            },
        };
        Ok(Completion {
            text,
            usage,
            attempts: 1,
        })
    }
}

impl ChatBackend for LiveBackend {
    fn send(&self, index: usize, request: &ChatRequest) -> Result<Completion, LlmError> {
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(request) {
                Ok(mut c) => {
                    c.attempts = attempts;
                    return Ok(c);
                }
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(msg)) => {
                    if attempts > self.config.max_retries {
                        return Err(LlmError::TransportFailure {
                            attempts,
                            message: msg,
                        });
                    }
                    let wait = self.config.backoff(attempts - 1);
                    log::warn!(
                        "record {index}: attempt {attempts} failed ({msg}); retrying in {wait:?}"
                    );
                    std::thread::sleep(wait);
                }
            }
        }
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": "live",
            "endpoint": self.config.endpoint,
            "api_key_env": self.config.api_key_env,
            "max_retries": self.config.max_retries,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ChatSettings;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// Serves one canned `(status, body)` per connection and returns the
    /// request bodies it saw.
    fn serve(replies: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!(
            "http://{}/v1/chat/completions",
            listener.local_addr().unwrap()
        );
        let handle = std::thread::spawn(move || {
            let mut bodies = Vec::new();
            for (status, body) in replies {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                bodies.push(String::from_utf8(buf).unwrap());
                let mut stream = stream;
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            bodies
        });
        (url, handle)
    }

    fn config(url: String) -> LiveConfig {
        LiveConfig {
            endpoint: url,
            timeout_secs: 10,
            max_retries: 3,
            initial_backoff_ms: 1,
            max_backoff_ms: 5,
            ..LiveConfig::default()
        }
    }

    const OK: &str = r#"{"choices":[{"message":{"role":"assistant","content":"age: 40"}}],"usage":{"prompt_tokens":12,"completion_tokens":3,"total_tokens":15}}"#;

    #[test]
    fn retries_server_errors_then_succeeds() {
        let (url, server) = serve(vec![
            (500, "{}".into()),
            (503, "{}".into()),
            (200, OK.into()),
        ]);
        let backend = LiveBackend::with_key(config(url), "k".into()).unwrap();
        let req = ChatRequest::user("hello", &ChatSettings::default());
        let c = backend.send(0, &req).unwrap();
        assert_eq!(
            (c.text.as_str(), c.attempts, c.usage.total_tokens),
            ("age: 40", 3, 15)
        );
        let bodies = server.join().unwrap();
        let sent: serde_json::Value = serde_json::from_str(&bodies[2]).unwrap();
        assert_eq!(sent["model"], "gpt-4-1106-preview");
        assert_eq!(sent["temperature"], 0.1);
        assert_eq!(sent["messages"][0]["role"], "user");
        assert_eq!(sent["messages"][0]["content"], "hello");
        assert!(sent["max_tokens"].is_u64());
    }

    #[test]
    fn gives_up_after_retry_cap() {
        let (url, server) = serve(vec![(500, "{}".into()); 4]);
        let backend = LiveBackend::with_key(config(url), "k".into()).unwrap();
        let req = ChatRequest::user("hello", &ChatSettings::default());
        assert!(matches!(
            backend.send(0, &req),
            Err(LlmError::TransportFailure { attempts: 4, .. })
        ));
        server.join().unwrap();
    }

    #[test]
    fn auth_failure_is_not_retried() {
        let (url, server) = serve(vec![(401, "{}".into())]);
        let backend = LiveBackend::with_key(config(url), "k".into()).unwrap();
        let req = ChatRequest::user("hello", &ChatSettings::default());
        assert!(matches!(
            backend.send(0, &req),
            Err(LlmError::AuthFailure(_))
        ));
        assert_eq!(server.join().unwrap().len(), 1);
    }

    #[test]
    fn credentials_stay_out_of_descriptions() {
        let backend =
            LiveBackend::with_key(config("http://127.0.0.1:9/".into()), "sk-secret".into())
                .unwrap();
        assert!(!backend.describe().to_string().contains("sk-secret"));
        assert!(!format!("{backend:?}").contains("sk-secret"));
        let missing = LiveConfig {
            api_key_env: "TABSAN_TEST_KEY_THAT_IS_NOT_SET".into(),
            ..LiveConfig::default()
        };
        assert!(matches!(
            LiveBackend::from_env(missing),
            Err(LlmError::AuthFailure(_))
        ));
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let c = LiveConfig {
            initial_backoff_ms: 100,
            max_backoff_ms: 350,
            ..LiveConfig::default()
        };
        let ms: Vec<u128> = (0..4).map(|k| c.backoff(k).as_millis()).collect();
        assert_eq!(ms, vec![100, 200, 350, 350]);
    }
}
