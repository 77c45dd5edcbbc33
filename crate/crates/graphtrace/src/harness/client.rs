//! Chat-completion client with retries and exponential backoff.
//!
//! The wire protocol is the common chat shape: `model`, `messages` with
//! roles, `max_tokens`, and an optional `thinking_budget` field for
//! providers that cap chain-of-thought length. A trailing assistant message
//! is the prefill the model continues from. The API key is read from the
//! environment variable named in the endpoint at send time and never
//! stored.

use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::taskgen::{Message, Role};

use super::config::ModelEndpoint;
use super::HarnessError;

#[derive(Debug, Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    thinking_budget: Option<u32>,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Value>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Debug, Deserialize)]
struct ChoiceMessage {
    content: String,
}

/// A successful completion.
#[derive(Debug, Clone)]
pub struct ChatOutcome {
    pub content: String,
    pub thinking_tokens: Option<u64>,
    pub attempts: u32,
}

pub struct HttpChatClient {
    endpoint: ModelEndpoint,
    client: reqwest::blocking::Client,
}

impl HttpChatClient {
    pub fn new(endpoint: ModelEndpoint) -> Result<Self, HarnessError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(endpoint.timeout_secs))
            .build()
            .map_err(|e| HarnessError::Http(e.to_string()))?;
        Ok(HttpChatClient { endpoint, client })
    }

    pub fn endpoint(&self) -> &ModelEndpoint {
        &self.endpoint
    }

    /// Send a conversation, retrying transient failures with exponential
    /// backoff and jitter. Client errors other than 429 fail immediately.
    pub fn complete(&self, messages: &[Message]) -> Result<ChatOutcome, HarnessError> {
        let wire: Vec<WireMessage> = messages
            .iter()
            .map(|m| WireMessage {
                role: match m.role {
                    Role::User => "user",
                    Role::AssistantPrefill => "assistant",
                },
                content: &m.text,
            })
            .collect();
        let request = ChatRequest {
            model: &self.endpoint.model,
            messages: wire,
            max_tokens: self.endpoint.max_tokens,
            thinking_budget: self.endpoint.thinking_budget.wire_value(),
        };
        let retry = &self.endpoint.retry;
        let mut last_error = String::new();
        for attempt in 1..=retry.max_attempts {
            if attempt > 1 {
                backoff_sleep(retry.backoff_base_ms, attempt - 1);
            }
            match self.send_once(&request) {
                Ok(mut outcome) => {
                    outcome.attempts = attempt;
                    return Ok(outcome);
                }
                Err(SendError::Fatal(detail)) => {
                    return Err(HarnessError::EndpointFailure {
                        attempts: attempt,
                        detail,
                    })
                }
                Err(SendError::Transient(detail)) => last_error = detail,
            }
        }
        Err(HarnessError::EndpointFailure {
            attempts: retry.max_attempts,
            detail: last_error,
        })
    }

    fn send_once(&self, request: &ChatRequest) -> Result<ChatOutcome, SendError> {
        let mut builder = self.client.post(&self.endpoint.base_url).json(request);
        if !self.endpoint.auth_env.is_empty() {
            if let Ok(key) = std::env::var(&self.endpoint.auth_env) {
                if !key.is_empty() {
                    builder = builder.bearer_auth(key);
                }
            }
        }
        let response = builder
            .send()
            .map_err(|e| SendError::Transient(format!("transport: {e}")))?;
        let status = response.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(SendError::Transient(format!("status {status}")));
        }
        if !status.is_success() {
            return Err(SendError::Fatal(format!("status {status}")));
        }
        let body: ChatResponse = response
            .json()
            .map_err(|e| SendError::Transient(format!("bad response body: {e}")))?;
        let choice = body
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| SendError::Transient("response had no choices".to_string()))?;
        Ok(ChatOutcome {
            content: choice.message.content,
            thinking_tokens: body.usage.as_ref().and_then(extract_thinking_tokens),
            attempts: 0,
        })
    }
}

enum SendError {
    Transient(String),
    Fatal(String),
}

fn extract_thinking_tokens(usage: &Value) -> Option<u64> {
    for path in [
        &["thinking_tokens"][..],
        &["reasoning_tokens"][..],
        &["completion_tokens_details", "reasoning_tokens"][..],
    ] {
        let mut node = usage;
        let mut found = true;
        for key in path {
            match node.get(key) {
                Some(next) => node = next,
                None => {
                    found = false;
                    break;
                }
            }
        }
        if found {
            if let Some(n) = node.as_u64() {
                return Some(n);
            }
        }
    }
    None
}

fn backoff_sleep(base_ms: u64, exponent: u32) {
    let backoff = base_ms.saturating_mul(1u64 << exponent.min(16));
    let jitter = rand::rng().random_range(0.5..1.5);
    let millis = ((backoff as f64) * jitter).min(30_000.0) as u64;
    std::thread::sleep(Duration::from_millis(millis));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thinking_tokens_are_found_at_any_documented_path() {
        let direct: Value = serde_json::json!({"thinking_tokens": 42});
        assert_eq!(extract_thinking_tokens(&direct), Some(42));
        let reasoning: Value = serde_json::json!({"reasoning_tokens": 7});
        assert_eq!(extract_thinking_tokens(&reasoning), Some(7));
        let nested: Value =
            serde_json::json!({"completion_tokens_details": {"reasoning_tokens": 11}});
        assert_eq!(extract_thinking_tokens(&nested), Some(11));
        let none: Value = serde_json::json!({"prompt_tokens": 5});
        assert_eq!(extract_thinking_tokens(&none), None);
    }

    #[test]
    fn prefill_request_serializes_with_trailing_assistant() {
        let request = ChatRequest {
            model: "m",
            messages: vec![
                WireMessage {
                    role: "user",
                    content: "continue",
                },
                WireMessage {
                    role: "assistant",
                    content: "a b c",
                },
            ],
            max_tokens: 16,
            thinking_budget: Some(0),
        };
        let json = serde_json::to_value(&request).unwrap();
        assert_eq!(json["messages"][1]["role"], "assistant");
        assert_eq!(json["thinking_budget"], 0);
        let unlimited = ChatRequest {
            thinking_budget: None,
            ..request
        };
        let json = serde_json::to_value(&unlimited).unwrap();
        assert!(json.get("thinking_budget").is_none());
    }
}
