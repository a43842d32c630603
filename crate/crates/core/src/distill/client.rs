//! Chat-completion client abstraction: an HTTP implementation speaking
//! the OpenAI-compatible wire format, plus a shared rate limiter.

use serde::{Deserialize, Serialize};
use std::sync::Mutex;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Per-call options. `tag` identifies the problem the call belongs to;
/// the HTTP client ignores it, the scripted mock uses it to select the
/// right fixture.
#[derive(Debug, Clone)]
pub struct SendOptions {
    pub temperature: f64,
    pub tag: String,
}

#[derive(Debug, Clone, Error)]
pub enum ClientError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("service returned status {status}: {body}")]
    Service { status: u16, body: String },
    #[error("fixture error: {0}")]
    Fixture(String),
}

impl ClientError {
    /// Transport weather and throttling are retried; everything else is
    /// surfaced immediately.
    pub fn retryable(&self) -> bool {
        match self {
            ClientError::Transport(_) => true,
            ClientError::Service { status, .. } => *status == 429 || *status >= 500,
            ClientError::Fixture(_) => false,
        }
    }
}

/// A chat-completion backend. Implementations hold no conversation
/// state: the full message history is passed on every call, so they
/// must be safe for concurrent use across problems.
pub trait ChatClient: Send + Sync {
    fn send(&self, conversation: &[ChatMessage], options: &SendOptions) -> Result<String, ClientError>;
}

/// Spaces calls so a configured requests-per-minute ceiling holds
/// across all worker threads.
pub struct RateLimiter {
    min_interval: Duration,
    next_slot: Mutex<Instant>,
}

impl RateLimiter {
    pub fn new(requests_per_minute: u32) -> RateLimiter {
        let rpm = requests_per_minute.max(1);
        RateLimiter {
            min_interval: Duration::from_secs_f64(60.0 / rpm as f64),
            next_slot: Mutex::new(Instant::now()),
        }
    }

    pub fn acquire(&self) {
        let mut slot = self.next_slot.lock().expect("rate limiter poisoned");
        let now = Instant::now();
        if *slot > now {
            std::thread::sleep(*slot - now);
        }
        *slot = Instant::now() + self.min_interval;
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

/// Blocking HTTP client for an OpenAI-compatible chat-completions
/// endpoint. The API key comes from the environment, never from config
/// files.
pub struct HttpChatClient {
    http: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: String,
    limiter: RateLimiter,
}

impl HttpChatClient {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: impl Into<String>,
        requests_per_minute: u32,
    ) -> Result<HttpChatClient, ClientError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(HttpChatClient {
            http,
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: api_key.into(),
            limiter: RateLimiter::new(requests_per_minute),
        })
    }
}

impl ChatClient for HttpChatClient {
    fn send(&self, conversation: &[ChatMessage], options: &SendOptions) -> Result<String, ClientError> {
        self.limiter.acquire();
        let request = WireRequest {
            model: &self.model,
            messages: conversation,
            temperature: options.temperature,
        };
        let response = self
            .http
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&request)
            .send()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(ClientError::Service {
                status: status.as_u16(),
                body: body.chars().take(500).collect(),
            });
        }
        let parsed: WireResponse = response
            .json()
            .map_err(|e| ClientError::Transport(format!("malformed response: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ClientError::Transport("response carried no message content".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_limiter_spaces_calls() {
        let limiter = RateLimiter::new(60_000); // 1ms spacing
        let start = Instant::now();
        for _ in 0..5 {
            limiter.acquire();
        }
        assert!(start.elapsed() >= Duration::from_millis(4));
    }

    #[test]
    fn retryable_classification() {
        assert!(ClientError::Transport("t".into()).retryable());
        assert!(ClientError::Service { status: 429, body: String::new() }.retryable());
        assert!(ClientError::Service { status: 503, body: String::new() }.retryable());
        assert!(!ClientError::Service { status: 400, body: String::new() }.retryable());
        assert!(!ClientError::Fixture("f".into()).retryable());
    }
}
