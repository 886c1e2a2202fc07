//! Chat-completion backends.
//!
//! One trait, two implementations: [`HttpBackend`] speaks the
//! OpenAI-compatible `/chat/completions` protocol with retry/backoff, and
//! [`ScriptedBackend`] replays canned responses in order for deterministic
//! offline runs, recording every request it receives.

use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default environment variable holding the API key.
pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("authentication failed ({0})")]
    Auth(String),
    #[error("retries exhausted after {attempts} attempts: {last_error}")]
    RetriesExhausted { attempts: u32, last_error: String },
    #[error("malformed response body: {0}")]
    MalformedResponse(String),
    #[error("response contained empty content")]
    EmptyContent,
    #[error("script exhausted after {0} responses")]
    ScriptExhausted(usize),
    #[error("api key environment variable {0} is not set")]
    MissingApiKey(String),
}

/// Chat roles accepted by the completion endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

/// One message in a chat exchange.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::Assistant,
            content: content.into(),
        }
    }
}

/// A completion request. Defaults pin temperature 0 and top_p 1.0 so runs
/// are reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub top_p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

impl CompletionRequest {
    pub fn new(model: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        Self {
            model: model.into(),
            messages,
            temperature: 0.0,
            top_p: 1.0,
            max_tokens: None,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.messages.is_empty() {
            return Err(BackendError::InvalidRequest("messages are empty".into()));
        }
        if self.temperature < 0.0 {
            return Err(BackendError::InvalidRequest("temperature below 0".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(BackendError::InvalidRequest("top_p outside (0, 1]".into()));
        }
        for msg in &self.messages {
            if msg.content.is_empty() && matches!(msg.role, ChatRole::System | ChatRole::User) {
                return Err(BackendError::InvalidRequest(format!(
                    "{:?} message has empty content",
                    msg.role
                )));
            }
        }
        Ok(())
    }

    /// The exact JSON body the live backend posts for this request.
    pub fn wire_body(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("request serializes")
    }
}

/// Anything that can answer a completion request. Implementations must be
/// safe to share across case workers.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError>;

    fn name(&self) -> &'static str;
}

/// Connection settings for the live backend.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendConfig {
    pub base_url: String,
    pub api_key_env_var: String,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub request_timeout_ms: u64,
    pub max_in_flight: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".to_string(),
            api_key_env_var: DEFAULT_API_KEY_ENV.to_string(),
            max_retries: 3,
            initial_backoff_ms: 500,
            request_timeout_ms: 120_000,
            max_in_flight: 4,
        }
    }
}

/// Backoff before retry `attempt` (0-based): doubles each time, so the
/// sequence is non-decreasing.
pub fn backoff_delay(initial_ms: u64, attempt: u32) -> Duration {
    Duration::from_millis(initial_ms.saturating_mul(1u64 << attempt.min(16)))
}

/// Counting semaphore bounding in-flight live requests.
struct Gate {
    slots: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    fn new(limit: usize) -> Self {
        Self {
            slots: Mutex::new(limit),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> GateGuard<'_> {
        let mut slots = self.slots.lock().expect("gate lock");
        while *slots == 0 {
            slots = self.freed.wait(slots).expect("gate wait");
        }
        *slots -= 1;
        GateGuard { gate: self }
    }
}

struct GateGuard<'a> {
    gate: &'a Gate,
}

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        let mut slots = self.gate.slots.lock().expect("gate lock");
        *slots += 1;
        self.gate.freed.notify_one();
    }
}

#[derive(Debug, Deserialize)]
struct ApiResponse {
    choices: Vec<ApiChoice>,
}

#[derive(Debug, Deserialize)]
struct ApiChoice {
    message: ApiMessage,
}

#[derive(Debug, Deserialize)]
struct ApiMessage {
    content: Option<String>,
}

/// Live OpenAI-compatible client. The API key is read from the configured
/// environment variable at construction time, never from files.
pub struct HttpBackend {
    config: BackendConfig,
    api_key: String,
    client: reqwest::blocking::Client,
    gate: Gate,
}

impl HttpBackend {
    pub fn new(config: BackendConfig) -> Result<Self, BackendError> {
        let api_key = std::env::var(&config.api_key_env_var)
            .map_err(|_| BackendError::MissingApiKey(config.api_key_env_var.clone()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.request_timeout_ms))
            .build()
            .map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
        let gate = Gate::new(config.max_in_flight.max(1));
        Ok(Self {
            config,
            api_key,
            client,
            gate,
        })
    }

    fn endpoint(&self) -> String {
        format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        )
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<String, AttemptError> {
        let response = self
            .client
            .post(self.endpoint())
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .map_err(|e| {
                if e.is_timeout() || e.is_connect() {
                    AttemptError::Transient(e.to_string())
                } else {
                    AttemptError::Fatal(BackendError::MalformedResponse(e.to_string()))
                }
            })?;

        let status = response.status();
        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Err(AttemptError::Fatal(BackendError::Auth(status.to_string())));
        }
        if status == reqwest::StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            return Err(AttemptError::Transient(format!("http status {status}")));
        }
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(AttemptError::Fatal(BackendError::MalformedResponse(
                format!("http status {status}: {body}"),
            )));
        }
        let parsed: ApiResponse = response
            .json()
            .map_err(|e| AttemptError::Fatal(BackendError::MalformedResponse(e.to_string())))?;
        let content = parsed
            .choices
            .first()
            .and_then(|c| c.message.content.clone())
            .ok_or(AttemptError::Fatal(BackendError::MalformedResponse(
                "missing choices[0].message.content".into(),
            )))?;
        if content.is_empty() {
            return Err(AttemptError::Fatal(BackendError::EmptyContent));
        }
        Ok(content)
    }
}

enum AttemptError {
    Transient(String),
    Fatal(BackendError),
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        request.validate()?;
        let body = request.wire_body();
        let _slot = self.gate.acquire();
        let mut last_error = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                std::thread::sleep(backoff_delay(self.config.initial_backoff_ms, attempt - 1));
            }
            match self.attempt(&body) {
                Ok(content) => return Ok(content),
                Err(AttemptError::Fatal(err)) => return Err(err),
                Err(AttemptError::Transient(reason)) => {
                    log::warn!("transient backend failure (attempt {attempt}): {reason}");
                    last_error = reason;
                }
            }
        }
        Err(BackendError::RetriesExhausted {
            attempts: self.config.max_retries + 1,
            last_error,
        })
    }

    fn name(&self) -> &'static str {
        "http"
    }
}

struct ScriptState {
    remaining: VecDeque<String>,
    served: usize,
    log: Vec<CompletionRequest>,
}

/// Deterministic backend that replays a fixed script of responses in order
/// and records every request for later assertions. Calls are serialized
/// internally so replay order is preserved even when the handle is shared.
pub struct ScriptedBackend {
    state: Mutex<ScriptState>,
}

impl ScriptedBackend {
    pub fn new(script: Vec<String>) -> Self {
        Self {
            state: Mutex::new(ScriptState {
                remaining: script.into(),
                served: 0,
                log: Vec::new(),
            }),
        }
    }

    pub fn from_strs(script: &[&str]) -> Self {
        Self::new(script.iter().map(|s| s.to_string()).collect())
    }

    /// Every request received so far, in call order.
    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.state.lock().expect("script lock").log.clone()
    }

    /// Wire-format bodies of every request received so far.
    pub fn request_bodies(&self) -> Vec<String> {
        self.state
            .lock()
            .expect("script lock")
            .log
            .iter()
            .map(|r| r.wire_body().to_string())
            .collect()
    }

    pub fn calls_made(&self) -> usize {
        self.state.lock().expect("script lock").log.len()
    }

    pub fn remaining(&self) -> usize {
        self.state.lock().expect("script lock").remaining.len()
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        request.validate()?;
        let mut state = self.state.lock().expect("script lock");
        state.log.push(request.clone());
        match state.remaining.pop_front() {
            Some(entry) => {
                state.served += 1;
                Ok(entry)
            }
            None => Err(BackendError::ScriptExhausted(state.served)),
        }
    }

    fn name(&self) -> &'static str {
        "scripted"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;
    use std::sync::Arc;

    fn request(messages: Vec<ChatMessage>) -> CompletionRequest {
        CompletionRequest::new("test-model", messages)
    }

    #[test]
    fn scripted_replays_in_order() {
        let backend = ScriptedBackend::from_strs(&["A", "B"]);
        let req = request(vec![ChatMessage::user("hi")]);
        assert_eq!(backend.complete(&req).unwrap(), "A");
        assert_eq!(backend.complete(&req).unwrap(), "B");
        assert!(matches!(
            backend.complete(&req),
            Err(BackendError::ScriptExhausted(2))
        ));
    }

    #[test]
    fn scripted_records_every_request() {
        let backend = ScriptedBackend::from_strs(&["A", "B", "C"]);
        let req = request(vec![ChatMessage::user("hi")]);
        backend.complete(&req).unwrap();
        backend.complete(&req).unwrap();
        assert_eq!(backend.requests().len(), 2);
        assert_eq!(backend.calls_made(), 2);
        assert_eq!(backend.remaining(), 1);
    }

    #[test]
    fn defaults_serialize_temperature_and_top_p() {
        let req = request(vec![ChatMessage::user("hi")]);
        let body = req.wire_body();
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["top_p"], 1.0);
        assert!(body.get("max_tokens").is_none());
        assert_eq!(body["messages"][0]["role"], "user");
    }

    #[test]
    fn validation_rejects_bad_requests() {
        let empty = request(vec![]);
        assert!(matches!(
            empty.validate(),
            Err(BackendError::InvalidRequest(_))
        ));

        let blank_user = request(vec![ChatMessage::user("")]);
        assert!(blank_user.validate().is_err());

        let mut bad_top_p = request(vec![ChatMessage::user("x")]);
        bad_top_p.top_p = 0.0;
        assert!(bad_top_p.validate().is_err());

        // Assistant messages may be empty (models sometimes reply blank).
        let blank_assistant = request(vec![ChatMessage::user("x"), ChatMessage::assistant("")]);
        assert!(blank_assistant.validate().is_ok());
    }

    #[test]
    fn backoff_is_non_decreasing() {
        let delays: Vec<Duration> = (0..8).map(|a| backoff_delay(500, a)).collect();
        for pair in delays.windows(2) {
            assert!(pair[0] <= pair[1]);
        }
        assert_eq!(delays[0], Duration::from_millis(500));
        assert_eq!(delays[1], Duration::from_millis(1000));
    }

    /// Minimal HTTP server that answers each connection with the next
    /// scripted status/body pair.
    fn spawn_http_stub(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<()>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buf = [0u8; 8192];
                let _ = stream.read(&mut buf);
                let reason = match status {
                    200 => "OK",
                    401 => "Unauthorized",
                    429 => "Too Many Requests",
                    _ => "Error",
                };
                let response = format!(
                    "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(response.as_bytes()).unwrap();
            }
        });
        (format!("http://{addr}"), handle)
    }

    fn live_backend(base_url: String) -> HttpBackend {
        std::env::set_var("COLLEGIAL_BENCH_TEST_KEY", "test-key");
        HttpBackend::new(BackendConfig {
            base_url,
            api_key_env_var: "COLLEGIAL_BENCH_TEST_KEY".to_string(),
            max_retries: 3,
            initial_backoff_ms: 1,
            request_timeout_ms: 5_000,
            max_in_flight: 2,
        })
        .unwrap()
    }

    #[test]
    fn live_retries_transient_then_succeeds() {
        let ok = r#"{"choices":[{"message":{"content":"hello"}}]}"#.to_string();
        let (url, server) = spawn_http_stub(vec![
            (500, "oops".to_string()),
            (429, "slow down".to_string()),
            (200, ok),
        ]);
        let backend = live_backend(url);
        let out = backend
            .complete(&request(vec![ChatMessage::user("hi")]))
            .unwrap();
        assert_eq!(out, "hello");
        server.join().unwrap();
    }

    #[test]
    fn live_does_not_retry_auth_failures() {
        let (url, server) = spawn_http_stub(vec![(401, "no".to_string())]);
        let backend = live_backend(url);
        let err = backend
            .complete(&request(vec![ChatMessage::user("hi")]))
            .unwrap_err();
        assert!(matches!(err, BackendError::Auth(_)), "{err}");
        server.join().unwrap();
    }

    #[test]
    fn live_rejects_empty_content() {
        let empty = r#"{"choices":[{"message":{"content":""}}]}"#.to_string();
        let (url, server) = spawn_http_stub(vec![(200, empty)]);
        let backend = live_backend(url);
        let err = backend
            .complete(&request(vec![ChatMessage::user("hi")]))
            .unwrap_err();
        assert!(matches!(err, BackendError::EmptyContent), "{err}");
        server.join().unwrap();
    }

    #[test]
    fn missing_api_key_is_an_error() {
        std::env::remove_var("COLLEGIAL_BENCH_NO_SUCH_KEY");
        let result = HttpBackend::new(BackendConfig {
            api_key_env_var: "COLLEGIAL_BENCH_NO_SUCH_KEY".to_string(),
            ..BackendConfig::default()
        });
        assert!(matches!(result.err(), Some(BackendError::MissingApiKey(_))));
    }

    #[test]
    fn gate_bounds_concurrent_holders() {
        let gate = Arc::new(Gate::new(2));
        let active = Arc::new(Mutex::new(0usize));
        let peak = Arc::new(Mutex::new(0usize));
        let mut handles = Vec::new();
        for _ in 0..8 {
            let gate = Arc::clone(&gate);
            let active = Arc::clone(&active);
            let peak = Arc::clone(&peak);
            handles.push(std::thread::spawn(move || {
                let _slot = gate.acquire();
                {
                    let mut a = active.lock().unwrap();
                    *a += 1;
                    let mut p = peak.lock().unwrap();
                    *p = (*p).max(*a);
                }
                std::thread::sleep(Duration::from_millis(5));
                *active.lock().unwrap() -= 1;
            }));
        }
        for h in handles {
            h.join().unwrap();
        }
        assert!(*peak.lock().unwrap() <= 2);
    }
}
