//! Provider-agnostic chat wire protocol, the scripted mock provider and the
//! retrying, rate-limited client wrapper.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::clock::{Clock, TokenBucket};

/// Delay before the first transport retry; doubles on each further retry.
pub const BACKOFF_BASE: Duration = Duration::from_secs(1);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("invalid chat request: {0}")]
    InvalidRequest(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider misconfigured: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    Experimenter,
    Agent,
}

impl Role {
    pub fn wire_name(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::Experimenter => "user",
            Role::Agent => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn experimenter(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Experimenter,
            content: content.into(),
        }
    }

    pub fn agent(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Agent,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    pub role: String,
    pub content: String,
}

/// Request body sent to a provider endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<WireMessage>,
    pub temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Response body returned by a provider endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
}

/// One canned mock reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockStep {
    pub reply: String,
    /// Substring the latest experimenter message must contain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<String>,
    /// Simulate a transport failure instead of replying.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fail: bool,
}

impl MockStep {
    pub fn reply(text: impl Into<String>) -> Self {
        MockStep {
            reply: text.into(),
            expect: None,
            fail: false,
        }
    }

    pub fn failure() -> Self {
        MockStep {
            reply: String::new(),
            expect: None,
            fail: true,
        }
    }
}

/// Scenario for the mock provider: ordered steps, then an optional reply
/// repeated forever.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    #[serde(default)]
    pub steps: Vec<MockStep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub then: Option<String>,
}

impl MockScript {
    pub fn replies<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        MockScript {
            steps: replies.into_iter().map(MockStep::reply).collect(),
            then: None,
        }
    }
}

fn default_model() -> String {
    "mock".into()
}
fn default_temperature() -> f64 {
    1.0
}
fn default_timeout_ms() -> u64 {
    60_000
}
fn default_max_retries() -> u32 {
    3
}
fn default_rate_limit() -> f64 {
    60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    /// HTTP(S) URL, or `mock` to use the scripted provider.
    pub endpoint: String,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_rate_limit")]
    pub rate_limit_per_min: f64,
    /// Environment variable holding the bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock: Option<MockScript>,
}

impl ProviderConfig {
    pub fn mock(script: MockScript) -> Self {
        ProviderConfig {
            endpoint: "mock".into(),
            model: default_model(),
            temperature: default_temperature(),
            seed: None,
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            rate_limit_per_min: 60_000.0,
            api_key_env: None,
            mock: Some(script),
        }
    }

    pub fn is_mock(&self) -> bool {
        self.endpoint == "mock"
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.timeout_ms == 0 {
            return Err(LlmError::Config("timeout_ms must be positive".into()));
        }
        if !(self.rate_limit_per_min > 0.0 && self.rate_limit_per_min.is_finite()) {
            return Err(LlmError::Config("rate_limit_per_min must be positive".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(LlmError::Config("temperature must be a non-negative number".into()));
        }
        if self.is_mock() {
            if self.mock.is_none() {
                return Err(LlmError::Config("mock endpoint needs a `mock` script".into()));
            }
        } else if !(self.endpoint.starts_with("http://") || self.endpoint.starts_with("https://")) {
            return Err(LlmError::Config(format!(
                "endpoint must be `mock` or an http(s) URL, got {:?}",
                self.endpoint
            )));
        }
        Ok(())
    }

    pub fn request(&self, messages: &[ChatMessage]) -> ChatRequest {
        ChatRequest {
            model: self.model.clone(),
            messages: messages
                .iter()
                .map(|m| WireMessage {
                    role: m.role.wire_name().into(),
                    content: m.content.clone(),
                })
                .collect(),
            temperature: self.temperature,
            seed: self.seed,
        }
    }
}

/// A chat backend: one request, one reply text.
pub trait ChatProvider: Send + Sync {
    fn complete(&self, request: &ChatRequest, timeout: Duration) -> Result<ChatResponse, LlmError>;
}

/// Deterministic provider driven by a [`MockScript`].
#[derive(Debug)]
pub struct MockProvider {
    steps: Mutex<VecDeque<MockStep>>,
    then: Option<String>,
}

impl MockProvider {
    pub fn new(script: MockScript) -> Self {
        MockProvider {
            steps: Mutex::new(script.steps.into()),
            then: script.then,
        }
    }
}

impl ChatProvider for MockProvider {
    fn complete(&self, request: &ChatRequest, _timeout: Duration) -> Result<ChatResponse, LlmError> {
        let step = self.steps.lock().unwrap().pop_front();
        let Some(step) = step else {
            return match &self.then {
                Some(reply) => Ok(ChatResponse { content: reply.clone() }),
                None => Err(LlmError::Transport("mock script exhausted".into())),
            };
        };
        if step.fail {
            return Err(LlmError::Transport("mock transport failure".into()));
        }
        if let Some(expected) = &step.expect {
            let last = request
                .messages
                .iter()
                .rev()
                .find(|m| m.role == "user")
                .map(|m| m.content.as_str())
                .unwrap_or("");
            if !last.contains(expected.as_str()) {
                return Err(LlmError::Transport(format!(
                    "mock expected a message containing {expected:?}, got {last:?}"
                )));
            }
        }
        Ok(ChatResponse { content: step.reply })
    }
}

/// Builds the backend named by `config`.
pub fn provider_for(config: &ProviderConfig) -> Result<Arc<dyn ChatProvider>, LlmError> {
    config.validate()?;
    if let Some(script) = config.mock.clone().filter(|_| config.is_mock()) {
        return Ok(Arc::new(MockProvider::new(script)));
    }
    #[cfg(feature = "http")]
    {
        Ok(Arc::new(super::http::HttpProvider::new(config)?))
    }
    #[cfg(not(feature = "http"))]
    {
        Err(LlmError::Config("built without HTTP provider support".into()))
    }
}

/// Adds rate limiting and exponential-backoff retries around a provider.
#[derive(Clone)]
pub struct ChatClient {
    config: ProviderConfig,
    provider: Arc<dyn ChatProvider>,
    limiter: Arc<TokenBucket>,
    clock: Arc<dyn Clock>,
}

impl ChatClient {
    pub fn new(
        config: ProviderConfig,
        provider: Arc<dyn ChatProvider>,
        limiter: Arc<TokenBucket>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        ChatClient {
            config,
            provider,
            limiter,
            clock,
        }
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    /// Sends the conversation and returns the agent's reply. `on_failure` sees
    /// every failed attempt, including ones that are retried.
    pub fn chat(
        &self,
        messages: &[ChatMessage],
        on_failure: &mut dyn FnMut(&LlmError),
    ) -> Result<ChatMessage, LlmError> {
        if messages.is_empty() {
            return Err(LlmError::InvalidRequest("no messages".into()));
        }
        if let Some(empty) = messages.iter().position(|m| m.content.is_empty()) {
            return Err(LlmError::InvalidRequest(format!("message {empty} is empty")));
        }
        let request = self.config.request(messages);
        let mut backoff = BACKOFF_BASE;
        let mut attempt = 0;
        loop {
            self.limiter.acquire(self.clock.as_ref());
            match self.provider.complete(&request, self.config.timeout()) {
                Ok(resp) => return Ok(ChatMessage::agent(resp.content)),
                Err(err) => {
                    on_failure(&err);
                    if attempt >= self.config.max_retries {
                        return Err(err);
                    }
                    attempt += 1;
                    self.clock.sleep(backoff);
                    backoff *= 2;
                }
            }
        }
    }
}
