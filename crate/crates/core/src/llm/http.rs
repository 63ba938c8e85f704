use std::time::Duration;

use super::provider::{ChatProvider, ChatRequest, ChatResponse, LlmError, ProviderConfig};

/// Posts [`ChatRequest`] bodies to an HTTP endpoint that answers with
/// `{"content": ...}`.
pub struct HttpProvider {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(config: &ProviderConfig) -> Result<Self, LlmError> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| LlmError::Config(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(HttpProvider {
            endpoint: config.endpoint.clone(),
            api_key,
            client,
        })
    }
}

impl ChatProvider for HttpProvider {
    fn complete(&self, request: &ChatRequest, timeout: Duration) -> Result<ChatResponse, LlmError> {
        let mut builder = self.client.post(&self.endpoint).timeout(timeout).json(request);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let resp = builder.send().map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(LlmError::Transport(format!("HTTP {status}")));
        }
        resp.json::<ChatResponse>()
            .map_err(|e| LlmError::Transport(format!("bad response body: {e}")))
    }
}
