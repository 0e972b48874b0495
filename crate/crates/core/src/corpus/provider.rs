use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::ProviderConfig;
use crate::{truncate, ProviderError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }
}

/// Where a completion will be placed in the bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Paraphrase { index: usize, attempt: u32 },
    Answer { m: usize, n: usize, attempt: u32 },
}

#[derive(Debug, Clone)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub slot: Slot,
    /// The text being paraphrased or answered, unwrapped from any template.
    pub source: String,
}

/// A chat-completion backend.
pub trait ChatProvider: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError>;

    /// Opaque metadata stored with the bundle.
    fn trace(&self) -> serde_json::Value {
        serde_json::Value::Null
    }
}

/// Deterministic provider driven by a closure; used for fixtures and tests.
pub struct ScriptedChat<F> {
    script: F,
}

impl<F> ScriptedChat<F>
where
    F: Fn(&ChatRequest) -> Result<String, ProviderError> + Send + Sync,
{
    pub fn new(script: F) -> Self {
        Self { script }
    }
}

impl<F> ChatProvider for ScriptedChat<F>
where
    F: Fn(&ChatRequest) -> Result<String, ProviderError> + Send + Sync,
{
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        (self.script)(request)
    }

    fn trace(&self) -> serde_json::Value {
        json!({ "provider": "scripted" })
    }
}

/// Offline provider: paraphrase `i` is the source with `#i` appended, and
/// every answer repeats its paraphrase verbatim.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoChat;

impl ChatProvider for EchoChat {
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        Ok(match request.slot {
            Slot::Paraphrase { index, .. } => format!("{}#{index}", request.source),
            Slot::Answer { .. } => request.source.clone(),
        })
    }

    fn trace(&self) -> serde_json::Value {
        json!({ "provider": "echo" })
    }
}

/// Client for an OpenAI-compatible `chat/completions` endpoint.
pub struct OpenAiChat {
    agent: ureq::Agent,
    endpoint: String,
    api_key: Option<String>,
    retry_budget: u32,
    backoff: Duration,
}

impl OpenAiChat {
    /// Resolves the API key from the environment variable named in `cfg`.
    pub fn from_config(cfg: &ProviderConfig) -> Result<Self, ProviderError> {
        let api_key = match &cfg.api_key_ref {
            Some(var) => Some(std::env::var(var).map_err(|_| ProviderError::MissingApiKey(var.clone()))?),
            None => None,
        };
        Ok(Self {
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(120)).build(),
            endpoint: cfg.endpoint_url.clone(),
            api_key,
            retry_budget: cfg.retry_budget,
            backoff: Duration::from_millis(500),
        })
    }

    /// Base delay between retries; doubles on every attempt.
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<String, (bool, String)> {
        let mut req = self.agent.post(&self.endpoint).set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        match req.send_json(body.clone()) {
            Ok(resp) => {
                let value: serde_json::Value =
                    resp.into_json().map_err(|e| (false, format!("invalid JSON body: {e}")))?;
                value["choices"][0]["message"]["content"]
                    .as_str()
                    .map(str::to_string)
                    .ok_or_else(|| (false, "missing choices[0].message.content".to_string()))
            }
            Err(ureq::Error::Status(code, resp)) => {
                let retryable = code == 429 || code >= 500;
                let text = resp.into_string().unwrap_or_default();
                Err((retryable, format!("HTTP {code}: {}", truncate(&text, 200))))
            }
            Err(e) => Err((true, e.to_string())),
        }
    }
}

impl ChatProvider for OpenAiChat {
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let body = json!({
            "model": request.model,
            "messages": request.messages,
            "temperature": request.temperature,
        });
        let mut last = String::new();
        for attempt in 0..=self.retry_budget {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.saturating_pow(attempt - 1));
            }
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err((false, message)) => {
                    return Err(ProviderError::Http { endpoint: self.endpoint.clone(), message })
                }
                Err((true, message)) => {
                    log::warn!("chat request failed (attempt {}): {message}", attempt + 1);
                    last = message;
                }
            }
        }
        Err(ProviderError::RetriesExhausted { attempts: self.retry_budget + 1, last })
    }

    fn trace(&self) -> serde_json::Value {
        json!({ "provider": "openai-compatible", "endpoint": self.endpoint })
    }
}
