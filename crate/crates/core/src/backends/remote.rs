use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Backend, BackendKind, GenerationParams};
use crate::error::{Error, Result};

/// Environment variable holding the bearer token for remote endpoints.
pub const API_KEY_ENV: &str = "COMPASS_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    /// Full URL of the chat-completion endpoint.
    pub endpoint: String,
    pub model: String,
    #[serde(default = "defaults::send_seed")]
    pub send_seed: bool,
    #[serde(default = "defaults::max_in_flight")]
    pub max_in_flight: usize,
    /// Token-bucket refill rate; unlimited when absent.
    #[serde(default)]
    pub requests_per_second: Option<f64>,
    /// Retries after the first attempt.
    #[serde(default = "defaults::max_retries")]
    pub max_retries: u32,
    #[serde(default = "defaults::initial_backoff_ms")]
    pub initial_backoff_ms: u64,
    #[serde(default = "defaults::max_backoff_ms")]
    pub max_backoff_ms: u64,
    #[serde(default = "defaults::timeout_secs")]
    pub timeout_secs: u64,
}

mod defaults {
    pub fn send_seed() -> bool {
        true
    }
    pub fn max_in_flight() -> usize {
        4
    }
    pub fn max_retries() -> u32 {
        5
    }
    pub fn initial_backoff_ms() -> u64 {
        500
    }
    pub fn max_backoff_ms() -> u64 {
        8_000
    }
    pub fn timeout_secs() -> u64 {
        120
    }
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            send_seed: defaults::send_seed(),
            max_in_flight: defaults::max_in_flight(),
            requests_per_second: None,
            max_retries: defaults::max_retries(),
            initial_backoff_ms: defaults::initial_backoff_ms(),
            max_backoff_ms: defaults::max_backoff_ms(),
            timeout_secs: defaults::timeout_secs(),
        }
    }

    /// Delay before retry number `attempt` (0-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt.min(32)).unwrap_or(u64::MAX);
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }
}

/// Token bucket with a one-request burst.
#[derive(Debug)]
struct TokenBucket {
    rate: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    fn new(rate: f64) -> Self {
        TokenBucket { rate, state: Mutex::new((1.0, Instant::now())) }
    }

    fn acquire(&self) {
        loop {
            let wait = {
                let mut state = self.state.lock().unwrap_or_else(|e| e.into_inner());
                let now = Instant::now();
                let (tokens, last) = *state;
                let tokens = (tokens + now.duration_since(last).as_secs_f64() * self.rate).min(1.0);
                if tokens >= 1.0 {
                    *state = (tokens - 1.0, now);
                    return;
                }
                *state = (tokens, now);
                (1.0 - tokens) / self.rate
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

/// Client for an OpenAI-style chat-completion endpoint.
pub struct RemoteBackend {
    id: String,
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    bucket: Option<TokenBucket>,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend").field("id", &self.id).field("config", &self.config).finish()
    }
}

enum Attempt {
    Done(String),
    Retry(Error),
}

impl RemoteBackend {
    pub fn new(id: impl Into<String>, config: RemoteConfig) -> Result<Self> {
        if config.max_in_flight == 0 {
            return Err(Error::InvalidArgument("max_in_flight must be at least 1".into()));
        }
        let bucket = match config.requests_per_second {
            Some(r) if r.is_finite() && r > 0.0 => Some(TokenBucket::new(r)),
            Some(r) => return Err(Error::InvalidArgument(format!("requests_per_second {r} must be positive"))),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Network(e.to_string()))?;
        Ok(RemoteBackend { id: id.into(), config, client, bucket })
    }

    fn body(&self, prompt: &str, params: &GenerationParams) -> serde_json::Value {
        let mut body = json!({
            "model": self.config.model,
            "messages": [{ "role": "user", "content": prompt }],
            "temperature": if params.sampling_enabled { params.temperature } else { 0.0 },
            "max_tokens": params.max_tokens,
        });
        if let Some(top_p) = params.top_p.filter(|_| params.sampling_enabled) {
            body["top_p"] = json!(top_p);
        }
        if self.config.send_seed {
            body["seed"] = json!(params.seed);
        }
        body
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<Attempt> {
        if let Some(bucket) = &self.bucket {
            bucket.acquire();
        }
        let mut request = self.client.post(&self.config.endpoint).json(body);
        if let Ok(token) = std::env::var(API_KEY_ENV) {
            request = request.bearer_auth(token);
        }
        let response = match request.send() {
            Ok(r) => r,
            Err(e) => return Ok(Attempt::Retry(Error::Network(e.without_url().to_string()))),
        };
        let status = response.status();
        let text = match response.text() {
            Ok(t) => t,
            Err(e) => return Ok(Attempt::Retry(Error::Network(e.without_url().to_string()))),
        };
        if status.as_u16() == 429 || status.is_server_error() {
            return Ok(Attempt::Retry(Error::Network(format!("status {status}"))));
        }
        if !status.is_success() {
            let message: String = text.chars().take(500).collect();
            let lower = message.to_lowercase();
            if status.as_u16() == 400 && lower.contains("context") && (lower.contains("length") || lower.contains("window")) {
                return Err(Error::ContextOverflow(message));
            }
            return Err(Error::Service { status: status.as_u16(), message });
        }
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::MalformedResponse(format!("invalid JSON: {e}")))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(|c| Attempt::Done(c.to_string()))
            .ok_or_else(|| Error::MalformedResponse("missing choices[0].message.content".into()))
    }
}

impl Backend for RemoteBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> BackendKind {
        BackendKind::RemoteHttp
    }

    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<String> {
        params.validate()?;
        let body = self.body(prompt, params);
        let mut attempt = 0;
        loop {
            match self.attempt(&body)? {
                Attempt::Done(text) => return Ok(text),
                Attempt::Retry(err) if attempt >= self.config.max_retries => {
                    return Err(Error::Network(format!(
                        "retry budget of {} exhausted: {err}",
                        self.config.max_retries
                    )))
                }
                Attempt::Retry(err) => {
                    tracing::warn!(backend = %self.id, attempt, "retrying after {err}");
                    std::thread::sleep(self.config.backoff(attempt));
                    attempt += 1;
                }
            }
        }
    }

    fn seed_sent(&self) -> Option<bool> {
        Some(self.config.send_seed)
    }

    fn max_in_flight(&self) -> usize {
        self.config.max_in_flight
    }
}
