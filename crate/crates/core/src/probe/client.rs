//! Chat-completion calls with retry and rate limiting.

use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable holding the endpoint API key.
pub const API_KEY_ENV: &str = "MORPHPROBE_API_KEY";

/// Generation settings for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub endpoint: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Retries after the first attempt.
    pub retry_limit: u32,
    pub concurrency_limit: usize,
    /// First backoff delay; doubles on every retry.
    #[serde(with = "millis")]
    pub backoff_base: Duration,
    #[serde(with = "millis")]
    pub request_timeout: Duration,
    /// Token-bucket rate in requests per second; `None` is unlimited.
    pub requests_per_second: Option<f64>,
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

pub const DEFAULT_TEMPERATURE: f64 = 0.6;
/// For models that answer with just the word.
pub const TERSE_MAX_TOKENS: u32 = 8;
/// For models that tend to explain themselves.
pub const VERBOSE_MAX_TOKENS: u32 = 80;

/// Model families that follow the "one word only" instruction.
pub fn is_terse_model(model: &str) -> bool {
    let m = model.to_ascii_lowercase();
    m.contains("gpt") || m.contains("allam")
}

impl ProbeConfig {
    /// Defaults for `model`, picking the terse or verbose token budget.
    pub fn for_model(endpoint: &str, model: &str) -> Self {
        Self {
            endpoint: endpoint.to_owned(),
            model_name: model.to_owned(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: if is_terse_model(model) { TERSE_MAX_TOKENS } else { VERBOSE_MAX_TOKENS },
            retry_limit: 4,
            concurrency_limit: 4,
            backoff_base: Duration::from_millis(500),
            request_timeout: Duration::from_secs(60),
            requests_per_second: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(format!("temperature {} outside [0, 2]", self.temperature));
        }
        if self.max_tokens == 0 {
            return Err("max_tokens must be at least 1".into());
        }
        if self.concurrency_limit == 0 {
            return Err("concurrency_limit must be at least 1".into());
        }
        if self.model_name.is_empty() {
            return Err("model name is empty".into());
        }
        if let Some(rps) = self.requests_per_second {
            if !(rps > 0.0 && rps.is_finite()) {
                return Err(format!("requests_per_second {rps} must be positive"));
            }
        }
        reqwest::Url::parse(&self.endpoint).map_err(|e| format!("endpoint {:?}: {e}", self.endpoint))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Request body sent to the endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn user(prompt: &str, config: &ProbeConfig) -> Self {
        Self {
            model: config.model_name.clone(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content: prompt.to_owned(),
            }],
            temperature: config.temperature,
            max_tokens: config.max_tokens,
        }
    }

    /// Text of the last user message.
    pub fn prompt(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .map_or("", |m| m.content.as_str())
    }
}

/// Outcome of a single request.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttemptError {
    /// Worth retrying: rate limits, server errors, timeouts.
    #[error("transient: {0}")]
    Transient(String),
    /// Credentials refused; no point continuing the run.
    #[error("authentication: {0}")]
    Auth(String),
    /// The request itself was refused or the answer was unreadable.
    #[error("rejected: {0}")]
    Rejected(String),
}

/// Anything that can answer a chat request.
pub trait Completer: Send + Sync {
    fn attempt(&self, request: &ChatRequest) -> Result<String, AttemptError>;
}

impl<C: Completer + ?Sized> Completer for &C {
    fn attempt(&self, request: &ChatRequest) -> Result<String, AttemptError> {
        (**self).attempt(request)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("failed after {attempts} attempt(s): {error}")]
pub struct CompletionFailure {
    pub attempts: u32,
    pub error: AttemptError,
}

impl CompletionFailure {
    pub fn is_auth(&self) -> bool {
        matches!(self.error, AttemptError::Auth(_))
    }
}

/// Simple token bucket shared by all workers.
#[derive(Debug)]
pub struct RateLimiter {
    rate: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn new(requests_per_second: f64) -> Self {
        let capacity = requests_per_second.max(1.0);
        Self {
            rate: requests_per_second,
            capacity,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Block until a request may go out.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut state = self.state.lock().expect("rate limiter poisoned");
                let now = Instant::now();
                let refill = now.duration_since(state.1).as_secs_f64() * self.rate;
                state.0 = (state.0 + refill).min(self.capacity);
                state.1 = now;
                if state.0 >= 1.0 {
                    state.0 -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - state.0) / self.rate)
            };
            thread::sleep(wait);
        }
    }
}

/// Send `prompt`, retrying transient failures with exponential backoff.
pub fn complete<C: Completer + ?Sized>(
    prompt: &str,
    config: &ProbeConfig,
    completer: &C,
    limiter: Option<&RateLimiter>,
) -> Result<Completion, CompletionFailure> {
    let request = ChatRequest::user(prompt, config);
    let mut delay = config.backoff_base;
    let mut attempts = 0;
    loop {
        if let Some(l) = limiter {
            l.acquire();
        }
        attempts += 1;
        match completer.attempt(&request) {
            Ok(text) => return Ok(Completion { text, attempts }),
            Err(AttemptError::Transient(msg)) if attempts <= config.retry_limit => {
                log::debug!("attempt {attempts} failed ({msg}); retrying in {delay:?}");
                thread::sleep(delay);
                delay = (delay * 2).min(Duration::from_secs(60));
            }
            Err(error) => return Err(CompletionFailure { attempts, error }),
        }
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Extract the first choice's text from a chat-completion response body.
pub fn parse_chat_response(body: &str) -> Result<String, AttemptError> {
    let parsed: ChatResponse =
        serde_json::from_str(body).map_err(|e| AttemptError::Rejected(format!("bad response body: {e}")))?;
    parsed
        .choices
        .into_iter()
        .next()
        .map(|c| c.message.content.unwrap_or_default())
        .ok_or_else(|| AttemptError::Rejected("response has no choices".into()))
}

/// Map an HTTP status to an attempt outcome class.
pub fn classify_status(status: u16, body: &str) -> AttemptError {
    let msg = format!("HTTP {status}: {}", body.chars().take(200).collect::<String>());
    match status {
        401 | 403 => AttemptError::Auth(msg),
        408 | 409 | 425 | 429 | 500..=599 => AttemptError::Transient(msg),
        _ => AttemptError::Rejected(msg),
    }
}

/// Blocking HTTP client for an OpenAI-style chat-completion endpoint.
pub struct HttpCompleter {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: Option<String>,
}

impl HttpCompleter {
    pub fn new(config: &ProbeConfig, api_key: Option<String>) -> Result<Self, String> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.request_timeout)
            .build()
            .map_err(|e| e.to_string())?;
        Ok(Self {
            client,
            endpoint: config.endpoint.clone(),
            api_key,
        })
    }

    /// Read the key from [`API_KEY_ENV`] if set.
    pub fn from_env(config: &ProbeConfig) -> Result<Self, String> {
        Self::new(config, std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()))
    }
}

impl Completer for HttpCompleter {
    fn attempt(&self, request: &ChatRequest) -> Result<String, AttemptError> {
        let mut req = self.client.post(&self.endpoint).json(request);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let response = req.send().map_err(|e| AttemptError::Transient(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response.text().map_err(|e| AttemptError::Transient(e.to_string()))?;
        if (200..300).contains(&status) {
            parse_chat_response(&body)
        } else {
            Err(classify_status(status, &body))
        }
    }
}
