use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{parse_reply, Answer, Oracle, OracleDescriptor, OracleError, Question};

/// Environment variable holding the bearer token for the remote endpoint.
pub const API_KEY_ENV: &str = "GUIDANCE_API_KEY";

/// Version tag of the yes/no prompt pair below. Recorded in every trace.
pub const PROMPT_VERSION: &str = "yesno-v1";

pub const SYSTEM_PROMPT: &str = "You are reviewing a primary care clinical note for a guideline-based \
decision support system. Answer the question strictly with yes or no, using only information stated \
in the note.";

pub const STRICT_SYSTEM_PROMPT: &str = "Reply with exactly one word: yes or no";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_ms: u64,
    /// Extra attempts after a transport failure or timeout.
    pub max_retries: u32,
    /// Process-wide cap; `None` means unlimited.
    pub requests_per_second: Option<f64>,
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            temperature: 0.2,
            timeout_ms: 30_000,
            max_retries: 2,
            requests_per_second: None,
            api_key: None,
        }
    }
}

impl RemoteConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if let Some(rps) = self.requests_per_second {
            if rps.is_nan() || rps <= 0.0 {
                return Err(format!("requests_per_second must be > 0, got {rps}"));
            }
        }
        Ok(())
    }

    pub fn with_key_from_env(mut self) -> Self {
        self.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        self
    }
}

/// Token bucket with capacity one: requests are spaced at least
/// `1 / rate` seconds apart across every holder of the limiter.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next_slot: Mutex<Instant>,
}

impl RateLimiter {
    pub fn new(requests_per_second: f64) -> Self {
        RateLimiter {
            interval: Duration::from_secs_f64(1.0 / requests_per_second),
            next_slot: Mutex::new(Instant::now()),
        }
    }

    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next_slot.lock().expect("rate limiter poisoned");
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: &str) -> Self {
        ChatMessage {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: &str) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: &'a [ChatMessage],
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

/// Minimal blocking client for chat-completions-shaped endpoints.
#[derive(Clone)]
pub struct ChatClient {
    agent: ureq::Agent,
    config: RemoteConfig,
    limiter: Option<Arc<RateLimiter>>,
}

impl ChatClient {
    pub fn new(config: RemoteConfig, limiter: Option<Arc<RateLimiter>>) -> Self {
        let agent_config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build();
        ChatClient {
            agent: ureq::Agent::new_with_config(agent_config),
            config,
            limiter,
        }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    /// Send one completion request, retrying transport failures up to
    /// `max_retries` times. Returns the first choice's content.
    pub fn complete(&self, messages: &[ChatMessage]) -> Result<(String, Duration), OracleError> {
        let mut attempt = 0;
        loop {
            match self.send_once(messages) {
                Ok(ok) => return Ok(ok),
                Err(OracleError::Timeout | OracleError::Transport(_)) if attempt < self.config.max_retries => {
                    attempt += 1;
                    thread::sleep(Duration::from_millis(100 << attempt.min(6)));
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn send_once(&self, messages: &[ChatMessage]) -> Result<(String, Duration), OracleError> {
        if let Some(limiter) = &self.limiter {
            limiter.acquire();
        }
        let body = ChatRequest {
            model: &self.config.model,
            temperature: self.config.temperature,
            messages,
        };
        let started = Instant::now();
        let mut request = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.config.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send_json(&body).map_err(transport_error)?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            let text = response.body_mut().read_to_string().unwrap_or_else(|e| e.to_string());
            return Err(OracleError::Transport(format!("HTTP {status}: {}", truncate(&text))));
        }
        let parsed: ChatResponse = response.body_mut().read_json().map_err(transport_error)?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| OracleError::Transport("response has no choices".into()))?;
        Ok((content, started.elapsed()))
    }
}

fn truncate(s: &str) -> String {
    s.chars().take(200).collect()
}

fn transport_error(e: ureq::Error) -> OracleError {
    match e {
        ureq::Error::Timeout(_) => OracleError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => OracleError::Timeout,
        other => OracleError::Transport(other.to_string()),
    }
}

/// Asks a chat model about one vignette.
pub struct RemoteOracle {
    client: ChatClient,
    vignette_text: String,
}

impl RemoteOracle {
    pub fn new(client: ChatClient, vignette_text: impl Into<String>) -> Self {
        RemoteOracle {
            client,
            vignette_text: vignette_text.into(),
        }
    }

    pub fn user_message(&self, question: &Question) -> String {
        format!(
            "Clinical note:\n{}\n\nQuestion: {}\nAnswer yes or no.",
            self.vignette_text, question.text
        )
    }
}

impl Oracle for RemoteOracle {
    fn answer(&mut self, question: &Question) -> Result<Answer, OracleError> {
        let user = self.user_message(question);
        let mut retries = 0;
        let mut elapsed = Duration::ZERO;
        for system in [SYSTEM_PROMPT, STRICT_SYSTEM_PROMPT] {
            let messages = [ChatMessage::system(system), ChatMessage::user(&user)];
            let (raw, latency) = self.client.complete(&messages)?;
            elapsed += latency;
            match parse_reply(&raw) {
                Ok(value) => {
                    return Ok(Answer {
                        value,
                        raw: Some(raw),
                        latency_ms: Some(elapsed.as_millis() as u64),
                        retries,
                        flipped: false,
                    })
                }
                Err(_) if system == SYSTEM_PROMPT => retries += 1,
                Err(_) => return Err(OracleError::Unparseable { raw }),
            }
        }
        unreachable!("loop returns on the strict attempt")
    }

    fn descriptor(&self) -> OracleDescriptor {
        let cfg = self.client.config();
        let identity = (&cfg.endpoint, &cfg.model, cfg.temperature);
        OracleDescriptor::new("remote", &identity, PROMPT_VERSION)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limiter_spaces_requests() {
        let limiter = RateLimiter::new(50.0);
        let start = Instant::now();
        for _ in 0..4 {
            limiter.acquire();
        }
        // Three gaps of 20 ms after the first free slot.
        assert!(start.elapsed() >= Duration::from_millis(55));
    }

    #[test]
    fn request_body_shape() {
        let messages = [ChatMessage::system("s"), ChatMessage::user("u")];
        let body = ChatRequest {
            model: "m",
            temperature: 0.2,
            messages: &messages,
        };
        let v = serde_json::to_value(&body).unwrap();
        assert_eq!(v["model"], "m");
        assert_eq!(v["temperature"], 0.2);
        assert_eq!(v["messages"][1]["role"], "user");
    }
}
