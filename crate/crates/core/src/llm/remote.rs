//! Chat-completion HTTP backend.
//!
//! Speaks the common chat-completion JSON protocol: a POST carrying the
//! model name and message list at temperature 0, authenticated with a bearer
//! token read from a configured environment variable. Requests are retried
//! with exponential backoff; HTTP 429 honors the server's Retry-After.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde_json::{json, Value};

use super::{LlmError, LlmRequest, PromptTemplate, CHILD_DIVIDER};

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    /// Full chat-completion endpoint URL.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token. The token
    /// itself is never stored or logged.
    pub token_env: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    /// Maximum in-flight requests.
    pub concurrency: usize,
    /// Base backoff delay; doubles per retry.
    pub backoff_ms: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-3.5-turbo".into(),
            token_env: "CONDREC_LLM_TOKEN".into(),
            timeout_secs: 30,
            max_retries: 3,
            concurrency: 4,
            backoff_ms: 250,
        }
    }
}

/// Counting semaphore bounding in-flight requests.
struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Self { permits: Mutex::new(permits.max(1)), available: Condvar::new() }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut n = self.permits.lock().unwrap();
        while *n == 0 {
            n = self.available.wait(n).unwrap();
        }
        *n -= 1;
        SemaphoreGuard { sem: self }
    }
}

struct SemaphoreGuard<'a> {
    sem: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        *self.sem.permits.lock().unwrap() += 1;
        self.sem.available.notify_one();
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    permits: Semaphore,
}

/// Body of a chat-completion request for one user message.
pub fn build_chat_body(model: &str, message: &str) -> Value {
    json!({
        "model": model,
        "messages": [{"role": "user", "content": message}],
        "temperature": 0,
    })
}

/// Assistant text of the first choice, if present.
pub fn extract_chat_content(value: &Value) -> Option<String> {
    value
        .get("choices")?
        .get(0)?
        .get("message")?
        .get("content")?
        .as_str()
        .map(str::to_string)
}

/// Meta-prompt asking the model for `n` rewrites of `parent` in the
/// template file format, divided by `=====` lines.
pub fn build_children_message(parent: &PromptTemplate, n: usize) -> String {
    format!(
        "Here is a prompt template in a four-section format (id, body, input \
         hint, output instruction, separated by --- lines):\n\n{}\n\nWrite {n} \
         improved variations of it. Keep the input hint and output instruction \
         sections unchanged; vary only the body. Output the {n} templates in \
         the same four-section format, separated from each other by a line \
         containing only {CHILD_DIVIDER}.",
        parent.to_file_text()
    )
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let permits = Semaphore::new(config.concurrency);
        Ok(Self { config, client, permits })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    pub(super) fn respond(&self, req: &LlmRequest) -> Result<String, LlmError> {
        let message = match req {
            LlmRequest::Condense { prompt, item } => prompt.render_item(item),
            LlmRequest::Interests { prompt, titles } => prompt.render_history(titles),
            LlmRequest::Children { parent, n } => build_children_message(parent, *n),
        };
        self.chat(&message)
    }

    fn retry_after(response: &reqwest::blocking::Response) -> Option<Duration> {
        response
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.parse::<u64>().ok())
            .map(Duration::from_secs)
    }

    /// One chat completion with retries. Requests are idempotent reads, so
    /// retrying cannot duplicate side effects.
    pub fn chat(&self, message: &str) -> Result<String, LlmError> {
        let token = std::env::var(&self.config.token_env)
            .map_err(|_| LlmError::MissingToken(self.config.token_env.clone()))?;
        let body = build_chat_body(&self.config.model, message);
        let mut last_err = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                let backoff =
                    Duration::from_millis(self.config.backoff_ms << (attempt - 1).min(8));
                std::thread::sleep(backoff);
            }
            let _permit = self.permits.acquire();
            let result = self
                .client
                .post(&self.config.base_url)
                .bearer_auth(&token)
                .json(&body)
                .send();
            match result {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        let value: Value = resp
                            .json()
                            .map_err(|e| LlmError::Transport(format!("bad response body: {e}")))?;
                        return extract_chat_content(&value).ok_or_else(|| LlmError::Parse {
                            raw: value.to_string(),
                        });
                    }
                    if status.as_u16() == 429 || status.is_server_error() {
                        if let Some(wait) = Self::retry_after(&resp) {
                            std::thread::sleep(wait);
                        }
                        last_err = format!("http status {status}");
                        continue;
                    }
                    return Err(LlmError::Transport(format!("http status {status}")));
                }
                Err(e) => {
                    last_err = e.to_string();
                    continue;
                }
            }
        }
        Err(LlmError::Transport(format!(
            "giving up after {} attempts: {last_err}",
            self.config.max_retries + 1
        )))
    }
}
