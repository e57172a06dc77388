//! HTTP backend speaking the common chat-completions JSON shape.
//!
//! Configured from the environment: `TABQA_LLM_URL` (endpoint),
//! `TABQA_LLM_KEY` (bearer token, optional), `TABQA_LLM_MODEL` (model id).

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{ChatBackend, ChatRequest, GatewayError};

pub const ENV_URL: &str = "TABQA_LLM_URL";
pub const ENV_KEY: &str = "TABQA_LLM_KEY";
pub const ENV_MODEL: &str = "TABQA_LLM_MODEL";

/// Counting semaphore bounding in-flight HTTP requests.
struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Semaphore { permits: Mutex::new(permits), available: Condvar::new() }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().expect("semaphore lock");
        while *permits == 0 {
            permits = self.available.wait(permits).expect("semaphore wait");
        }
        *permits -= 1;
        SemaphoreGuard { semaphore: self }
    }
}

struct SemaphoreGuard<'a> {
    semaphore: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.semaphore.permits.lock().expect("semaphore lock");
        *permits += 1;
        self.semaphore.available.notify_one();
    }
}

pub struct LiveBackend {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
    model: String,
    limiter: Semaphore,
}

#[derive(Deserialize)]
struct ChatCompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

impl LiveBackend {
    pub fn from_env(max_in_flight: usize) -> Result<Self, GatewayError> {
        let url = std::env::var(ENV_URL)
            .map_err(|_| GatewayError::Transport(format!("{ENV_URL} is not set")))?;
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| "default".to_string());
        Ok(Self::new(url, std::env::var(ENV_KEY).ok(), model, max_in_flight))
    }

    pub fn new(
        url: String,
        api_key: Option<String>,
        model: String,
        max_in_flight: usize,
    ) -> Self {
        let client = reqwest::blocking::Client::builder()
            .connect_timeout(Duration::from_secs(10))
            .timeout(Duration::from_secs(120))
            .build()
            .expect("reqwest client");
        LiveBackend {
            client,
            url,
            api_key,
            model,
            limiter: Semaphore::new(max_in_flight.max(1)),
        }
    }
}

impl ChatBackend for LiveBackend {
    fn complete(&self, request: &ChatRequest) -> Result<Vec<String>, GatewayError> {
        let _permit = self.limiter.acquire();
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "n": request.n_samples,
        });
        let mut http = self.client.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            http = http.bearer_auth(key);
        }
        let response = http.send().map_err(|e| GatewayError::Transport(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| GatewayError::Transport(e.to_string()))?;
        if !status.is_success() {
            // Server-side statuses are transient; client errors are not.
            if status.is_server_error() || status.as_u16() == 429 {
                return Err(GatewayError::Transport(format!("status {status}: {text:.200}")));
            }
            return Err(GatewayError::InvalidResponse(format!("status {status}: {text:.200}")));
        }
        let parsed: ChatCompletionResponse = serde_json::from_str(&text)
            .map_err(|e| GatewayError::InvalidResponse(format!("bad completion json: {e}")))?;
        if parsed.choices.is_empty() {
            return Err(GatewayError::InvalidResponse("empty choices".into()));
        }
        let mut out: Vec<String> =
            parsed.choices.into_iter().map(|c| c.message.content).collect();
        // Endpoints that ignore `n` still satisfy the contract by repetition
        // at temperature zero, where samples are interchangeable.
        if out.len() == 1 && request.n_samples > 1 && request.temperature == 0.0 {
            out = vec![out[0].clone(); request.n_samples];
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    #[test]
    fn semaphore_bounds_concurrency() {
        let sem = Arc::new(Semaphore::new(2));
        let active = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let mut handles = Vec::new();
        for _ in 0..8 {
            let sem = Arc::clone(&sem);
            let active = Arc::clone(&active);
            let peak = Arc::clone(&peak);
            handles.push(std::thread::spawn(move || {
                let _permit = sem.acquire();
                let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                peak.fetch_max(now, Ordering::SeqCst);
                std::thread::sleep(Duration::from_millis(10));
                active.fetch_sub(1, Ordering::SeqCst);
            }));
        }
        for h in handles {
            h.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }

    #[test]
    fn unreachable_endpoint_is_transport_error() {
        let backend = LiveBackend::new(
            // Closed loopback port refuses the connection immediately.
            "http://127.0.0.1:1/v1/chat/completions".to_string(),
            None,
            "m".to_string(),
            1,
        );
        let req = ChatRequest::new(crate::gateway::StageLabel::StepBack, "q");
        match backend.complete(&req) {
            Err(GatewayError::Transport(_)) => {}
            other => panic!("expected Transport error, got {other:?}"),
        }
    }
}
