//! Language-model access with budget enforcement, retries, and
//! record/replay so every pipeline run can be reproduced offline.

pub mod embed;
pub mod live;
pub mod replay;
pub mod scripted;

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("no recorded response for request {request_hash} (stage {stage})")]
    ReplayMiss { request_hash: String, stage: String },
    #[error("call budget of {budget} exhausted")]
    BudgetExceeded { budget: usize },
    #[error("backend returned {got} responses, expected {expected}")]
    WrongSampleCount { expected: usize, got: usize },
    #[error("invalid backend response: {0}")]
    InvalidResponse(String),
    #[error("trace io: {0}")]
    Io(#[from] std::io::Error),
}

/// Pipeline stage issuing a request. Serialized names are stable and are
/// part of the request hash, so they must never change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageLabel {
    SchemaAug,
    SemanticAug,
    LiteralAug,
    StepBack,
    SubQuery,
    ColFilter,
    SqlGen,
    SubAnswer,
    JointReason,
}

impl StageLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            StageLabel::SchemaAug => "schema_aug",
            StageLabel::SemanticAug => "semantic_aug",
            StageLabel::LiteralAug => "literal_aug",
            StageLabel::StepBack => "step_back",
            StageLabel::SubQuery => "sub_query",
            StageLabel::ColFilter => "col_filter",
            StageLabel::SqlGen => "sql_gen",
            StageLabel::SubAnswer => "sub_answer",
            StageLabel::JointReason => "joint_reason",
        }
    }

    pub const ALL: [StageLabel; 9] = [
        StageLabel::SchemaAug,
        StageLabel::SemanticAug,
        StageLabel::LiteralAug,
        StageLabel::StepBack,
        StageLabel::SubQuery,
        StageLabel::ColFilter,
        StageLabel::SqlGen,
        StageLabel::SubAnswer,
        StageLabel::JointReason,
    ];
}

impl std::fmt::Display for StageLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub stage: StageLabel,
    pub prompt: String,
    pub temperature: f64,
    pub n_samples: usize,
}

impl ChatRequest {
    pub fn new(stage: StageLabel, prompt: impl Into<String>) -> Self {
        ChatRequest { stage, prompt: prompt.into(), temperature: 0.0, n_samples: 1 }
    }

    pub fn with_sampling(mut self, temperature: f64, n_samples: usize) -> Self {
        self.temperature = temperature;
        self.n_samples = n_samples;
        self
    }

    /// Content hash identifying this request in trace stores. Covers every
    /// field that affects the response distribution.
    pub fn request_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.stage.as_str().as_bytes());
        hasher.update([0x1f]);
        hasher.update(format!("{}", self.temperature).as_bytes());
        hasher.update([0x1f]);
        hasher.update(format!("{}", self.n_samples).as_bytes());
        hasher.update([0x1f]);
        hasher.update(self.prompt.as_bytes());
        hex::encode(hasher.finalize())
    }
}

/// One request/response pair as persisted in a trace file (JSON lines).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRecord {
    pub request_hash: String,
    pub stage_label: StageLabel,
    pub prompt: String,
    pub temperature: f64,
    pub n_samples: usize,
    pub responses: Vec<String>,
    pub timestamp: String,
}

impl TraceRecord {
    pub fn from_exchange(request: &ChatRequest, responses: Vec<String>) -> Self {
        TraceRecord {
            request_hash: request.request_hash(),
            stage_label: request.stage,
            prompt: request.prompt.clone(),
            temperature: request.temperature,
            n_samples: request.n_samples,
            responses,
            timestamp: chrono::Utc::now().to_rfc3339(),
        }
    }
}

/// Anything that can answer a chat request: a live HTTP endpoint, a replay
/// store, or a scripted double in tests.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<Vec<String>, GatewayError>;

    /// True when responses come from a local store and no network is used.
    fn is_offline(&self) -> bool {
        false
    }
}

/// Front door for all model calls. Enforces the per-run call budget and
/// retries transient transport failures with fixed backoff.
pub struct Gateway {
    backend: Box<dyn ChatBackend>,
    budget: Option<usize>,
    used: AtomicUsize,
    max_retries: usize,
    backoff_ms: u64,
}

impl Gateway {
    pub fn new(backend: Box<dyn ChatBackend>) -> Self {
        Gateway { backend, budget: None, used: AtomicUsize::new(0), max_retries: 2, backoff_ms: 200 }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn with_retries(mut self, max_retries: usize, backoff_ms: u64) -> Self {
        self.max_retries = max_retries;
        self.backoff_ms = backoff_ms;
        self
    }

    pub fn calls_used(&self) -> usize {
        self.used.load(Ordering::SeqCst)
    }

    pub fn is_offline(&self) -> bool {
        self.backend.is_offline()
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<Vec<String>, GatewayError> {
        if let Some(budget) = self.budget {
            // Reserve the slot first so concurrent callers cannot overrun.
            let prior = self.used.fetch_add(1, Ordering::SeqCst);
            if prior >= budget {
                self.used.fetch_sub(1, Ordering::SeqCst);
                return Err(GatewayError::BudgetExceeded { budget });
            }
        } else {
            self.used.fetch_add(1, Ordering::SeqCst);
        }

        let mut attempt = 0;
        let responses = loop {
            match self.backend.complete(request) {
                Ok(r) => break r,
                Err(GatewayError::Transport(msg)) if attempt < self.max_retries => {
                    attempt += 1;
                    std::thread::sleep(std::time::Duration::from_millis(
                        self.backoff_ms * attempt as u64,
                    ));
                    let _ = msg;
                }
                Err(e) => return Err(e),
            }
        };
        if responses.len() != request.n_samples {
            return Err(GatewayError::WrongSampleCount {
                expected: request.n_samples,
                got: responses.len(),
            });
        }
        Ok(responses)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    struct FixedBackend(Vec<String>);

    impl ChatBackend for FixedBackend {
        fn complete(&self, _request: &ChatRequest) -> Result<Vec<String>, GatewayError> {
            Ok(self.0.clone())
        }
    }

    struct FlakyBackend {
        failures_left: Mutex<usize>,
    }

    impl ChatBackend for FlakyBackend {
        fn complete(&self, request: &ChatRequest) -> Result<Vec<String>, GatewayError> {
            let mut left = self.failures_left.lock().unwrap();
            if *left > 0 {
                *left -= 1;
                return Err(GatewayError::Transport("connection reset".into()));
            }
            Ok(vec!["ok".into(); request.n_samples])
        }
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ChatRequest::new(StageLabel::SqlGen, "SELECT");
        let b = ChatRequest::new(StageLabel::SqlGen, "SELECT");
        assert_eq!(a.request_hash(), b.request_hash());
        let c = ChatRequest::new(StageLabel::SqlGen, "SELECT 2");
        assert_ne!(a.request_hash(), c.request_hash());
        let d = ChatRequest::new(StageLabel::SubAnswer, "SELECT");
        assert_ne!(a.request_hash(), d.request_hash());
        let e = ChatRequest::new(StageLabel::SqlGen, "SELECT").with_sampling(0.7, 1);
        assert_ne!(a.request_hash(), e.request_hash());
        let f = ChatRequest::new(StageLabel::SqlGen, "SELECT").with_sampling(0.0, 5);
        assert_ne!(a.request_hash(), f.request_hash());
    }

    #[test]
    fn stage_names_round_trip_serde() {
        for stage in StageLabel::ALL {
            let json = serde_json::to_string(&stage).unwrap();
            assert_eq!(json, format!("\"{}\"", stage.as_str()));
            let back: StageLabel = serde_json::from_str(&json).unwrap();
            assert_eq!(back, stage);
        }
    }

    #[test]
    fn budget_enforced() {
        let gw = Gateway::new(Box::new(FixedBackend(vec!["x".into()]))).with_budget(2);
        let req = ChatRequest::new(StageLabel::StepBack, "q");
        assert!(gw.complete(&req).is_ok());
        assert!(gw.complete(&req).is_ok());
        match gw.complete(&req) {
            Err(GatewayError::BudgetExceeded { budget: 2 }) => {}
            other => panic!("expected BudgetExceeded, got {other:?}"),
        }
        assert_eq!(gw.calls_used(), 2);
    }

    #[test]
    fn transient_transport_errors_retried() {
        let gw = Gateway::new(Box::new(FlakyBackend { failures_left: Mutex::new(2) }))
            .with_retries(2, 0);
        let req = ChatRequest::new(StageLabel::StepBack, "q");
        assert_eq!(gw.complete(&req).unwrap(), vec!["ok".to_string()]);
    }

    #[test]
    fn persistent_transport_error_surfaces() {
        let gw = Gateway::new(Box::new(FlakyBackend { failures_left: Mutex::new(10) }))
            .with_retries(2, 0);
        let req = ChatRequest::new(StageLabel::StepBack, "q");
        assert!(matches!(gw.complete(&req), Err(GatewayError::Transport(_))));
    }

    #[test]
    fn sample_count_mismatch_rejected() {
        let gw = Gateway::new(Box::new(FixedBackend(vec!["x".into()])));
        let req = ChatRequest::new(StageLabel::JointReason, "q").with_sampling(0.7, 3);
        assert!(matches!(
            gw.complete(&req),
            Err(GatewayError::WrongSampleCount { expected: 3, got: 1 })
        ));
    }
}
