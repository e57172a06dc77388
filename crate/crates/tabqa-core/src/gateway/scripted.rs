//! Deterministic in-memory backend for tests and fixture generation.

use std::sync::Mutex;

use super::{ChatBackend, ChatRequest, GatewayError, StageLabel};

/// One scripted response rule. Matches on stage and, optionally, a prompt
/// substring; first matching rule wins.
#[derive(Debug, Clone)]
pub struct ScriptRule {
    pub stage: StageLabel,
    pub prompt_contains: Option<String>,
    pub responses: Vec<String>,
}

impl ScriptRule {
    pub fn new(stage: StageLabel, responses: Vec<String>) -> Self {
        ScriptRule { stage, prompt_contains: None, responses }
    }

    pub fn when_contains(mut self, needle: impl Into<String>) -> Self {
        self.prompt_contains = Some(needle.into());
        self
    }
}

#[derive(Default)]
pub struct ScriptedBackend {
    rules: Vec<ScriptRule>,
    seen: Mutex<Vec<ChatRequest>>,
}

impl ScriptedBackend {
    pub fn new(rules: Vec<ScriptRule>) -> Self {
        ScriptedBackend { rules, seen: Mutex::new(Vec::new()) }
    }

    /// Every request this backend has answered, in call order.
    pub fn requests_seen(&self) -> Vec<ChatRequest> {
        self.seen.lock().expect("scripted backend lock").clone()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<Vec<String>, GatewayError> {
        self.seen.lock().expect("scripted backend lock").push(request.clone());
        let rule = self
            .rules
            .iter()
            .find(|r| {
                r.stage == request.stage
                    && r.prompt_contains
                        .as_deref()
                        .map_or(true, |needle| request.prompt.contains(needle))
            })
            .ok_or_else(|| {
                GatewayError::InvalidResponse(format!(
                    "no scripted rule for stage {} (prompt starts: {:.60})",
                    request.stage, request.prompt
                ))
            })?;
        // A single scripted response stands in for all samples of a request.
        if rule.responses.len() == 1 && request.n_samples > 1 {
            return Ok(vec![rule.responses[0].clone(); request.n_samples]);
        }
        if rule.responses.len() != request.n_samples {
            return Err(GatewayError::WrongSampleCount {
                expected: request.n_samples,
                got: rule.responses.len(),
            });
        }
        Ok(rule.responses.clone())
    }

    fn is_offline(&self) -> bool {
        true
    }
}
