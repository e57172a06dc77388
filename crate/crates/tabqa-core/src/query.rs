//! Query augmentation: a step-back rewrite and a 2-3 way decomposition of
//! the original question, generated against a sampled sub-table, deduped,
//! and bundled for the parallel sub-query pipelines.

use serde::{Deserialize, Serialize};

use crate::gateway::{ChatRequest, Gateway, GatewayError, StageLabel};
use crate::prompts::PromptSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Qa,
    FactVerification,
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "qa" => Ok(TaskKind::Qa),
            "fv" | "fact_verification" | "fact-verification" => Ok(TaskKind::FactVerification),
            other => Err(format!("unknown task kind `{other}` (expected qa or fv)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubQueryKind {
    StepBack,
    Decomposed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubQuery {
    pub text: String,
    pub kind: SubQueryKind,
}

/// Maximum decomposed sub-queries kept from one response.
pub const MAX_DECOMPOSED: usize = 3;
/// One step-back plus the decomposition cap.
pub const MAX_SUB_QUERIES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryBundle {
    pub original: String,
    pub task: TaskKind,
    pub sub_queries: Vec<SubQuery>,
}

#[derive(Debug, Clone, Copy)]
pub struct AugmentFlags {
    pub enable_step_back: bool,
    pub enable_sub_query: bool,
}

/// Dedup key: lowercase, whitespace collapsed, terminal punctuation gone.
pub fn normalize_query(text: &str) -> String {
    let collapsed = text.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.trim_end_matches(['?', '.', '!']).trim_end().to_string()
}

fn strip_outer_quotes(text: &str) -> &str {
    let text = text.trim();
    for (open, close) in [('"', '"'), ('\'', '\''), ('“', '”')] {
        if text.len() >= 2 && text.starts_with(open) && text.ends_with(close) {
            return text[open.len_utf8()..text.len() - close.len_utf8()].trim();
        }
    }
    text
}

fn strip_answer_prefix(line: &str) -> &str {
    let trimmed = line.trim();
    let lowered = trimmed.to_lowercase();
    for prefix in ["new query:", "new query :", "step-back question:", "query:"] {
        if lowered.starts_with(prefix) {
            return trimmed[prefix.len()..].trim_start();
        }
    }
    trimmed
}

/// Extracts the rewritten query from a step-back response. An empty or
/// blank response falls back to the original question.
pub fn parse_step_back(response: &str, original: &str) -> String {
    let line = response.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    let cleaned = strip_outer_quotes(strip_answer_prefix(line));
    if cleaned.is_empty() {
        original.to_string()
    } else {
        cleaned.to_string()
    }
}

/// Strips a leading list marker (`1.`, `2)`, `-`, `*`) and returns the rest,
/// or None when the line has no marker.
fn strip_list_marker(line: &str) -> Option<&str> {
    let line = line.trim_start();
    if let Some(rest) = line.strip_prefix(['-', '*', '•']) {
        return Some(rest.trim_start());
    }
    let digits = line.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(rest) = rest.strip_prefix(['.', ')']) {
            return Some(rest.trim_start());
        }
    }
    None
}

/// Splits inline numbering like `1. first? 2. second?` occurring on a
/// single line. Marker positions must sit at the start or after whitespace.
fn split_inline_numbered(text: &str) -> Vec<String> {
    let bytes = text.as_bytes();
    let mut starts = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let at_boundary = i == 0 || bytes[i - 1].is_ascii_whitespace();
        if at_boundary && bytes[i].is_ascii_digit() {
            let mut j = i;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j < bytes.len()
                && (bytes[j] == b'.' || bytes[j] == b')')
                && j + 1 < bytes.len()
                && bytes[j + 1].is_ascii_whitespace()
            {
                starts.push(i);
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    if starts.len() < 2 {
        return Vec::new();
    }
    let mut parts = Vec::new();
    for (idx, &start) in starts.iter().enumerate() {
        let end = starts.get(idx + 1).copied().unwrap_or(text.len());
        if let Some(item) = strip_list_marker(&text[start..end]) {
            let item = strip_outer_quotes(item);
            if !item.is_empty() {
                parts.push(item.to_string());
            }
        }
    }
    parts
}

/// Extracts decomposed sub-queries from a response. Accepts numbered or
/// bulleted lists (line-based or inline) and bare line-per-query output;
/// anything else parses to an empty list.
pub fn parse_decompose(response: &str) -> Vec<String> {
    let body = strip_answer_prefix(response.trim());

    let mut marked = Vec::new();
    for line in body.lines() {
        if let Some(item) = strip_list_marker(line) {
            let item = strip_outer_quotes(item);
            if !item.is_empty() {
                marked.push(item.to_string());
            }
        }
    }
    if !marked.is_empty() {
        // A single marked line may still carry an inline-numbered list.
        if marked.len() == 1 {
            let mut inline = split_inline_numbered(body);
            if inline.len() > 1 {
                inline.truncate(MAX_DECOMPOSED);
                return inline;
            }
        }
        marked.truncate(MAX_DECOMPOSED);
        return marked;
    }

    let inline = split_inline_numbered(body);
    if !inline.is_empty() {
        let mut inline = inline;
        inline.truncate(MAX_DECOMPOSED);
        return inline;
    }

    let lines: Vec<String> = body
        .lines()
        .map(|l| strip_outer_quotes(strip_answer_prefix(l)).to_string())
        .filter(|l| !l.is_empty())
        .collect();
    if lines.len() >= 2 {
        let mut lines = lines;
        lines.truncate(MAX_DECOMPOSED);
        return lines;
    }
    Vec::new()
}

/// One LLM call rewriting the question into a more generic one.
pub fn step_back(
    original: &str,
    sample_html: &str,
    gateway: &Gateway,
    prompts: &PromptSet,
) -> Result<String, GatewayError> {
    let prompt = prompts.fill_step_back(sample_html, original);
    let responses = gateway.complete(&ChatRequest::new(StageLabel::StepBack, prompt))?;
    Ok(parse_step_back(&responses[0], original))
}

/// One LLM call splitting the question into 2-3 sub-queries.
pub fn decompose(
    original: &str,
    sample_html: &str,
    gateway: &Gateway,
    prompts: &PromptSet,
) -> Result<Vec<String>, GatewayError> {
    let prompt = prompts.fill_sub_query(sample_html, original);
    let responses = gateway.complete(&ChatRequest::new(StageLabel::SubQuery, prompt))?;
    Ok(parse_decompose(&responses[0]))
}

/// Runs the enabled augmenters (concurrently when both are on), then merges
/// with the step-back entry first, dropping duplicates and the original.
pub fn build_bundle(
    original: &str,
    task: TaskKind,
    sample_html: &str,
    gateway: &Gateway,
    prompts: &PromptSet,
    flags: AugmentFlags,
) -> Result<QueryBundle, GatewayError> {
    let (stepped, decomposed) = match (flags.enable_step_back, flags.enable_sub_query) {
        (false, false) => (None, Vec::new()),
        (true, false) => (Some(step_back(original, sample_html, gateway, prompts)?), Vec::new()),
        (false, true) => (None, decompose(original, sample_html, gateway, prompts)?),
        (true, true) => std::thread::scope(|scope| {
            let sb = scope.spawn(|| step_back(original, sample_html, gateway, prompts));
            let dc = scope.spawn(|| decompose(original, sample_html, gateway, prompts));
            let sb = sb.join().expect("step-back thread");
            let dc = dc.join().expect("decompose thread");
            Ok::<_, GatewayError>((Some(sb?), dc?))
        })?,
    };

    let original_key = normalize_query(original);
    let mut seen = std::collections::HashSet::new();
    seen.insert(original_key);
    let mut sub_queries = Vec::new();
    let candidates = stepped
        .into_iter()
        .map(|text| SubQuery { text, kind: SubQueryKind::StepBack })
        .chain(
            decomposed
                .into_iter()
                .map(|text| SubQuery { text, kind: SubQueryKind::Decomposed }),
        );
    for candidate in candidates {
        if seen.insert(normalize_query(&candidate.text)) {
            sub_queries.push(candidate);
        }
    }
    debug_assert!(sub_queries.len() <= MAX_SUB_QUERIES);
    Ok(QueryBundle { original: original.to_string(), task, sub_queries })
}
