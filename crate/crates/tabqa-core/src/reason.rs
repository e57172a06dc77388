//! Reasoning over execution results: per-sub-query answers, the joint
//! chain-of-thought pass with self-consistency voting, and answer
//! normalization for denotation-style comparison.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{ChatRequest, Gateway, GatewayError, StageLabel};
use crate::prompts::PromptSet;
use crate::query::{SubQuery, SubQueryKind, TaskKind};
use crate::sql::ExecutionResult;
use crate::value::canonical_numeric;

/// Sentinel a sub-answer must equal, verbatim, to be treated as unusable.
pub const IRRELEVANT: &str = "IRRELEVANT";

/// Sampling temperature for the joint pass when self-consistency is on.
pub const SC_TEMPERATURE: f64 = 0.7;

pub const DEFAULT_SC_N: usize = 5;

/// Marker line prefix the joint prompt asks the model to emit.
pub const ANSWER_MARKER: &str = "Answer:";

#[derive(Debug, Error)]
pub enum ReasonError {
    #[error("no sample contained the `Answer:` marker")]
    AnswerExtraction,
    #[error("fact-verification answer {0:?} maps to neither true nor false")]
    UnmappableVerdict(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubAnswer {
    pub sub_query: String,
    pub kind: SubQueryKind,
    pub text: String,
    pub irrelevant: bool,
}

impl SubAnswer {
    pub fn new(sub_query: impl Into<String>, kind: SubQueryKind, text: impl Into<String>) -> Self {
        let text = text.into();
        let irrelevant = text == IRRELEVANT;
        SubAnswer { sub_query: sub_query.into(), kind, text, irrelevant }
    }

    /// The placeholder produced when a sub-query pipeline errors out:
    /// the run continues without it instead of aborting.
    pub fn unusable(sub_query: impl Into<String>, kind: SubQueryKind) -> Self {
        SubAnswer::new(sub_query, kind, IRRELEVANT)
    }
}

/// Normalized comparison form of an answer. QA answers are lists (multi
/// answers separated by `|` in the raw text); fact verification is a
/// boolean verdict.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Normalized {
    Qa(Vec<String>),
    Fv(bool),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub raw: String,
    pub normalized: Normalized,
}

/// Answers one sub-query from its execution result table. The prompt
/// instructs the model to output the IRRELEVANT sentinel when the result
/// cannot help with the original query.
pub fn answer_subquery(
    result: &ExecutionResult,
    sub_query: &SubQuery,
    original: &str,
    gateway: &Gateway,
    prompts: &PromptSet,
) -> Result<SubAnswer, ReasonError> {
    let html = result.result.as_ref().map(|r| r.to_html()).unwrap_or_default();
    let prompt = prompts.fill_sub_answer(&html, &sub_query.text, original);
    let responses = gateway.complete(&ChatRequest::new(StageLabel::SubAnswer, prompt))?;
    let text = responses.first().map(|s| s.trim().to_string()).unwrap_or_default();
    Ok(SubAnswer::new(sub_query.text.clone(), sub_query.kind, text))
}

/// Renders the non-irrelevant sub-answers for the joint prompt. Irrelevant
/// entries are dropped entirely, text included.
pub fn sub_answers_block(subs: &[SubAnswer]) -> String {
    let useful: Vec<&SubAnswer> = subs.iter().filter(|s| !s.irrelevant).collect();
    if useful.is_empty() {
        return "(none)".to_string();
    }
    useful
        .iter()
        .map(|s| format!("Sub-query: {}\nSub-answer: {}", s.sub_query, s.text))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Pulls the text after the last `Answer:` marker, up to end of line.
pub fn extract_answer_line(sample: &str) -> Option<String> {
    let idx = sample.rfind(ANSWER_MARKER)?;
    let rest = &sample[idx + ANSWER_MARKER.len()..];
    let line = rest.lines().next().unwrap_or("");
    Some(line.trim().to_string())
}

/// Majority vote over normalized answers; ties go to the earliest-sampled
/// member of the tied set. Returns the winning index.
pub fn majority_vote(votes: &[Normalized]) -> Option<usize> {
    if votes.is_empty() {
        return None;
    }
    let mut best: Option<(usize, usize)> = None; // (first index, count)
    for (i, v) in votes.iter().enumerate() {
        if votes[..i].contains(v) {
            continue; // counted when first seen
        }
        let count = votes.iter().filter(|w| *w == v).count();
        match best {
            Some((_, best_count)) if best_count >= count => {}
            _ => best = Some((i, count)),
        }
    }
    best.map(|(i, _)| i)
}

/// Joint chain-of-thought reasoning with self-consistency. Requests sc_n
/// samples (temperature 0.7 when sc_n > 1, greedy otherwise), extracts the
/// answer line from each, and majority-votes the normalized answers.
pub fn joint_reason(
    primary: &ExecutionResult,
    subs: &[SubAnswer],
    original: &str,
    task: TaskKind,
    gateway: &Gateway,
    prompts: &PromptSet,
    sc_n: usize,
) -> Result<Answer, ReasonError> {
    let sc_n = sc_n.max(1);
    let html = primary.result.as_ref().map(|r| r.to_html()).unwrap_or_default();
    let block = sub_answers_block(subs);
    let prompt = prompts.fill_joint(task, &html, &block, original);

    let temperature = if sc_n > 1 { SC_TEMPERATURE } else { 0.0 };
    let request =
        ChatRequest::new(StageLabel::JointReason, prompt).with_sampling(temperature, sc_n);
    let samples = gateway.complete(&request)?;

    let raws: Vec<String> = samples.iter().filter_map(|s| extract_answer_line(s)).collect();
    if raws.is_empty() {
        return Err(ReasonError::AnswerExtraction);
    }

    // Samples that fail normalization (unmappable verdicts) lose their
    // vote; if every sample is unmappable the error surfaces.
    let mut votes: Vec<(String, Normalized)> = Vec::with_capacity(raws.len());
    let mut last_err = None;
    for raw in raws {
        match normalize_answer(&raw, task) {
            Ok(n) => votes.push((raw, n)),
            Err(e) => last_err = Some(e),
        }
    }
    if votes.is_empty() {
        return Err(last_err.unwrap_or(ReasonError::AnswerExtraction));
    }

    let normalized: Vec<Normalized> = votes.iter().map(|(_, n)| n.clone()).collect();
    let winner = majority_vote(&normalized).expect("votes nonempty");
    let (raw, normalized) = votes.swap_remove(winner);
    Ok(Answer { raw, normalized })
}

fn strip_outer_quotes(s: &str) -> &str {
    let pairs = [('"', '"'), ('\'', '\''), ('\u{201c}', '\u{201d}')];
    let mut t = s;
    loop {
        let mut stripped = false;
        for (open, close) in pairs {
            if t.len() >= 2 && t.starts_with(open) && t.ends_with(close) {
                t = &t[open.len_utf8()..t.len() - close.len_utf8()];
                t = t.trim();
                stripped = true;
            }
        }
        if !stripped {
            return t;
        }
    }
}

pub fn normalize_qa_item(item: &str) -> String {
    let trimmed = strip_outer_quotes(item.trim()).to_lowercase();
    // Currency and percent marks come off before the numeric check, so
    // "$2,000.0" and "15%" both canonicalize to bare numbers.
    let mut bare = trimmed.as_str();
    bare = bare.strip_prefix('$').unwrap_or(bare);
    bare = bare.strip_suffix('%').unwrap_or(bare);
    if let Some(canonical) = canonical_numeric(bare.trim()) {
        return canonical;
    }
    trimmed
}

/// Normalizes a raw answer for comparison. QA: `|`-separated list, each item
/// lowercased, unquoted, numbers canonicalized ("2,000.0" becomes "2000").
/// FactVerification: maps yes/true/supported/1 and no/false/refuted/0.
pub fn normalize_answer(raw: &str, task: TaskKind) -> Result<Normalized, ReasonError> {
    match task {
        TaskKind::Qa => {
            let items: Vec<String> = raw.split('|').map(normalize_qa_item).collect();
            Ok(Normalized::Qa(items))
        }
        TaskKind::FactVerification => {
            let cleaned = strip_outer_quotes(raw.trim())
                .trim_end_matches('.')
                .trim()
                .to_lowercase();
            match cleaned.as_str() {
                "yes" | "true" | "supported" | "1" => Ok(Normalized::Fv(true)),
                "no" | "false" | "refuted" | "0" => Ok(Normalized::Fv(false)),
                _ => Err(ReasonError::UnmappableVerdict(raw.to_string())),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::scripted::{ScriptRule, ScriptedBackend};
    use crate::sql::ResultTable;

    fn exec_result(headers: &[&str], rows: &[&[&str]]) -> ExecutionResult {
        let table = ResultTable {
            headers: headers.iter().map(|s| s.to_string()).collect(),
            rows: rows
                .iter()
                .map(|r| r.iter().map(|s| s.to_string()).collect())
                .collect(),
        };
        ExecutionResult {
            final_sql: "SELECT 1".to_string(),
            result: Some(table),
            attempts: Vec::new(),
        }
    }

    fn gateway(rules: Vec<ScriptRule>) -> Gateway {
        Gateway::new(Box::new(ScriptedBackend::new(rules)))
    }

    #[test]
    fn sub_answer_sentinel_mapping() {
        let result = exec_result(&["Team"], &[]);
        let sq = SubQuery { text: "who won?".into(), kind: SubQueryKind::Decomposed };
        let gw = gateway(vec![ScriptRule::new(
            StageLabel::SubAnswer,
            vec!["IRRELEVANT".to_string()],
        )]);
        let prompts = PromptSet::bundled();
        let sub = answer_subquery(&result, &sq, "original?", &gw, &prompts).unwrap();
        assert!(sub.irrelevant);
        assert_eq!(sub.text, "IRRELEVANT");

        let gw = gateway(vec![ScriptRule::new(
            StageLabel::SubAnswer,
            vec!["  2000-07-01  ".to_string()],
        )]);
        let sub = answer_subquery(&result, &sq, "original?", &gw, &prompts).unwrap();
        assert!(!sub.irrelevant);
        assert_eq!(sub.text, "2000-07-01");
    }

    #[test]
    fn unusable_constructor_is_irrelevant() {
        let sub = SubAnswer::unusable("q", SubQueryKind::StepBack);
        assert!(sub.irrelevant);
        assert_eq!(sub.text, IRRELEVANT);
    }

    #[test]
    fn irrelevant_answers_absent_from_block() {
        let subs = vec![
            SubAnswer::new("q1", SubQueryKind::StepBack, "useful fact"),
            SubAnswer::new("q2", SubQueryKind::Decomposed, IRRELEVANT),
        ];
        let block = sub_answers_block(&subs);
        assert!(block.contains("useful fact"));
        assert!(!block.contains("q2"));
        assert!(!block.contains(IRRELEVANT));

        let all_irrelevant = vec![SubAnswer::new("q", SubQueryKind::StepBack, IRRELEVANT)];
        assert_eq!(sub_answers_block(&all_irrelevant), "(none)");
    }

    #[test]
    fn extraction_takes_last_marker_line() {
        let sample = "The table shows X.\nAnswer: draft\nWait, refining.\nAnswer: 15 points";
        assert_eq!(extract_answer_line(sample).unwrap(), "15 points");
        assert_eq!(extract_answer_line("no marker here"), None);
        assert_eq!(extract_answer_line("Answer:").unwrap(), "");
    }

    #[test]
    fn majority_and_tie_break() {
        let a = Normalized::Qa(vec!["a".into()]);
        let b = Normalized::Qa(vec!["b".into()]);
        let c = Normalized::Qa(vec!["c".into()]);
        // [A, A, B, A, C] -> A
        let votes = vec![a.clone(), a.clone(), b.clone(), a.clone(), c.clone()];
        assert_eq!(majority_vote(&votes), Some(0));
        // [A, A, B, B] with A first -> A
        let votes = vec![a.clone(), a.clone(), b.clone(), b.clone()];
        assert_eq!(majority_vote(&votes), Some(0));
        // [B, A, A, B] -> B (first seen among tied)
        let votes = vec![b.clone(), a.clone(), a.clone(), b.clone()];
        assert_eq!(majority_vote(&votes), Some(0));
        assert_eq!(majority_vote(&[]), None);
    }

    #[test]
    fn strict_majority_survives_permutation() {
        let a = Normalized::Qa(vec!["a".into()]);
        let b = Normalized::Qa(vec!["b".into()]);
        let base = vec![a.clone(), a.clone(), a.clone(), b.clone(), b.clone()];
        // All rotations keep the same winner because A holds a strict majority.
        for shift in 0..base.len() {
            let mut rotated = base.clone();
            rotated.rotate_left(shift);
            let winner = majority_vote(&rotated).unwrap();
            assert_eq!(rotated[winner], a);
        }
    }

    #[test]
    fn joint_reason_votes_on_normalized_answers() {
        let primary = exec_result(&["Points"], &[&["15"]]);
        // "15.0" and "15" pool into one normalized vote that beats "14".
        let gw = gateway(vec![ScriptRule::new(
            StageLabel::JointReason,
            vec![
                "thinking...\nAnswer: 15.0".to_string(),
                "other path\nAnswer: 14".to_string(),
                "Answer: 15".to_string(),
            ],
        )]);
        let prompts = PromptSet::bundled();
        let answer =
            joint_reason(&primary, &[], "how many points?", TaskKind::Qa, &gw, &prompts, 3)
                .unwrap();
        assert_eq!(answer.normalized, Normalized::Qa(vec!["15".into()]));
        assert_eq!(answer.raw, "15.0");
    }

    #[test]
    fn joint_reason_single_sample() {
        let primary = exec_result(&["Team"], &[&["Eagles"]]);
        let gw = gateway(vec![ScriptRule::new(
            StageLabel::JointReason,
            vec!["Reasoning.\nAnswer: Eagles".to_string()],
        )]);
        let prompts = PromptSet::bundled();
        let answer =
            joint_reason(&primary, &[], "who won?", TaskKind::Qa, &gw, &prompts, 1).unwrap();
        assert_eq!(answer.raw, "Eagles");
        assert_eq!(answer.normalized, Normalized::Qa(vec!["eagles".into()]));
    }

    #[test]
    fn joint_reason_missing_marker_errors() {
        let primary = exec_result(&["x"], &[]);
        let gw = gateway(vec![ScriptRule::new(
            StageLabel::JointReason,
            vec!["no final line at all".to_string()],
        )]);
        let prompts = PromptSet::bundled();
        let err = joint_reason(&primary, &[], "q", TaskKind::Qa, &gw, &prompts, 1).unwrap_err();
        assert!(matches!(err, ReasonError::AnswerExtraction));
    }

    #[test]
    fn joint_prompt_excludes_irrelevant_subs() {
        let primary = exec_result(&["x"], &[&["1"]]);
        let subs = vec![
            SubAnswer::new("useful sub", SubQueryKind::Decomposed, "42"),
            SubAnswer::new("dead-end sub", SubQueryKind::StepBack, IRRELEVANT),
        ];
        let backend = ScriptedBackend::new(vec![ScriptRule::new(
            StageLabel::JointReason,
            vec!["Answer: 1".to_string()],
        )]);
        let gw = Gateway::new(Box::new(backend));
        let prompts = PromptSet::bundled();
        joint_reason(&primary, &subs, "q", TaskKind::Qa, &gw, &prompts, 1).unwrap();
        // Inspect what the gateway actually sent.
        let block = sub_answers_block(&subs);
        assert!(block.contains("useful sub"));
        assert!(!block.contains("dead-end sub"));
        let rendered = prompts.fill_joint(TaskKind::Qa, "", &block, "q");
        assert!(!rendered.contains("dead-end sub"));
        assert!(!rendered.contains(IRRELEVANT));
    }

    #[test]
    fn fv_task_maps_verdicts() {
        let primary = exec_result(&["x"], &[&["1"]]);
        let gw = gateway(vec![ScriptRule::new(
            StageLabel::JointReason,
            vec!["Checking.\nAnswer: true".to_string()],
        )]);
        let prompts = PromptSet::bundled();
        let answer = joint_reason(
            &primary,
            &[],
            "the claim",
            TaskKind::FactVerification,
            &gw,
            &prompts,
            1,
        )
        .unwrap();
        assert_eq!(answer.normalized, Normalized::Fv(true));
    }

    #[test]
    fn normalize_qa_rules() {
        let n = |raw: &str| normalize_answer(raw, TaskKind::Qa).unwrap();
        assert_eq!(n("Jaguar XJS"), Normalized::Qa(vec!["jaguar xjs".into()]));
        assert_eq!(n("\"Quoted\""), Normalized::Qa(vec!["quoted".into()]));
        assert_eq!(n("2,000"), Normalized::Qa(vec!["2000".into()]));
        assert_eq!(n("2,000.0"), Normalized::Qa(vec!["2000".into()]));
        assert_eq!(n("15.0"), Normalized::Qa(vec!["15".into()]));
        assert_eq!(n("$5"), Normalized::Qa(vec!["5".into()]));
        assert_eq!(n("15%"), Normalized::Qa(vec!["15".into()]));
        assert_eq!(n("a | B |3.50"), Normalized::Qa(vec!["a".into(), "b".into(), "3.5".into()]));
    }

    #[test]
    fn normalize_fv_rules() {
        let n = |raw: &str| normalize_answer(raw, TaskKind::FactVerification);
        assert_eq!(n("TRUE").unwrap(), Normalized::Fv(true));
        assert_eq!(n("yes").unwrap(), Normalized::Fv(true));
        assert_eq!(n("Supported.").unwrap(), Normalized::Fv(true));
        assert_eq!(n("1").unwrap(), Normalized::Fv(true));
        assert_eq!(n("REFUTED").unwrap(), Normalized::Fv(false));
        assert_eq!(n("false").unwrap(), Normalized::Fv(false));
        assert_eq!(n("0").unwrap(), Normalized::Fv(false));
        assert!(matches!(n("maybe"), Err(ReasonError::UnmappableVerdict(_))));
    }

    #[test]
    fn normalize_is_idempotent() {
        for raw in ["Jaguar XJS", "2,000.0", "$5", "a | b | 15%", "\"x\""] {
            let Normalized::Qa(once) = normalize_answer(raw, TaskKind::Qa).unwrap() else {
                unreachable!()
            };
            let rejoined = once.join("|");
            let Normalized::Qa(twice) = normalize_answer(&rejoined, TaskKind::Qa).unwrap() else {
                unreachable!()
            };
            assert_eq!(once, twice, "{raw}");
        }
    }
}
