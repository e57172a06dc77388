//! Sub-table narrowing: embedding-similarity row sampling and LLM column
//! filtering. The view these produce is the only table content later
//! prompts are allowed to embed.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::gateway::embed::{cosine_similarity, EmbedError, Embedder};
use crate::gateway::{ChatRequest, Gateway, GatewayError, StageLabel};
use crate::profile::{ProfileError, TableAugmentation};
use crate::prompts::PromptSet;
use crate::table::{serialize_html, serialize_row_text, SubTableView, Table, TableError};

#[derive(Debug, Error)]
pub enum RetrieveError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Augmentation(#[from] ProfileError),
    #[error(transparent)]
    Table(#[from] TableError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    pub k: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { k: 3 }
    }
}

/// Ranking key: higher similarity wins, ties prefer the smaller row index.
#[derive(Debug, Clone, Copy, PartialEq)]
struct RankKey {
    similarity: f64,
    index: usize,
}

impl Eq for RankKey {}

impl Ord for RankKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.similarity
            .total_cmp(&other.similarity)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for RankKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Top-k rows by cosine similarity between the query embedding and each
/// row's flat text, returned in descending-similarity order (ascending row
/// index on ties). k=0 yields an empty sample.
pub fn sample_rows(
    table: &Table,
    query: &str,
    config: SamplerConfig,
    embedder: &dyn Embedder,
) -> Result<Vec<usize>, RetrieveError> {
    if config.k == 0 || table.row_count() == 0 {
        return Ok(Vec::new());
    }
    let query_vec = embedder.embed(query)?;
    // Min-heap of the best k seen so far; the root is the worst kept key.
    let mut heap: BinaryHeap<std::cmp::Reverse<RankKey>> = BinaryHeap::new();
    for index in 0..table.row_count() {
        let text = serialize_row_text(table, index)?;
        let row_vec = embedder.embed(&text)?;
        let key = RankKey { similarity: cosine_similarity(&query_vec, &row_vec), index };
        if heap.len() < config.k {
            heap.push(std::cmp::Reverse(key));
        } else if key > heap.peek().expect("nonempty heap").0 {
            heap.pop();
            heap.push(std::cmp::Reverse(key));
        }
    }
    let mut kept: Vec<RankKey> = heap.into_iter().map(|r| r.0).collect();
    kept.sort_by(|a, b| b.cmp(a));
    Ok(kept.into_iter().map(|k| k.index).collect())
}

/// Splits a column-list response into candidate names. Accepts one name
/// per line or comma-separated lists, with optional list markers/quotes.
pub fn parse_column_list(response: &str) -> Vec<String> {
    response
        .lines()
        .flat_map(|line| line.split(','))
        .map(|part| {
            part.trim()
                .trim_start_matches(['-', '*', '•'])
                .trim_start_matches(|c: char| c.is_ascii_digit())
                .trim_start_matches(['.', ')'])
                .trim()
                .trim_matches(['`', '"', '\''])
                .trim()
                .to_string()
        })
        .filter(|s| !s.is_empty())
        .collect()
}

/// Asks the LLM which columns matter for the query, validating each name
/// against the table. Unknown names drop out; when nothing valid survives,
/// every column is kept so downstream stages always have a table to show.
pub fn filter_columns(
    table: &Table,
    query: &str,
    aug: &TableAugmentation,
    sampled: &[usize],
    gateway: &Gateway,
    prompts: &PromptSet,
) -> Result<Vec<String>, RetrieveError> {
    aug.validate_against(table)?;
    let all_columns: Vec<String> =
        table.columns().iter().map(|c| c.sanitized_name().to_string()).collect();
    let sample_view = table.view(sampled, &all_columns)?;
    let prompt = prompts.fill_col_filter(
        &aug.schema_block(table),
        &aug.semantic_block(table),
        &serialize_html(&sample_view),
        query,
    );
    let responses = gateway.complete(&ChatRequest::new(StageLabel::ColFilter, prompt))?;
    Ok(resolve_columns(table, &responses[0]))
}

/// Validation half of [`filter_columns`], exposed for prompt-free tests:
/// maps response names onto sanitized columns in table order.
pub fn resolve_columns(table: &Table, response: &str) -> Vec<String> {
    let mut selected = std::collections::HashSet::new();
    for name in parse_column_list(response) {
        if let Some(col) = table.find_column(&name) {
            selected.insert(col.sanitized_name().to_string());
        }
    }
    if selected.is_empty() {
        return table.columns().iter().map(|c| c.sanitized_name().to_string()).collect();
    }
    table
        .columns()
        .iter()
        .map(|c| c.sanitized_name().to_string())
        .filter(|name| selected.contains(name))
        .collect()
}

/// Constructs the narrowed view; column order always follows the table.
pub fn make_view<'a>(
    table: &'a Table,
    rows: &[usize],
    cols: &[String],
) -> Result<SubTableView<'a>, TableError> {
    table.view(rows, cols)
}
