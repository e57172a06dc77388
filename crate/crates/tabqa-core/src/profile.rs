//! Per-table augmentation computed ahead of question answering: a schema
//! type, a semantic description, and a literal-format note for every
//! column, plus summary stats. Deterministic inference always runs; an
//! LLM pass can enrich the text fields on top of it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{ChatRequest, Gateway, GatewayError, StageLabel};
use crate::prompts::PromptSet;
use crate::table::{serialize_html, Column, Table};
use crate::value::Parsed;

pub const CACHE_VERSION: u32 = 1;
/// Rows shown to the LLM in augmentation prompts, independent of table size.
pub const AUGMENT_SAMPLE_ROWS: usize = 5;
pub const LITERAL_SAMPLE_CAP: usize = 64;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("column `{0}` has no non-empty cells")]
    EmptyColumn(String),
    #[error("augmentation keys do not match table columns: {0}")]
    KeyMismatch(String),
    #[error("cache file {path} is not a valid version-{CACHE_VERSION} augmentation: {detail}")]
    SchemaVersion { path: PathBuf, detail: String },
    #[error("cache io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemaType {
    Numerical,
    Char,
    Date,
}

impl SchemaType {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchemaType::Numerical => "Numerical",
            SchemaType::Char => "Char",
            SchemaType::Date => "Date",
        }
    }
}

impl std::fmt::Display for SchemaType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentMode {
    DeterministicOnly,
    LlmEnriched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub distinct_count: usize,
    pub empty_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub numeric_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub numeric_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnAugmentation {
    pub schema_type: SchemaType,
    pub semantic_description: String,
    pub literal_format: String,
    pub stats: ColumnStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableAugmentation {
    pub table_id: String,
    pub global_summary: String,
    pub per_column: BTreeMap<String, ColumnAugmentation>,
}

impl TableAugmentation {
    /// Checks the per_column key set equals the table's sanitized names.
    pub fn validate_against(&self, table: &Table) -> Result<(), ProfileError> {
        let expected: std::collections::BTreeSet<&str> =
            table.columns().iter().map(|c| c.sanitized_name()).collect();
        let got: std::collections::BTreeSet<&str> =
            self.per_column.keys().map(String::as_str).collect();
        if expected != got {
            return Err(ProfileError::KeyMismatch(format!(
                "expected {expected:?}, got {got:?}"
            )));
        }
        Ok(())
    }

    pub fn column(&self, sanitized_name: &str) -> Option<&ColumnAugmentation> {
        self.per_column.get(sanitized_name)
    }

    /// `name: type` lines in table column order, for the filter prompt.
    pub fn schema_block(&self, table: &Table) -> String {
        table
            .columns()
            .iter()
            .filter_map(|c| {
                self.column(c.sanitized_name())
                    .map(|a| format!("- {}: {}", c.raw_name(), a.schema_type))
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// `name: description` lines in table column order.
    pub fn semantic_block(&self, table: &Table) -> String {
        table
            .columns()
            .iter()
            .filter_map(|c| {
                self.column(c.sanitized_name())
                    .map(|a| format!("- {}: {}", c.raw_name(), a.semantic_description))
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Majority-types a column from its non-empty cells: Numerical when at
/// least 80% parse as numbers, else Date when at least 80% parse as dates,
/// else Char.
pub fn infer_schema_type(column: &Column) -> Result<SchemaType, ProfileError> {
    let mut nonempty = 0usize;
    let mut numbers = 0usize;
    let mut dates = 0usize;
    for cell in column.cells() {
        if cell.is_empty() {
            continue;
        }
        nonempty += 1;
        match cell.parsed() {
            Some(Parsed::Number(_)) => numbers += 1,
            Some(Parsed::Date(_)) => dates += 1,
            None => {}
        }
    }
    if nonempty == 0 {
        return Err(ProfileError::EmptyColumn(column.raw_name().to_string()));
    }
    // n*5 >= total*4 is the integer form of n/total >= 0.8.
    if numbers * 5 >= nonempty * 4 {
        Ok(SchemaType::Numerical)
    } else if dates * 5 >= nonempty * 4 {
        Ok(SchemaType::Date)
    } else {
        Ok(SchemaType::Char)
    }
}

fn cell_shape(raw: &str) -> String {
    raw.chars()
        .map(|c| {
            if c.is_alphabetic() {
                'A'
            } else if c.is_ascii_digit() {
                '9'
            } else {
                c
            }
        })
        .collect()
}

/// Summarizes cell shapes over at most `sample_cap` non-empty cells as
/// `shape (pct%), ...` for the three most common shapes. Percentages are
/// integer-rounded over the sampled cells; an empty column yields "empty".
pub fn mine_literal_format(column: &Column, sample_cap: usize) -> String {
    assert!(sample_cap >= 1, "sample_cap must be positive");
    let mut shapes: Vec<(String, usize)> = Vec::new();
    let mut sampled = 0usize;
    for cell in column.cells() {
        if cell.is_empty() {
            continue;
        }
        let shape = cell_shape(cell.raw());
        match shapes.iter_mut().find(|(s, _)| *s == shape) {
            Some((_, n)) => *n += 1,
            None => shapes.push((shape, 1)),
        }
        sampled += 1;
        if sampled == sample_cap {
            break;
        }
    }
    if sampled == 0 {
        return "empty".to_string();
    }
    // Stable: ties keep first-seen order.
    shapes.sort_by(|a, b| b.1.cmp(&a.1));
    shapes
        .iter()
        .take(3)
        .map(|(shape, n)| {
            let pct = (*n as f64 * 100.0 / sampled as f64).round() as u32;
            format!("{shape} ({pct}%)")
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn column_stats(column: &Column, schema: SchemaType) -> ColumnStats {
    let mut distinct = std::collections::HashSet::new();
    let mut empty = 0usize;
    let mut min: Option<f64> = None;
    let mut max: Option<f64> = None;
    for cell in column.cells() {
        distinct.insert(cell.raw());
        if cell.is_empty() {
            empty += 1;
        }
        if schema == SchemaType::Numerical {
            if let Some(Parsed::Number(v)) = cell.parsed() {
                min = Some(min.map_or(v, |m: f64| m.min(v)));
                max = Some(max.map_or(v, |m: f64| m.max(v)));
            }
        }
    }
    ColumnStats { distinct_count: distinct.len(), empty_count: empty, numeric_min: min, numeric_max: max }
}

fn templated_semantic(column: &Column) -> String {
    let mut seen = std::collections::HashSet::new();
    let mut examples = Vec::new();
    for cell in column.cells() {
        if cell.is_empty() {
            continue;
        }
        if seen.insert(cell.raw()) {
            examples.push(cell.raw());
        }
        if examples.len() == 2 {
            break;
        }
    }
    let distinct_nonempty = {
        let mut all = std::collections::HashSet::new();
        column.cells().iter().filter(|c| !c.is_empty()).for_each(|c| {
            all.insert(c.raw());
        });
        all.len()
    };
    format!(
        "column {} contains {} distinct values such as {}",
        column.raw_name(),
        distinct_nonempty,
        examples.join(", ")
    )
}

/// Pure augmentation with no model in the loop. Identical tables produce
/// byte-identical serialized augmentations.
pub fn augment_table_deterministic(table: &Table) -> Result<TableAugmentation, ProfileError> {
    let mut per_column = BTreeMap::new();
    for column in table.columns() {
        let schema_type = infer_schema_type(column)?;
        per_column.insert(
            column.sanitized_name().to_string(),
            ColumnAugmentation {
                schema_type,
                semantic_description: templated_semantic(column),
                literal_format: mine_literal_format(column, LITERAL_SAMPLE_CAP),
                stats: column_stats(column, schema_type),
            },
        );
    }
    let names: Vec<&str> = table.columns().iter().map(|c| c.raw_name()).collect();
    let aug = TableAugmentation {
        table_id: table.id().to_string(),
        global_summary: format!(
            "table {} has {} rows and {} columns: {}",
            table.id(),
            table.row_count(),
            table.column_count(),
            names.join(", ")
        ),
        per_column,
    };
    aug.validate_against(table)?;
    Ok(aug)
}

/// Splits an LLM response into `column: text` assignments keyed by
/// sanitized name, plus the lines that name no column.
fn parse_column_lines(response: &str, table: &Table) -> (BTreeMap<String, String>, Vec<String>) {
    let mut assigned = BTreeMap::new();
    let mut leftover = Vec::new();
    for line in response.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let stripped = line
            .trim_start_matches(['-', '*', '•'])
            .trim_start_matches(|c: char| c.is_ascii_digit())
            .trim_start_matches(['.', ')'])
            .trim();
        if let Some((name_part, text)) = stripped.split_once(':') {
            let name = name_part.trim().trim_matches(['`', '"', '\'']);
            if let Some(col) = table.find_column(name) {
                let text = text.trim();
                if !text.is_empty() {
                    assigned.insert(col.sanitized_name().to_string(), text.to_string());
                    continue;
                }
            }
        }
        leftover.push(line.to_string());
    }
    (assigned, leftover)
}

fn augmentation_sample_html(table: &Table) -> String {
    let rows: Vec<usize> = (0..table.row_count().min(AUGMENT_SAMPLE_ROWS)).collect();
    let cols: Vec<String> =
        table.columns().iter().map(|c| c.sanitized_name().to_string()).collect();
    let view = table.view(&rows, &cols).expect("in-range sample view");
    serialize_html(&view)
}

/// Full augmentation entry point. Deterministic mode never touches the
/// gateway; enriched mode issues the schema, semantic, and literal prompts
/// and merges their output, keeping deterministic schema types authoritative.
pub fn augment_table(
    table: &Table,
    gateway: &Gateway,
    prompts: &PromptSet,
    mode: AugmentMode,
) -> Result<TableAugmentation, ProfileError> {
    let mut aug = augment_table_deterministic(table)?;
    if mode == AugmentMode::DeterministicOnly {
        return Ok(aug);
    }

    let sample_html = augmentation_sample_html(table);
    let schema_prompt = prompts.fill_schema_aug(&sample_html);
    let semantic_prompt = prompts.fill_semantic_aug(&sample_html);
    let literal_prompt = prompts.fill_literal_aug(&sample_html);

    // Schema response is requested for trace fidelity, but deterministic
    // inference always wins, so its content is not merged.
    gateway.complete(&ChatRequest::new(StageLabel::SchemaAug, schema_prompt))?;

    let semantic = gateway
        .complete(&ChatRequest::new(StageLabel::SemanticAug, semantic_prompt))?
        .remove(0);
    let (per_col, leftover) = parse_column_lines(&semantic, table);
    for (name, text) in per_col {
        if let Some(entry) = aug.per_column.get_mut(&name) {
            entry.semantic_description = text;
        }
    }
    let summary = leftover.join(" ").trim().to_string();
    if !summary.is_empty() {
        aug.global_summary = summary;
    }

    let literal = gateway
        .complete(&ChatRequest::new(StageLabel::LiteralAug, literal_prompt))?
        .remove(0);
    let (per_col, _) = parse_column_lines(&literal, table);
    for (name, text) in per_col {
        if let Some(entry) = aug.per_column.get_mut(&name) {
            entry.literal_format = text;
        }
    }

    aug.validate_against(table)?;
    Ok(aug)
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    version: u32,
    augmentation: TableAugmentation,
}

fn file_safe_id(table_id: &str) -> String {
    let mut out: String = table_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .collect();
    if out.is_empty() {
        out.push('_');
    }
    out
}

pub fn cache_path(cache_dir: &Path, table_id: &str) -> PathBuf {
    cache_dir.join(format!("{}.aug.json", file_safe_id(table_id)))
}

/// Persists an augmentation atomically (temp file then rename).
pub fn store_augmentation(
    aug: &TableAugmentation,
    cache_dir: &Path,
) -> Result<PathBuf, ProfileError> {
    std::fs::create_dir_all(cache_dir)?;
    let path = cache_path(cache_dir, &aug.table_id);
    let body = serde_json::to_string_pretty(&CacheFile {
        version: CACHE_VERSION,
        augmentation: aug.clone(),
    })
    .expect("augmentation serializes");
    let tmp = path.with_extension(format!(
        "tmp.{}.{}",
        std::process::id(),
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.subsec_nanos())
    ));
    std::fs::write(&tmp, body)?;
    std::fs::rename(&tmp, &path)?;
    Ok(path)
}

/// Loads a cached augmentation. Missing ids are absent, not errors; files
/// that exist but do not parse at the current version are errors.
pub fn load_augmentation(
    table_id: &str,
    cache_dir: &Path,
) -> Result<Option<TableAugmentation>, ProfileError> {
    let path = cache_path(cache_dir, table_id);
    let body = match std::fs::read_to_string(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let parsed: CacheFile = serde_json::from_str(&body).map_err(|e| {
        ProfileError::SchemaVersion { path: path.clone(), detail: e.to_string() }
    })?;
    if parsed.version != CACHE_VERSION {
        return Err(ProfileError::SchemaVersion {
            path,
            detail: format!("found version {}", parsed.version),
        });
    }
    Ok(Some(parsed.augmentation))
}
