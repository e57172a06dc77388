//! Benchmark harness: dataset loading, table-size partitioning, noise-row
//! perturbation, pipeline evaluation over a manifest, and report emission.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::embed::Embedder;
use crate::gateway::Gateway;
use crate::pipeline::{answer_question, PipelineConfig};
use crate::profile::{
    augment_table, infer_schema_type, load_augmentation, AugmentMode, ProfileError, SchemaType,
    TableAugmentation,
};
use crate::prompts::PromptSet;
use crate::query::TaskKind;
use crate::reason::{normalize_qa_item, Answer, Normalized};
use crate::table::{load_table, serialize_html, Table, TableError, TableFormat};
use crate::token::count_tokens;
use crate::value::{decimal_places, Parsed};

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Every offending manifest line, collected before giving up.
    #[error("manifest rejected:\n{0}")]
    Manifest(String),
    #[error("table {table_id}: column {column} cannot be profiled")]
    Unprofiled { table_id: String, column: String },
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("report serialization: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// The expected answer: a denotation list for QA, a boolean for fact
/// verification. The task kind follows from which one the manifest carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gold {
    Answers(Vec<String>),
    Label(bool),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchExample {
    pub table_id: String,
    pub question: String,
    pub gold: Gold,
    pub task: TaskKind,
}

/// Examples in manifest order plus every table they reference, loaded and
/// validated up front so evaluation never hits a missing file.
#[derive(Debug)]
pub struct Dataset {
    pub examples: Vec<BenchExample>,
    pub tables: BTreeMap<String, Table>,
}

#[derive(Deserialize)]
struct ManifestLine {
    table_id: String,
    question: String,
    #[serde(default)]
    answers: Option<Vec<String>>,
    #[serde(default)]
    label: Option<serde_json::Value>,
}

fn parse_label(value: &serde_json::Value) -> Option<bool> {
    match value {
        serde_json::Value::Bool(b) => Some(*b),
        serde_json::Value::Number(n) => match n.as_i64() {
            Some(0) => Some(false),
            Some(1) => Some(true),
            _ => None,
        },
        _ => None,
    }
}

/// Reads a JSONL manifest and loads one CSV per referenced table from
/// `tables_dir`. All bad lines are reported together, never silently
/// dropped.
pub fn load_dataset(manifest: &Path, tables_dir: &Path) -> Result<Dataset, HarnessError> {
    let body = std::fs::read_to_string(manifest)?;
    let mut examples = Vec::new();
    let mut tables: BTreeMap<String, Table> = BTreeMap::new();
    let mut problems: Vec<String> = Vec::new();

    for (idx, line) in body.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ManifestLine = match serde_json::from_str(line) {
            Ok(p) => p,
            Err(e) => {
                problems.push(format!("line {line_no}: invalid JSON ({e})"));
                continue;
            }
        };
        let (gold, task) = match (&parsed.answers, &parsed.label) {
            (Some(_), Some(_)) => {
                problems.push(format!("line {line_no}: has both answers and label"));
                continue;
            }
            (Some(answers), None) => {
                if answers.is_empty() {
                    problems.push(format!("line {line_no}: answers list is empty"));
                    continue;
                }
                (Gold::Answers(answers.clone()), TaskKind::Qa)
            }
            (None, Some(value)) => match parse_label(value) {
                Some(b) => (Gold::Label(b), TaskKind::FactVerification),
                None => {
                    problems.push(format!(
                        "line {line_no}: label must be a boolean or 0/1, got {value}"
                    ));
                    continue;
                }
            },
            (None, None) => {
                problems.push(format!("line {line_no}: needs answers or label"));
                continue;
            }
        };
        if !tables.contains_key(&parsed.table_id) {
            let path = tables_dir.join(format!("{}.csv", parsed.table_id));
            match File::open(&path) {
                Ok(file) => match load_table(parsed.table_id.clone(), file, TableFormat::Csv) {
                    Ok(table) => {
                        tables.insert(parsed.table_id.clone(), table);
                    }
                    Err(e) => {
                        problems.push(format!(
                            "line {line_no}: table `{}` failed to load ({e})",
                            parsed.table_id
                        ));
                        continue;
                    }
                },
                Err(_) => {
                    problems.push(format!(
                        "line {line_no}: table `{}` not found at {}",
                        parsed.table_id,
                        path.display()
                    ));
                    continue;
                }
            }
        }
        examples.push(BenchExample {
            table_id: parsed.table_id,
            question: parsed.question,
            gold,
            task,
        });
    }

    if !problems.is_empty() {
        return Err(HarnessError::Manifest(problems.join("\n")));
    }
    Ok(Dataset { examples, tables })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TokenBin {
    Small,
    Medium,
    Large,
}

impl fmt::Display for TokenBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TokenBin::Small => "Small",
            TokenBin::Medium => "Medium",
            TokenBin::Large => "Large",
        })
    }
}

/// Small < 2000 <= Medium <= 4000 < Large.
pub fn token_bin(tokens: usize) -> TokenBin {
    if tokens < 2000 {
        TokenBin::Small
    } else if tokens <= 4000 {
        TokenBin::Medium
    } else {
        TokenBin::Large
    }
}

pub fn full_table_tokens(table: &Table) -> usize {
    count_tokens(&serialize_html(&table.full_view()))
}

pub fn partition_by_tokens(table: &Table) -> TokenBin {
    token_bin(full_table_tokens(table))
}

/// Lower-inclusive bins over the cell count.
pub fn cell_bin(cells: usize) -> &'static str {
    match cells {
        0..=99 => "<100",
        100..=199 => "100-200",
        200..=299 => "200-300",
        300..=399 => "300-400",
        400..=499 => "400-500",
        _ => "500+",
    }
}

pub fn partition_by_cells(table: &Table) -> &'static str {
    cell_bin(table.cell_count())
}

/// Base noise-row count from the cell count, before the factor multiplier.
pub fn base_rows_for_cells(cells: usize) -> usize {
    if cells <= 150 {
        1
    } else if cells <= 300 {
        2
    } else if cells <= 450 {
        4
    } else {
        8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationPlan {
    pub base_rows_to_add: usize,
    pub factor: usize,
    pub seed: u64,
}

impl PerturbationPlan {
    pub fn for_table(table: &Table, factor: usize, seed: u64) -> Self {
        PerturbationPlan {
            base_rows_to_add: base_rows_for_cells(table.cell_count()),
            factor,
            seed,
        }
    }

    pub fn rows_to_add(&self) -> usize {
        self.base_rows_to_add * self.factor
    }
}

enum ColumnNoise {
    Numerical { min: f64, max: f64, precision: usize },
    Date { min: NaiveDate, span_days: u64 },
    Char { distinct: Vec<String> },
}

impl ColumnNoise {
    fn for_column(column: &crate::table::Column) -> Result<Self, ProfileError> {
        let schema_type = infer_schema_type(column)?;
        Ok(match schema_type {
            SchemaType::Numerical => {
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                let mut place_counts: BTreeMap<usize, usize> = BTreeMap::new();
                for cell in column.cells() {
                    if let Some(Parsed::Number(n)) = cell.parsed() {
                        min = min.min(n);
                        max = max.max(n);
                        if let Some(places) = decimal_places(cell.raw()) {
                            *place_counts.entry(places).or_default() += 1;
                        }
                    }
                }
                if min > max {
                    min = 0.0;
                    max = 0.0;
                }
                // Dominant precision; ties go to the finer rendering.
                let precision = place_counts
                    .iter()
                    .max_by(|a, b| a.1.cmp(b.1).then(a.0.cmp(b.0)))
                    .map(|(places, _)| *places)
                    .unwrap_or(0);
                ColumnNoise::Numerical { min, max, precision }
            }
            SchemaType::Date => {
                let mut min: Option<NaiveDate> = None;
                let mut max: Option<NaiveDate> = None;
                for cell in column.cells() {
                    if let Some(Parsed::Date(d)) = cell.parsed() {
                        min = Some(min.map_or(d, |m| m.min(d)));
                        max = Some(max.map_or(d, |m| m.max(d)));
                    }
                }
                let min = min.unwrap_or_else(|| NaiveDate::from_ymd_opt(2000, 1, 1).unwrap());
                let max = max.unwrap_or(min);
                let span_days = (max - min).num_days().max(0) as u64;
                ColumnNoise::Date { min, span_days }
            }
            SchemaType::Char => {
                let mut seen = HashSet::new();
                let mut distinct = Vec::new();
                for cell in column.cells() {
                    if cell.is_empty() {
                        continue;
                    }
                    if seen.insert(cell.raw().to_string()) {
                        distinct.push(cell.raw().to_string());
                    }
                }
                if distinct.is_empty() {
                    distinct.push("x".to_string());
                }
                ColumnNoise::Char { distinct }
            }
        })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> String {
        match self {
            ColumnNoise::Numerical { min, max, precision } => {
                let v = rng.gen_range(*min..=*max);
                format!("{v:.precision$}")
            }
            ColumnNoise::Date { min, span_days } => {
                let offset = rng.gen_range(0..=*span_days);
                let d = min.checked_add_days(Days::new(offset)).unwrap_or(*min);
                d.format("%Y-%m-%d").to_string()
            }
            ColumnNoise::Char { distinct } => {
                let base = &distinct[rng.gen_range(0..distinct.len())];
                let a = rng.gen_range(b'a'..=b'z') as char;
                let b = rng.gen_range(b'a'..=b'z') as char;
                format!("{base} {a}{b}")
            }
        }
    }
}

/// Appends `base_rows_to_add x factor` noise rows whose cells are drawn per
/// column schema type. Deterministic in (table, plan.seed); noise rows never
/// duplicate an existing full row.
pub fn perturb(table: &Table, plan: &PerturbationPlan) -> Result<Table, HarnessError> {
    let mut noises = Vec::with_capacity(table.column_count());
    for column in table.columns() {
        let noise = ColumnNoise::for_column(column).map_err(|_| HarnessError::Unprofiled {
            table_id: table.id().to_string(),
            column: column.raw_name().to_string(),
        })?;
        noises.push(noise);
    }

    let mut rows: Vec<Vec<String>> = (0..table.row_count())
        .map(|r| (0..table.column_count()).map(|c| table.cell(r, c).raw().to_string()).collect())
        .collect();
    let mut existing: HashSet<Vec<String>> = rows.iter().cloned().collect();

    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    for _ in 0..plan.rows_to_add() {
        let mut candidate: Vec<String> =
            noises.iter().map(|n| n.sample(&mut rng)).collect();
        let mut attempts = 0;
        while existing.contains(&candidate) && attempts < 64 {
            candidate = noises.iter().map(|n| n.sample(&mut rng)).collect();
            attempts += 1;
        }
        if existing.contains(&candidate) {
            force_unique(&mut candidate, &noises, &existing, &mut rng);
        }
        existing.insert(candidate.clone());
        rows.push(candidate);
    }

    let header: Vec<String> =
        table.columns().iter().map(|c| c.raw_name().to_string()).collect();
    Ok(Table::from_rows(
        table.id().to_string(),
        table.title().map(str::to_string),
        header,
        rows,
    )?)
}

/// Degenerate constant tables cannot honor both the observed-range rule and
/// row uniqueness; uniqueness wins and the mutated cell steps just past the
/// range.
fn force_unique(
    candidate: &mut [String],
    noises: &[ColumnNoise],
    existing: &HashSet<Vec<String>>,
    rng: &mut ChaCha8Rng,
) {
    let target = noises
        .iter()
        .position(|n| matches!(n, ColumnNoise::Char { .. }))
        .or_else(|| noises.iter().position(|n| matches!(n, ColumnNoise::Numerical { .. })))
        .unwrap_or(0);
    let mut step = 1u64;
    while existing.contains(&candidate.to_vec()) {
        match &noises[target] {
            ColumnNoise::Char { .. } => {
                candidate[target].push(rng.gen_range(b'a'..=b'z') as char);
            }
            ColumnNoise::Numerical { max, precision, .. } => {
                let unit = 10f64.powi(-(*precision as i32));
                candidate[target] = format!("{:.*}", *precision, max + step as f64 * unit);
            }
            ColumnNoise::Date { min, .. } => {
                let d = min.checked_sub_days(Days::new(step)).unwrap_or(*min);
                candidate[target] = d.format("%Y-%m-%d").to_string();
            }
        }
        step += 1;
    }
}

/// Decides whether a predicted answer matches the gold one.
pub trait AnswerComparator: Send + Sync {
    fn is_correct(&self, predicted: &Answer, gold: &Gold) -> bool;
}

/// Denotation match: QA compares normalized answer items as multisets,
/// fact verification compares the mapped boolean.
pub struct DefaultComparator;

impl AnswerComparator for DefaultComparator {
    fn is_correct(&self, predicted: &Answer, gold: &Gold) -> bool {
        match (&predicted.normalized, gold) {
            (Normalized::Qa(items), Gold::Answers(gold_items)) => {
                let mut got: Vec<String> = items.clone();
                let mut want: Vec<String> =
                    gold_items.iter().map(|g| normalize_qa_item(g)).collect();
                got.sort();
                want.sort();
                got == want
            }
            (Normalized::Fv(b), Gold::Label(gold_b)) => b == gold_b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExampleReport {
    pub id: String,
    pub predicted: String,
    pub correct: bool,
    pub table_tokens: usize,
    pub table_cells: usize,
    pub tokens_shown: usize,
    /// Noise rows appended to the table before evaluation, when perturbed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub added_rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMode {
    Tokens,
    Cells,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinAggregate {
    pub count: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub overall_accuracy: f64,
    pub per_bin: BTreeMap<String, BinAggregate>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_example: Vec<ExampleReport>,
    pub aggregates: Aggregates,
    pub token_utilization: f64,
}

/// Aggregates are a pure function of the per-example rows, so a consumer
/// can always recompute and cross-check them.
pub fn compute_aggregates(rows: &[ExampleReport], partition: PartitionMode) -> Aggregates {
    let correct = rows.iter().filter(|r| r.correct).count();
    let overall_accuracy =
        if rows.is_empty() { 0.0 } else { correct as f64 / rows.len() as f64 };
    let mut per_bin: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for row in rows {
        let label = match partition {
            PartitionMode::Tokens => token_bin(row.table_tokens).to_string(),
            PartitionMode::Cells => cell_bin(row.table_cells).to_string(),
        };
        let entry = per_bin.entry(label).or_default();
        entry.0 += 1;
        if row.correct {
            entry.1 += 1;
        }
    }
    Aggregates {
        overall_accuracy,
        per_bin: per_bin
            .into_iter()
            .map(|(label, (count, correct))| {
                (label, BinAggregate { count, accuracy: correct as f64 / count as f64 })
            })
            .collect(),
    }
}

pub fn compute_token_utilization(rows: &[ExampleReport]) -> f64 {
    let shown: usize = rows.iter().map(|r| r.tokens_shown).sum();
    let total: usize = rows.iter().map(|r| r.table_tokens).sum();
    if total == 0 {
        0.0
    } else {
        shown as f64 / total as f64
    }
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub partition: PartitionMode,
    /// Bounded worker pool width for example evaluation.
    pub parallelism: usize,
    /// Augmentation cache directory; hits skip recomputation.
    pub cache_dir: Option<PathBuf>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions { partition: PartitionMode::Tokens, parallelism: 4, cache_dir: None }
    }
}

fn augmentation_for(
    table: &Table,
    gateway: &Gateway,
    prompts: &PromptSet,
    config: &PipelineConfig,
    cache_dir: Option<&Path>,
) -> Result<TableAugmentation, String> {
    if let Some(dir) = cache_dir {
        match load_augmentation(table.id(), dir) {
            Ok(Some(aug)) => return Ok(aug),
            Ok(None) => {}
            Err(e) => return Err(e.to_string()),
        }
    }
    let mode = if config.enable_augmentation {
        AugmentMode::LlmEnriched
    } else {
        AugmentMode::DeterministicOnly
    };
    augment_table(table, gateway, prompts, mode).map_err(|e| e.to_string())
}

/// Evaluates every example through the full pipeline. Failures never abort
/// the run: the example is scored incorrect and carries an error note. The
/// report follows manifest order regardless of completion order.
pub fn run_benchmark(
    dataset: &Dataset,
    config: &PipelineConfig,
    gateway: &Gateway,
    prompts: &PromptSet,
    embedder: &dyn Embedder,
    comparator: &dyn AnswerComparator,
    options: &BenchOptions,
) -> EvalReport {
    // One augmentation per distinct table, computed before fan-out so the
    // per-example workers stay read-only.
    let mut augs: BTreeMap<String, Result<TableAugmentation, String>> = BTreeMap::new();
    for example in &dataset.examples {
        if augs.contains_key(&example.table_id) {
            continue;
        }
        let result = match dataset.tables.get(&example.table_id) {
            Some(table) => augmentation_for(
                table,
                gateway,
                prompts,
                config,
                options.cache_dir.as_deref(),
            ),
            None => Err(format!("table `{}` missing from dataset", example.table_id)),
        };
        augs.insert(example.table_id.clone(), result);
    }

    let items: Vec<&BenchExample> = dataset.examples.iter().collect();
    let per_example = crate::parallel::run_indexed(
        items,
        options.parallelism.max(1),
        |i, example| {
            let id = format!("{}#{}", example.table_id, i + 1);
            let table = match dataset.tables.get(&example.table_id) {
                Some(t) => t,
                None => {
                    return ExampleReport {
                        id,
                        predicted: String::new(),
                        correct: false,
                        table_tokens: 0,
                        table_cells: 0,
                        tokens_shown: 0,
                        added_rows: None,
                        error: Some(format!(
                            "table `{}` missing from dataset",
                            example.table_id
                        )),
                    }
                }
            };
            let table_tokens = full_table_tokens(table);
            let table_cells = table.cell_count();
            let aug = match augs.get(&example.table_id) {
                Some(Ok(aug)) => aug,
                Some(Err(note)) => {
                    return ExampleReport {
                        id,
                        predicted: String::new(),
                        correct: false,
                        table_tokens,
                        table_cells,
                        tokens_shown: 0,
                        added_rows: None,
                        error: Some(format!("augmentation failed: {note}")),
                    }
                }
                None => unreachable!("augmentation precomputed per table"),
            };
            match answer_question(
                table,
                &example.question,
                example.task,
                aug,
                gateway,
                prompts,
                embedder,
                config,
            ) {
                Ok(trace) => {
                    let correct = comparator.is_correct(&trace.answer, &example.gold);
                    ExampleReport {
                        id,
                        predicted: trace.answer.raw.clone(),
                        correct,
                        table_tokens,
                        table_cells,
                        tokens_shown: trace.tokens_shown,
                        added_rows: None,
                        error: None,
                    }
                }
                Err(e) => ExampleReport {
                    id,
                    predicted: String::new(),
                    correct: false,
                    table_tokens,
                    table_cells,
                    tokens_shown: 0,
                    added_rows: None,
                    error: Some(e.to_string()),
                },
            }
        },
    );

    let aggregates = compute_aggregates(&per_example, options.partition);
    let token_utilization = compute_token_utilization(&per_example);
    EvalReport { per_example, aggregates, token_utilization }
}

pub fn write_report_json(report: &EvalReport, path: &Path) -> Result<(), HarnessError> {
    let mut file = File::create(path)?;
    serde_json::to_writer_pretty(&mut file, report)?;
    file.write_all(b"\n")?;
    Ok(())
}

/// Flat per-example CSV for plotting.
pub fn write_report_csv(report: &EvalReport, path: &Path) -> Result<(), HarnessError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| {
        HarnessError::Io(std::io::Error::new(std::io::ErrorKind::Other, e.to_string()))
    })?;
    writer
        .write_record([
            "id",
            "predicted",
            "correct",
            "table_tokens",
            "table_cells",
            "tokens_shown",
            "added_rows",
            "error",
        ])
        .map_err(csv_to_io)?;
    for row in &report.per_example {
        writer
            .write_record([
                row.id.as_str(),
                row.predicted.as_str(),
                if row.correct { "true" } else { "false" },
                &row.table_tokens.to_string(),
                &row.table_cells.to_string(),
                &row.tokens_shown.to_string(),
                &row.added_rows.map(|n| n.to_string()).unwrap_or_default(),
                row.error.as_deref().unwrap_or(""),
            ])
            .map_err(csv_to_io)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_to_io(e: csv::Error) -> HarnessError {
    HarnessError::Io(std::io::Error::new(std::io::ErrorKind::Other, e.to_string()))
}
