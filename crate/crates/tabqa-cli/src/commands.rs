//! Subcommand implementations over the core library.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::Args;
use tabqa_core::gateway::TraceRecord;
use tabqa_core::harness::{
    load_dataset, perturb, run_benchmark, write_report_csv, write_report_json, BenchOptions,
    DefaultComparator, PartitionMode,
};
use tabqa_core::pipeline::answer_question;
use tabqa_core::profile::{
    augment_table, augment_table_deterministic, load_augmentation, store_augmentation,
    AugmentMode, ProfileError,
};
use tabqa_core::table::{load_table, TableFormat};
use tabqa_core::{Gateway, PerturbationPlan, PromptSet, Table, TableAugmentation, TaskKind};

use crate::backend::{build_embedder, build_gateway};
use crate::config::{resolve, ConfigFlags, RunConfig};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AugmentModeArg {
    /// Schema, templated semantics, and literal formats; no model calls.
    Deterministic,
    /// The deterministic profile enriched with model-written semantics.
    Llm,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Table file (.csv, .tsv, or .json row layout).
    pub table: PathBuf,

    /// Profiling depth.
    #[arg(long, value_enum, default_value_t = AugmentModeArg::Deterministic)]
    pub mode: AugmentModeArg,

    #[command(flatten)]
    pub config: ConfigFlags,
}

pub fn cmd_augment(args: &AugmentArgs) -> Result<(), CliError> {
    let config = resolve(&args.config)?;
    let table = load_table_file(&args.table)?;
    let aug = match args.mode {
        AugmentModeArg::Deterministic => {
            augment_table_deterministic(&table).map_err(profile_error)?
        }
        AugmentModeArg::Llm => {
            let gateway = build_gateway(&config)?;
            let prompts = PromptSet::bundled();
            augment_table(&table, &gateway, &prompts, AugmentMode::LlmEnriched)
                .map_err(profile_error)?
        }
    };
    let cache_dir = config.cache_dir.clone().unwrap_or_else(|| PathBuf::from("aug_cache"));
    let path = store_augmentation(&aug, &cache_dir).map_err(profile_error)?;
    println!("augmentation written to {}", path.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct AskArgs {
    /// Table file.
    pub table: PathBuf,

    /// Question to answer, or statement to verify.
    pub question: String,

    /// qa expects a free-form answer; fv verifies a statement as true/false.
    #[arg(long, default_value = "qa", value_parser = clap::value_parser!(TaskKind))]
    pub task: TaskKind,

    /// Print the full stage trace (bundle, views, SQL attempts, sub-answers)
    /// instead of just the answer.
    #[arg(long)]
    pub explain: bool,

    #[command(flatten)]
    pub config: ConfigFlags,
}

pub fn cmd_ask(args: &AskArgs) -> Result<(), CliError> {
    let config = resolve(&args.config)?;
    let table = load_table_file(&args.table)?;
    let gateway = build_gateway(&config)?;
    let prompts = PromptSet::bundled();
    let embedder = build_embedder(&config);
    let aug = table_augmentation(&table, &config, &gateway, &prompts)?;
    let trace = answer_question(
        &table,
        &args.question,
        args.task,
        &aug,
        &gateway,
        &prompts,
        embedder.as_ref(),
        &config.pipeline(),
    )
    .map_err(CliError::backend)?;
    let rendered = if args.explain {
        serde_json::to_string_pretty(&trace)
    } else {
        serde_json::to_string_pretty(&trace.answer)
    }
    .expect("run trace serializes");
    println!("{rendered}");
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PartitionArg {
    Tokens,
    Cells,
}

impl From<PartitionArg> for PartitionMode {
    fn from(arg: PartitionArg) -> Self {
        match arg {
            PartitionArg::Tokens => PartitionMode::Tokens,
            PartitionArg::Cells => PartitionMode::Cells,
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Manifest JSONL: one {table_id, question, answers|label} per line.
    pub manifest: PathBuf,

    /// Directory holding one <table_id>.csv per referenced table.
    pub tables_dir: PathBuf,

    /// Accuracy bins in the report: serialized token count or cell count.
    #[arg(long, value_enum, default_value_t = PartitionArg::Tokens)]
    pub partition: PartitionArg,

    /// Append seeded noise rows to every table before evaluation.
    #[arg(long, value_parser = parse_factor)]
    pub perturb_factor: Option<usize>,

    /// Report JSON output path.
    #[arg(long, default_value = "report.json")]
    pub report: PathBuf,

    /// Also write the per-example rows as a flat CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,

    #[command(flatten)]
    pub config: ConfigFlags,
}

pub fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    let config = resolve(&args.config)?;
    let mut dataset = load_dataset(&args.manifest, &args.tables_dir)
        .map_err(|e| CliError::usage(anyhow!("cannot load {}: {e}", args.manifest.display())))?;
    if dataset.examples.is_empty() {
        return Err(CliError::usage(anyhow!(
            "manifest {} has no examples",
            args.manifest.display()
        )));
    }

    let mut added: BTreeMap<String, usize> = BTreeMap::new();
    if let Some(factor) = args.perturb_factor {
        let ids: Vec<String> = dataset.tables.keys().cloned().collect();
        for id in ids {
            let table = dataset.tables.get(&id).expect("keyed by id");
            let plan = PerturbationPlan::for_table(table, factor, config.seed);
            let perturbed = perturb(table, &plan)
                .map_err(|e| CliError::usage(anyhow!("cannot perturb table `{id}`: {e}")))?;
            added.insert(id.clone(), plan.rows_to_add());
            dataset.tables.insert(id, perturbed);
        }
    }

    let gateway = build_gateway(&config)?;
    let prompts = PromptSet::bundled();
    let embedder = build_embedder(&config);
    let options = BenchOptions {
        partition: args.partition.into(),
        parallelism: config.parallelism,
        cache_dir: config.cache_dir.clone(),
    };
    let mut report = run_benchmark(
        &dataset,
        &config.pipeline(),
        &gateway,
        &prompts,
        embedder.as_ref(),
        &DefaultComparator,
        &options,
    );
    if !added.is_empty() {
        for row in &mut report.per_example {
            // Example ids are "<table_id>#<n>"; the table id may itself
            // contain '#', so split at the last one.
            let table_id = row.id.rsplit_once('#').map(|(t, _)| t).unwrap_or(&row.id);
            row.added_rows = added.get(table_id).copied();
        }
    }

    write_report_json(&report, &args.report).map_err(|e| {
        CliError::usage(anyhow!("cannot write report {}: {e}", args.report.display()))
    })?;
    if let Some(csv_path) = &args.csv {
        write_report_csv(&report, csv_path).map_err(|e| {
            CliError::usage(anyhow!("cannot write csv {}: {e}", csv_path.display()))
        })?;
    }

    println!("examples: {}", report.per_example.len());
    println!("accuracy: {:.4}", report.aggregates.overall_accuracy);
    println!("token utilization: {:.4}", report.token_utilization);
    println!("report: {}", args.report.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    /// Table file.
    pub table: PathBuf,

    /// Multiplier on the size-dependent base row count.
    #[arg(long, value_parser = parse_factor, default_value = "1")]
    pub factor: usize,

    /// Noise generator seed; equal seeds give byte-identical output.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_perturb(args: &PerturbArgs) -> Result<(), CliError> {
    let table = load_table_file(&args.table)?;
    let plan = PerturbationPlan::for_table(&table, args.factor, args.seed);
    let perturbed = perturb(&table, &plan)
        .map_err(|e| CliError::usage(anyhow!("cannot perturb {}: {e}", args.table.display())))?;
    let csv = perturbed.to_csv();
    match &args.out {
        Some(path) => {
            std::fs::write(path, &csv)
                .map_err(|e| CliError::usage(anyhow!("cannot write {}: {e}", path.display())))?;
            println!("added {} rows -> {}", plan.rows_to_add(), path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(subcommand)]
    pub action: TraceAction,
}

#[derive(Debug, clap::Subcommand)]
pub enum TraceAction {
    /// Per-stage record counts and request coverage for a trace file.
    Stats {
        /// Trace JSONL file.
        trace: PathBuf,
    },
}

pub fn cmd_trace(args: &TraceArgs) -> Result<(), CliError> {
    match &args.action {
        TraceAction::Stats { trace } => trace_stats(trace),
    }
}

fn trace_stats(path: &Path) -> Result<(), CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::usage(anyhow!("cannot open {}: {e}", path.display())))?;
    let reader = BufReader::new(file);
    let mut by_stage: BTreeMap<&'static str, usize> = BTreeMap::new();
    let mut hashes = HashSet::new();
    let mut total = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let line = line
            .map_err(|e| CliError::usage(anyhow!("cannot read {}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord = serde_json::from_str(&line)
            .map_err(|e| CliError::usage(anyhow!("{} line {}: {e}", path.display(), i + 1)))?;
        *by_stage.entry(record.stage_label.as_str()).or_default() += 1;
        hashes.insert(record.request_hash);
        total += 1;
    }
    for (stage, count) in &by_stage {
        println!("{stage}: {count}");
    }
    println!("records: {total}");
    println!("distinct requests: {}", hashes.len());
    Ok(())
}

/// Gateway trouble is a backend failure; everything else is bad input.
fn profile_error(err: ProfileError) -> CliError {
    match err {
        ProfileError::Gateway(_) => CliError::backend(err),
        other => CliError::usage(other),
    }
}

pub fn load_table_file(path: &Path) -> Result<Table, CliError> {
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") => TableFormat::Tsv,
        Some("json") => TableFormat::JsonRows,
        _ => TableFormat::Csv,
    };
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("table").to_string();
    let file = File::open(path)
        .map_err(|e| CliError::usage(anyhow!("cannot open {}: {e}", path.display())))?;
    load_table(id, file, format)
        .map_err(|e| CliError::usage(anyhow!("cannot load {}: {e}", path.display())))
}

/// Cached profile when available, otherwise computed at the depth the run
/// configuration asks for.
fn table_augmentation(
    table: &Table,
    config: &RunConfig,
    gateway: &Gateway,
    prompts: &PromptSet,
) -> Result<TableAugmentation, CliError> {
    if let Some(dir) = &config.cache_dir {
        match load_augmentation(table.id(), dir) {
            Ok(Some(aug)) => return Ok(aug),
            Ok(None) => {}
            Err(e) => return Err(profile_error(e)),
        }
    }
    let mode = if config.enable_augmentation {
        AugmentMode::LlmEnriched
    } else {
        AugmentMode::DeterministicOnly
    };
    augment_table(table, gateway, prompts, mode).map_err(profile_error)
}

fn parse_factor(value: &str) -> Result<usize, String> {
    match value {
        "1" => Ok(1),
        "2" => Ok(2),
        "4" => Ok(4),
        other => Err(format!("factor must be 1, 2, or 4, got `{other}`")),
    }
}
