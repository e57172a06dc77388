//! Run configuration resolved from built-in defaults, an optional key=value
//! file, and command line flags, in increasing precedence.

use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::Args;
use tabqa_core::pipeline::{PipelineConfig, DEFAULT_K, DEFAULT_PARALLELISM};
use tabqa_core::reason::DEFAULT_SC_N;
use tabqa_core::sql::DEFAULT_MAX_REPAIRS;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BackendKind {
    /// HTTP chat endpoint configured through TABQA_LLM_* variables.
    Live,
    /// Recorded trace lookup; never touches the network.
    Replay,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub k: usize,
    pub enable_step_back: bool,
    pub enable_sub_query: bool,
    pub enable_augmentation: bool,
    pub sc_n: usize,
    pub max_repairs: usize,
    pub backend: BackendKind,
    pub seed: u64,
    pub cache_dir: Option<PathBuf>,
    pub trace_path: Option<PathBuf>,
    pub parallelism: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: DEFAULT_K,
            enable_step_back: true,
            enable_sub_query: true,
            enable_augmentation: true,
            sc_n: DEFAULT_SC_N,
            max_repairs: DEFAULT_MAX_REPAIRS,
            backend: BackendKind::Live,
            seed: 0,
            cache_dir: None,
            trace_path: None,
            parallelism: DEFAULT_PARALLELISM,
        }
    }
}

impl RunConfig {
    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            k: self.k,
            enable_step_back: self.enable_step_back,
            enable_sub_query: self.enable_sub_query,
            enable_augmentation: self.enable_augmentation,
            sc_n: self.sc_n,
            max_repairs: self.max_repairs,
            parallelism: self.parallelism,
        }
    }

    fn validate(self) -> Result<Self, CliError> {
        if self.backend == BackendKind::Replay && self.trace_path.is_none() {
            return Err(CliError::usage(anyhow!("--backend replay requires --trace <FILE>")));
        }
        if self.sc_n == 0 {
            return Err(CliError::usage(anyhow!("--sc-n must be at least 1")));
        }
        if self.parallelism == 0 {
            return Err(CliError::usage(anyhow!("--parallelism must be at least 1")));
        }
        Ok(self)
    }
}

/// Flags shared by every command that runs the pipeline or the profiler.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigFlags {
    /// Key=value settings file; flags given here override its entries.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Rows sampled per sub-table.
    #[arg(long)]
    pub k: Option<usize>,

    /// Disable the step-back query augmenter.
    #[arg(long)]
    pub no_step_back: bool,

    /// Disable the sub-query decomposition augmenter.
    #[arg(long)]
    pub no_sub_query: bool,

    /// Drop the schema/semantic/literal blocks from prompts.
    #[arg(long)]
    pub no_augmentation: bool,

    /// Self-consistency sample count for the joint reasoner.
    #[arg(long)]
    pub sc_n: Option<usize>,

    /// SQL repair attempts after a failed execution.
    #[arg(long)]
    pub max_repairs: Option<usize>,

    /// Where model responses come from.
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,

    /// Trace file: replay source, or recording target in live mode.
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,

    /// Seed for table perturbation.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Augmentation cache directory.
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,

    /// Worker pool width for sub-queries and benchmark examples.
    #[arg(long)]
    pub parallelism: Option<usize>,
}

pub fn resolve(flags: &ConfigFlags) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::default();
    if let Some(path) = &flags.config {
        apply_file(&mut config, path)?;
    }
    apply_flags(&mut config, flags);
    config.validate()
}

fn apply_flags(config: &mut RunConfig, flags: &ConfigFlags) {
    if let Some(k) = flags.k {
        config.k = k;
    }
    if flags.no_step_back {
        config.enable_step_back = false;
    }
    if flags.no_sub_query {
        config.enable_sub_query = false;
    }
    if flags.no_augmentation {
        config.enable_augmentation = false;
    }
    if let Some(n) = flags.sc_n {
        config.sc_n = n;
    }
    if let Some(n) = flags.max_repairs {
        config.max_repairs = n;
    }
    if let Some(backend) = flags.backend {
        config.backend = backend;
    }
    if let Some(path) = &flags.trace {
        config.trace_path = Some(path.clone());
    }
    if let Some(seed) = flags.seed {
        config.seed = seed;
    }
    if let Some(dir) = &flags.cache_dir {
        config.cache_dir = Some(dir.clone());
    }
    if let Some(width) = flags.parallelism {
        config.parallelism = width;
    }
}

fn apply_file(config: &mut RunConfig, path: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(anyhow!("cannot read config {}: {e}", path.display())))?;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or_else(|| bad_line(path, lineno, "expected key=value"))?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "k" => config.k = parse(path, lineno, value)?,
            "step_back" => config.enable_step_back = parse_bool(path, lineno, value)?,
            "sub_query" => config.enable_sub_query = parse_bool(path, lineno, value)?,
            "augmentation" => config.enable_augmentation = parse_bool(path, lineno, value)?,
            "sc_n" => config.sc_n = parse(path, lineno, value)?,
            "max_repairs" => config.max_repairs = parse(path, lineno, value)?,
            "backend" => {
                config.backend = match value {
                    "live" => BackendKind::Live,
                    "replay" => BackendKind::Replay,
                    other => {
                        return Err(bad_line(
                            path,
                            lineno,
                            &format!("unknown backend `{other}` (expected live or replay)"),
                        ))
                    }
                }
            }
            "trace" | "trace_path" => config.trace_path = Some(PathBuf::from(value)),
            "seed" => config.seed = parse(path, lineno, value)?,
            "cache_dir" => config.cache_dir = Some(PathBuf::from(value)),
            "parallelism" => config.parallelism = parse(path, lineno, value)?,
            other => return Err(bad_line(path, lineno, &format!("unknown key `{other}`"))),
        }
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(path: &Path, lineno: usize, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| bad_line(path, lineno, &format!("invalid value `{value}`: {e}")))
}

fn parse_bool(path: &Path, lineno: usize, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(bad_line(path, lineno, &format!("expected a boolean, got `{other}`"))),
    }
}

fn bad_line(path: &Path, lineno: usize, detail: &str) -> CliError {
    CliError::usage(anyhow!("config {} line {}: {detail}", path.display(), lineno + 1))
}
