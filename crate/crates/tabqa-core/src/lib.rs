//! Question answering over large tables without showing the model the whole table.
//!
//! The pipeline narrows a table to a small sub-table (embedding-based row
//! sampling plus LLM column filtering), enriches it with precomputed schema,
//! semantic, and literal metadata, runs generated SQL against an in-process
//! engine, and joint-reasons over the results with self-consistency voting.
//! Every LLM interaction goes through a record/replay gateway so runs are
//! reproducible offline.

pub mod gateway;
pub mod harness;
pub mod parallel;
pub mod pipeline;
pub mod profile;
pub mod prompts;
pub mod query;
pub mod reason;
pub mod retrieve;
pub mod sql;
pub mod table;
pub mod token;
pub mod value;

pub use gateway::{ChatBackend, ChatRequest, Gateway, GatewayError, StageLabel, TraceRecord};
pub use gateway::embed::{Embedder, EmbeddingVector, FallbackEmbedder};
pub use harness::{BenchExample, EvalReport, Gold, PerturbationPlan};
pub use pipeline::{PipelineConfig, PipelineError, RunTrace};
pub use profile::{AugmentMode, ColumnAugmentation, SchemaType, TableAugmentation};
pub use prompts::PromptSet;
pub use query::{QueryBundle, SubQuery, SubQueryKind, TaskKind};
pub use reason::{Answer, Normalized, SubAnswer};
pub use retrieve::SamplerConfig;
pub use sql::{ExecutionResult, ResultTable, SqlAttempt};
pub use table::{Column, SubTableView, Table, TableError};
