//! End-to-end orchestration: query augmentation, per-query retrieval and
//! SQL execution, sub-answer collection, and joint reasoning.
//!
//! Sub-query branches are isolated: a failing branch contributes an
//! unusable sub-answer, never an aborted run. Every prompt sent to the
//! model is recorded together with the token count of its table-derived
//! content, which is what the benchmark's utilization metric sums.

use serde::Serialize;
use thiserror::Error;

use crate::gateway::embed::Embedder;
use crate::gateway::{ChatRequest, Gateway, GatewayError, StageLabel};
use crate::parallel::run_indexed;
use crate::profile::TableAugmentation;
use crate::prompts::PromptSet;
use crate::query::{build_bundle, AugmentFlags, QueryBundle, SubQuery, SubQueryKind, TaskKind};
use crate::reason::{answer_subquery, joint_reason, Answer, ReasonError, SubAnswer};
use crate::retrieve::{resolve_columns, sample_rows, RetrieveError, SamplerConfig};
use crate::sql::{
    augmentation_block, execute_with_prompt, load_into_engine, ExecutionResult, SqlError,
};
use crate::table::{serialize_html, Table, TableError};
use crate::token::count_tokens;

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_PARALLELISM: usize = 4;

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Rows sampled per query for prompt sub-tables.
    pub k: usize,
    pub enable_step_back: bool,
    pub enable_sub_query: bool,
    /// When off, schema/semantic/literal text is omitted from the column
    /// filter and SQL prompts (profiling still types the engine columns).
    pub enable_augmentation: bool,
    /// Self-consistency samples for the joint pass.
    pub sc_n: usize,
    pub max_repairs: usize,
    /// Cap on concurrently running sub-query branches.
    pub parallelism: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k: DEFAULT_K,
            enable_step_back: true,
            enable_sub_query: true,
            enable_augmentation: true,
            sc_n: crate::reason::DEFAULT_SC_N,
            max_repairs: crate::sql::DEFAULT_MAX_REPAIRS,
            parallelism: DEFAULT_PARALLELISM,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Retrieve(#[from] RetrieveError),
    #[error(transparent)]
    Sql(#[from] SqlError),
    #[error(transparent)]
    Reason(#[from] ReasonError),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// One prompt as sent to the model, with the token count of the
/// table-derived content inside it (sub-table HTML, augmentation text,
/// result-table HTML).
#[derive(Debug, Clone, Serialize)]
pub struct PromptRecord {
    pub stage: StageLabel,
    /// Which query the prompt served: "original" or "sub:<n>".
    pub scope: String,
    pub prompt: String,
    pub table_tokens: usize,
}

/// Trace of one query's retrieval and execution branch.
#[derive(Debug, Clone, Serialize)]
pub struct BranchTrace {
    pub query: String,
    pub kind: Option<SubQueryKind>,
    pub row_indices: Vec<usize>,
    pub columns: Vec<String>,
    pub execution: Option<ExecutionResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Full run record: everything `--explain` dumps and the harness scores.
#[derive(Debug, Serialize)]
pub struct RunTrace {
    pub bundle: QueryBundle,
    pub primary: BranchTrace,
    pub subs: Vec<BranchTrace>,
    pub sub_answers: Vec<SubAnswer>,
    pub answer: Answer,
    pub prompts: Vec<PromptRecord>,
    /// Tokens of table-derived content across all prompts.
    pub tokens_shown: usize,
    /// Tokens of the fully serialized table (utilization denominator).
    pub table_tokens: usize,
}

struct Stage<'a> {
    table: &'a Table,
    aug: &'a TableAugmentation,
    gateway: &'a Gateway,
    prompts: &'a PromptSet,
    embedder: &'a dyn Embedder,
    config: &'a PipelineConfig,
}

struct BranchOutput {
    trace: BranchTrace,
    records: Vec<PromptRecord>,
    execution: ExecutionResult,
}

impl<'a> Stage<'a> {
    /// Retrieval plus SQL for one query. Generation failure is a branch
    /// outcome (empty execution), not an error; infrastructure failures
    /// (gateway, table) surface as Err for the caller to isolate.
    fn run_branch(&self, query: &str, scope: &str) -> Result<BranchOutput, PipelineError> {
        let mut records = Vec::new();
        let rows = sample_rows(
            self.table,
            query,
            SamplerConfig { k: self.config.k },
            self.embedder,
        )?;

        // Column filter.
        let all_columns: Vec<String> = self
            .table
            .columns()
            .iter()
            .map(|c| c.sanitized_name().to_string())
            .collect();
        let sample_view = self.table.view(&rows, &all_columns)?;
        let sample_html = serialize_html(&sample_view);
        let (schema_block, semantic_block) = if self.config.enable_augmentation {
            (self.aug.schema_block(self.table), self.aug.semantic_block(self.table))
        } else {
            (String::new(), String::new())
        };
        let filter_prompt =
            self.prompts.fill_col_filter(&schema_block, &semantic_block, &sample_html, query);
        records.push(PromptRecord {
            stage: StageLabel::ColFilter,
            scope: scope.to_string(),
            prompt: filter_prompt.clone(),
            table_tokens: count_tokens(&schema_block)
                + count_tokens(&semantic_block)
                + count_tokens(&sample_html),
        });
        let responses = self
            .gateway
            .complete(&ChatRequest::new(StageLabel::ColFilter, filter_prompt))?;
        let columns = resolve_columns(self.table, &responses[0]);

        // SQL generation over the narrowed view.
        let view = self.table.view(&rows, &columns)?;
        let view_html = serialize_html(&view);
        let sql_block = if self.config.enable_augmentation {
            augmentation_block(&view, self.aug)?
        } else {
            String::new()
        };
        let sql_prompt = self.prompts.fill_sql_gen(&sql_block, &view_html, query);
        let sql_table_tokens = count_tokens(&sql_block) + count_tokens(&view_html);

        let engine = load_into_engine(self.table, self.aug)?;
        let outcome = execute_with_prompt(
            &engine,
            &sql_prompt,
            self.gateway,
            self.prompts,
            self.config.max_repairs,
        );
        let (execution, error) = match outcome {
            Ok(result) => (result, None),
            Err(SqlError::GenerationFailed { attempts }) => {
                let final_sql =
                    attempts.last().map(|a| a.sql_text.clone()).unwrap_or_default();
                let message = attempts
                    .last()
                    .and_then(|a| a.error.clone())
                    .unwrap_or_else(|| "SQL generation failed".to_string());
                (ExecutionResult { final_sql, result: None, attempts }, Some(message))
            }
            Err(other) => return Err(other.into()),
        };
        // The repair loop re-sends the table content with each attempt.
        for attempt in 0..execution.attempts.len().max(1) {
            let prompt = if attempt == 0 {
                sql_prompt.clone()
            } else {
                let failed = &execution.attempts[attempt - 1];
                self.prompts.fill_sql_repair(
                    &sql_prompt,
                    &failed.sql_text,
                    failed.error.as_deref().unwrap_or(""),
                )
            };
            records.push(PromptRecord {
                stage: StageLabel::SqlGen,
                scope: scope.to_string(),
                prompt,
                table_tokens: sql_table_tokens,
            });
        }

        Ok(BranchOutput {
            trace: BranchTrace {
                query: query.to_string(),
                kind: None,
                row_indices: rows,
                columns,
                execution: Some(execution.clone()),
                error,
            },
            records,
            execution,
        })
    }
}

/// Runs the full pipeline for one question over one profiled table.
#[allow(clippy::too_many_arguments)]
pub fn answer_question(
    table: &Table,
    question: &str,
    task: TaskKind,
    aug: &TableAugmentation,
    gateway: &Gateway,
    prompts: &PromptSet,
    embedder: &dyn Embedder,
    config: &PipelineConfig,
) -> Result<RunTrace, PipelineError> {
    let stage = Stage { table, aug, gateway, prompts, embedder, config };
    let mut records: Vec<PromptRecord> = Vec::new();

    // Initial sample for the query-augmentation prompts.
    let initial_rows =
        sample_rows(table, question, SamplerConfig { k: config.k }, embedder)?;
    let all_columns: Vec<String> = table.full_view().column_names().to_vec();
    let initial_view = table.view(&initial_rows, &all_columns)?;
    let initial_html = serialize_html(&initial_view);

    let flags = AugmentFlags {
        enable_step_back: config.enable_step_back,
        enable_sub_query: config.enable_sub_query,
    };
    let bundle = build_bundle(question, task, &initial_html, gateway, prompts, flags)?;
    let sample_tokens = count_tokens(&initial_html);
    if config.enable_step_back {
        records.push(PromptRecord {
            stage: StageLabel::StepBack,
            scope: "original".to_string(),
            prompt: prompts.fill_step_back(&initial_html, question),
            table_tokens: sample_tokens,
        });
    }
    if config.enable_sub_query {
        records.push(PromptRecord {
            stage: StageLabel::SubQuery,
            scope: "original".to_string(),
            prompt: prompts.fill_sub_query(&initial_html, question),
            table_tokens: sample_tokens,
        });
    }

    // Sub-query branches run concurrently; results return in bundle order.
    let sub_inputs: Vec<SubQuery> = bundle.sub_queries.clone();
    let branch_results = run_indexed(sub_inputs, config.parallelism, |i, sub| {
        let scope = format!("sub:{i}");
        let branch = stage.run_branch(&sub.text, &scope);
        (sub, scope, branch)
    });

    let mut subs: Vec<BranchTrace> = Vec::new();
    let mut sub_answers: Vec<SubAnswer> = Vec::new();
    for (sub, scope, outcome) in branch_results {
        match outcome {
            Ok(mut output) => {
                output.trace.kind = Some(sub.kind);
                records.append(&mut output.records);
                if output.trace.error.is_some() {
                    // SQL never succeeded; the branch is unusable without
                    // consulting the model.
                    subs.push(output.trace);
                    sub_answers.push(SubAnswer::unusable(sub.text.clone(), sub.kind));
                    continue;
                }
                // Sub-answer stage; a gateway failure here isolates too.
                let answer =
                    answer_subquery(&output.execution, &sub, question, gateway, prompts);
                let result_html = output
                    .execution
                    .result
                    .as_ref()
                    .map(|r| r.to_html())
                    .unwrap_or_default();
                records.push(PromptRecord {
                    stage: StageLabel::SubAnswer,
                    scope: scope.clone(),
                    prompt: prompts.fill_sub_answer(&result_html, &sub.text, question),
                    table_tokens: count_tokens(&result_html),
                });
                match answer {
                    Ok(answer) => {
                        sub_answers.push(answer);
                        subs.push(output.trace);
                    }
                    Err(err) => {
                        let mut trace = output.trace;
                        trace.error = Some(err.to_string());
                        subs.push(trace);
                        sub_answers.push(SubAnswer::unusable(sub.text.clone(), sub.kind));
                    }
                }
            }
            Err(err) => {
                subs.push(BranchTrace {
                    query: sub.text.clone(),
                    kind: Some(sub.kind),
                    row_indices: Vec::new(),
                    columns: Vec::new(),
                    execution: None,
                    error: Some(err.to_string()),
                });
                sub_answers.push(SubAnswer::unusable(sub.text.clone(), sub.kind));
            }
        }
    }

    // Primary branch: infrastructure errors propagate, SQL failure does not.
    let primary_output = stage.run_branch(question, "original")?;
    records.extend(primary_output.records);
    let primary_exec = primary_output.execution;
    let primary_trace = primary_output.trace;

    // Joint reasoning with self-consistency.
    let joint_html =
        primary_exec.result.as_ref().map(|r| r.to_html()).unwrap_or_default();
    let joint_block = crate::reason::sub_answers_block(&sub_answers);
    records.push(PromptRecord {
        stage: StageLabel::JointReason,
        scope: "original".to_string(),
        prompt: prompts.fill_joint(task, &joint_html, &joint_block, question),
        table_tokens: count_tokens(&joint_html),
    });
    let answer = joint_reason(
        &primary_exec,
        &sub_answers,
        question,
        task,
        gateway,
        prompts,
        config.sc_n,
    )?;

    let tokens_shown = records.iter().map(|r| r.table_tokens).sum();
    let table_tokens = count_tokens(&serialize_html(&table.full_view()));

    Ok(RunTrace {
        bundle,
        primary: primary_trace,
        subs,
        sub_answers,
        answer,
        prompts: records,
        tokens_shown,
        table_tokens,
    })
}
