//! SQL bridge: prompt construction for SQL generation, execution of the
//! generated statement against an in-process engine, and the repair loop.
//!
//! The LLM prompt only ever shows the filtered sub-table; the engine loads
//! the full table, which is the single place the pipeline touches all rows.

pub mod eval;
mod lexer;
pub mod parser;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{ChatRequest, Gateway, GatewayError, StageLabel};
use crate::profile::{SchemaType, TableAugmentation};
use crate::prompts::PromptSet;
use crate::table::{html_escape, serialize_html, SubTableView, Table};
use crate::value::Parsed;

pub use eval::{Affinity, Engine, EngineColumn, ErrorKind, EvalError, QueryOutput, Value};

pub const DEFAULT_MAX_REPAIRS: usize = 1;

#[derive(Debug, Error)]
pub enum SqlError {
    #[error("augmentation does not cover column {0}")]
    MissingAugmentation(String),
    #[error("engine error: {0}")]
    Engine(String),
    #[error("SQL generation failed after {} attempts", attempts.len())]
    GenerationFailed { attempts: Vec<SqlAttempt> },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptOutcome {
    Ok,
    ParseError,
    ExecError,
    EmptyResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqlAttempt {
    pub sql_text: String,
    pub attempt_index: usize,
    pub outcome: AttemptOutcome,
    /// Engine message for failed attempts; feeds the repair prompt.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Materialized query result with rendered cells (NULL becomes "").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ResultTable {
    pub fn from_output(out: QueryOutput) -> ResultTable {
        ResultTable {
            headers: out.headers,
            rows: out
                .rows
                .into_iter()
                .map(|r| r.iter().map(Value::render).collect())
                .collect(),
        }
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Same HTML shape as sub-table serialization, so reasoner prompts
    /// present source tables and result tables identically.
    pub fn to_html(&self) -> String {
        let mut html = String::from("<table>\n<thead>\n<tr>");
        for h in &self.headers {
            html.push_str("<th>");
            html.push_str(&html_escape(h));
            html.push_str("</th>");
        }
        html.push_str("</tr>\n</thead>\n<tbody>\n");
        for row in &self.rows {
            html.push_str("<tr>");
            for cell in row {
                html.push_str("<td>");
                html.push_str(&html_escape(cell));
                html.push_str("</td>");
            }
            html.push_str("</tr>\n");
        }
        html.push_str("</tbody>\n</table>");
        html
    }

    /// json-rows shape shared with the table model loader.
    pub fn to_json_rows(&self) -> String {
        let obj = serde_json::json!({ "header": self.headers, "rows": self.rows });
        obj.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub final_sql: String,
    /// Present iff the last attempt's outcome is ok or empty_result.
    pub result: Option<ResultTable>,
    pub attempts: Vec<SqlAttempt>,
}

impl ExecutionResult {
    pub fn succeeded(&self) -> bool {
        self.result.is_some()
    }
}

/// Renders the per-column augmentation block for the filtered columns, in
/// view order: schema type, then semantic description, then literal format.
pub fn augmentation_block(
    view: &SubTableView<'_>,
    aug: &TableAugmentation,
) -> Result<String, SqlError> {
    let mut lines = Vec::new();
    for column in view.selected_columns() {
        let name = column.raw_name();
        let col_aug = aug
            .column(column.sanitized_name())
            .ok_or_else(|| SqlError::MissingAugmentation(name.to_string()))?;
        lines.push(format!("- {name}: type={}", col_aug.schema_type));
        lines.push(format!("  semantic: {}", col_aug.semantic_description));
        lines.push(format!("  literal: {}", col_aug.literal_format));
    }
    Ok(lines.join("\n"))
}

/// Builds the SQL-generation prompt: augmentation for the filtered columns,
/// the K-row sub-table as HTML, the query, and the dialect note (carried by
/// the template).
pub fn build_sql_prompt(
    view: &SubTableView<'_>,
    query: &str,
    aug: &TableAugmentation,
    prompts: &PromptSet,
) -> Result<String, SqlError> {
    let block = augmentation_block(view, aug)?;
    let html = serialize_html(view);
    Ok(prompts.fill_sql_gen(&block, &html, query))
}

/// Loads the full table into a fresh engine as relation `t`. Coercion is
/// total: dirty cells become NULL instead of failing the load.
pub fn load_into_engine(table: &Table, aug: &TableAugmentation) -> Result<Engine, SqlError> {
    aug.validate_against(table)
        .map_err(|_| SqlError::MissingAugmentation(table.id().to_string()))?;

    let mut columns = Vec::with_capacity(table.column_count());
    let mut schema = Vec::with_capacity(table.column_count());
    for col in table.columns() {
        let col_aug = aug
            .column(col.sanitized_name())
            .ok_or_else(|| SqlError::MissingAugmentation(col.raw_name().to_string()))?;
        let affinity = match col_aug.schema_type {
            SchemaType::Numerical => Affinity::Real,
            SchemaType::Date | SchemaType::Char => Affinity::Text,
        };
        columns.push(EngineColumn {
            display_name: col.raw_name().to_string(),
            match_name: col.sanitized_name().to_string(),
            affinity,
        });
        schema.push(col_aug.schema_type);
    }

    let mut rows = Vec::with_capacity(table.row_count());
    for ri in 0..table.row_count() {
        let mut row = Vec::with_capacity(table.column_count());
        for (ci, col) in table.columns().iter().enumerate() {
            let cell = &col.cells()[ri];
            let value = match schema[ci] {
                SchemaType::Numerical => match cell.parsed() {
                    Some(Parsed::Number(n)) => Value::Num(n),
                    _ => Value::Null,
                },
                SchemaType::Date => match cell.parsed() {
                    Some(Parsed::Date(d)) => Value::Text(d.format("%Y-%m-%d").to_string()),
                    _ => Value::Null,
                },
                SchemaType::Char => Value::Text(cell.raw().to_string()),
            };
            row.push(value);
        }
        rows.push(row);
    }

    Engine::new("t", columns, rows).map_err(|e| SqlError::Engine(e.message))
}

/// Extracts the SQL statement from an LLM response: the first fenced code
/// block if any, otherwise the longest SELECT-prefixed statement among the
/// `;`-separated segments.
pub fn extract_sql(response: &str) -> Option<String> {
    if let Some(open) = response.find("```") {
        let after = &response[open + 3..];
        let body_start = after.find('\n').map(|i| i + 1).unwrap_or(0);
        let body = &after[body_start..];
        if let Some(close) = body.find("```") {
            let sql = body[..close].trim();
            if !sql.is_empty() {
                return Some(sql.to_string());
            }
        }
    }
    response
        .split(';')
        .map(str::trim)
        .filter(|seg| {
            let head: String = seg.chars().take(6).collect();
            head.eq_ignore_ascii_case("select")
        })
        .max_by_key(|seg| seg.len())
        .map(str::to_string)
}

/// Runs the generate-execute-repair loop. An empty result set is success:
/// the reasoner decides what an empty sub-table means.
pub fn generate_and_execute(
    table: &Table,
    view: &SubTableView<'_>,
    query: &str,
    aug: &TableAugmentation,
    gateway: &Gateway,
    prompts: &PromptSet,
    max_repairs: usize,
) -> Result<ExecutionResult, SqlError> {
    let engine = load_into_engine(table, aug)?;
    let base_prompt = build_sql_prompt(view, query, aug, prompts)?;
    execute_with_prompt(&engine, &base_prompt, gateway, prompts, max_repairs)
}

/// The execution half of [`generate_and_execute`], for callers that build
/// the base prompt themselves (the pipeline's no-augmentation ablation).
pub fn execute_with_prompt(
    engine: &Engine,
    base_prompt: &str,
    gateway: &Gateway,
    prompts: &PromptSet,
    max_repairs: usize,
) -> Result<ExecutionResult, SqlError> {
    let mut attempts: Vec<SqlAttempt> = Vec::new();
    let mut last_failure: Option<(String, String)> = None;

    for attempt_index in 0..=max_repairs {
        let prompt = match &last_failure {
            None => base_prompt.to_string(),
            Some((failed_sql, error)) => {
                prompts.fill_sql_repair(base_prompt, failed_sql, error)
            }
        };
        let responses = gateway.complete(&ChatRequest::new(StageLabel::SqlGen, prompt))?;
        let response = responses.first().map(String::as_str).unwrap_or("");

        let Some(sql) = extract_sql(response) else {
            let error = "no SQL statement found in response".to_string();
            attempts.push(SqlAttempt {
                sql_text: response.trim().to_string(),
                attempt_index,
                outcome: AttemptOutcome::ParseError,
                error: Some(error.clone()),
            });
            last_failure = Some((response.trim().to_string(), error));
            continue;
        };

        match engine.execute(&sql) {
            Ok(output) => {
                let result = ResultTable::from_output(output);
                let outcome = if result.is_empty() {
                    AttemptOutcome::EmptyResult
                } else {
                    AttemptOutcome::Ok
                };
                attempts.push(SqlAttempt {
                    sql_text: sql.clone(),
                    attempt_index,
                    outcome,
                    error: None,
                });
                return Ok(ExecutionResult { final_sql: sql, result: Some(result), attempts });
            }
            Err(err) => {
                let outcome = match err.kind {
                    ErrorKind::Parse => AttemptOutcome::ParseError,
                    ErrorKind::Exec => AttemptOutcome::ExecError,
                };
                attempts.push(SqlAttempt {
                    sql_text: sql.clone(),
                    attempt_index,
                    outcome,
                    error: Some(err.message.clone()),
                });
                last_failure = Some((sql, err.message));
            }
        }
    }

    Err(SqlError::GenerationFailed { attempts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::scripted::{ScriptRule, ScriptedBackend};
    use crate::profile::{augment_table, AugmentMode};
    use crate::table::{load_table, TableFormat};

    fn fixture() -> (Table, TableAugmentation) {
        let csv = "Team,Score,Played\nEagles,98,2021-03-01\nHawks,83,2021-03-02\nOwls,77,2021-03-09\n";
        let table = load_table("games", csv.as_bytes(), TableFormat::Csv).unwrap();
        let gateway = Gateway::new(Box::new(ScriptedBackend::new(Vec::new())));
        let aug = augment_table(&table, &gateway, &PromptSet::bundled(), AugmentMode::DeterministicOnly).unwrap();
        (table, aug)
    }

    #[test]
    fn prompt_contains_augmentation_table_and_query_in_order() {
        let (table, aug) = fixture();
        let view = table.full_view();
        let prompts = PromptSet::bundled();
        let prompt = build_sql_prompt(&view, "which team scored 98?", &aug, &prompts).unwrap();

        let type_pos = prompt.find("- Team: type=Char").unwrap();
        let html_pos = prompt.find("<table>").unwrap();
        let query_pos = prompt.find("which team scored 98?").unwrap();
        let dialect_pos = prompt.find("table name t").unwrap();
        assert!(type_pos < html_pos && html_pos < query_pos && query_pos < dialect_pos);
        assert!(prompt.contains("- Score: type=Numerical"));
        assert!(prompt.contains("- Played: type=Date"));
    }

    #[test]
    fn prompt_lists_only_filtered_columns() {
        let (table, aug) = fixture();
        let view = table
            .view(&[0, 1, 2], &["Team".to_string(), "Score".to_string()])
            .unwrap();
        let prompts = PromptSet::bundled();
        let prompt = build_sql_prompt(&view, "q", &aug, &prompts).unwrap();
        assert!(prompt.contains("- Team:"));
        assert!(prompt.contains("- Score:"));
        assert!(!prompt.contains("- Played:"));
    }

    #[test]
    fn literal_format_appears_verbatim() {
        let (table, aug) = fixture();
        let view = table.full_view();
        let prompts = PromptSet::bundled();
        let prompt = build_sql_prompt(&view, "q", &aug, &prompts).unwrap();
        let literal = &aug.column("Score").unwrap().literal_format;
        assert!(prompt.contains(literal.as_str()), "missing {literal}");
    }

    #[test]
    fn missing_augmentation_detected() {
        let (table, mut aug) = fixture();
        aug.per_column.remove("Score");
        let view = table.full_view();
        let prompts = PromptSet::bundled();
        assert!(matches!(
            build_sql_prompt(&view, "q", &aug, &prompts),
            Err(SqlError::MissingAugmentation(_))
        ));
        assert!(matches!(
            load_into_engine(&table, &aug),
            Err(SqlError::MissingAugmentation(_))
        ));
    }

    #[test]
    fn load_coerces_by_schema_type() {
        let csv = "Name,Points,When\n\
                   A,3,\"June 4, 1999\"\n\
                   B,x,2001-02-03\n\
                   C,5,\n\
                   D,7,2002-03-04\n\
                   E,9,2003-04-05\n";
        let table = load_table("m", csv.as_bytes(), TableFormat::Csv).unwrap();
        let gateway = Gateway::new(Box::new(ScriptedBackend::new(Vec::new())));
        let aug = augment_table(&table, &gateway, &PromptSet::bundled(), AugmentMode::DeterministicOnly).unwrap();
        assert_eq!(aug.column("Points").unwrap().schema_type, SchemaType::Numerical);
        assert_eq!(aug.column("When").unwrap().schema_type, SchemaType::Date);

        let engine = load_into_engine(&table, &aug).unwrap();
        assert_eq!(engine.row_count(), 5);
        // WHEN is a keyword, so the column needs quoting.
        let out = engine.execute("SELECT Points, \"When\" FROM t ORDER BY Name").unwrap();
        let rendered: Vec<Vec<String>> =
            out.rows.iter().map(|r| r.iter().map(Value::render).collect()).collect();
        assert_eq!(
            rendered,
            vec![
                vec!["3".to_string(), "1999-06-04".to_string()],
                vec!["".to_string(), "2001-02-03".to_string()],
                vec!["5".to_string(), "".to_string()],
                vec!["7".to_string(), "2002-03-04".to_string()],
                vec!["9".to_string(), "2003-04-05".to_string()],
            ]
        );
    }

    #[test]
    fn full_table_loaded_not_only_sampled_rows() {
        let mut csv = String::from("Id,V\n");
        for i in 0..500 {
            csv.push_str(&format!("{i},{}\n", i * 2));
        }
        let table = load_table("big", csv.as_bytes(), TableFormat::Csv).unwrap();
        let gateway = Gateway::new(Box::new(ScriptedBackend::new(Vec::new())));
        let aug = augment_table(&table, &gateway, &PromptSet::bundled(), AugmentMode::DeterministicOnly).unwrap();
        let engine = load_into_engine(&table, &aug).unwrap();
        assert_eq!(engine.row_count(), 500);
        let out = engine.execute("SELECT COUNT(*) FROM t").unwrap();
        assert_eq!(out.rows[0][0], Value::Num(500.0));
    }

    #[test]
    fn extract_sql_prefers_fenced_block() {
        let response = "Here is the query:\n```sql\nSELECT a FROM t\n```\nDone.";
        assert_eq!(extract_sql(response).unwrap(), "SELECT a FROM t");
        let bare = "```\nSELECT b FROM t;\n```";
        assert_eq!(extract_sql(bare).unwrap(), "SELECT b FROM t;");
    }

    #[test]
    fn extract_sql_falls_back_to_longest_select() {
        let response = "SELECT a FROM t; SELECT a, b, c FROM t WHERE a > 1; commentary";
        assert_eq!(extract_sql(response).unwrap(), "SELECT a, b, c FROM t WHERE a > 1");
        assert_eq!(extract_sql("no sql here"), None);
        // Case-insensitive prefix.
        assert_eq!(extract_sql("select 1").unwrap(), "select 1");
    }

    fn gateway_with(rules: Vec<ScriptRule>) -> Gateway {
        Gateway::new(Box::new(ScriptedBackend::new(rules)))
    }

    #[test]
    fn first_attempt_success() {
        let (table, aug) = fixture();
        let view = table.full_view();
        let prompts = PromptSet::bundled();
        let gateway = gateway_with(vec![ScriptRule::new(
            StageLabel::SqlGen,
            vec!["```sql\nSELECT Team FROM t WHERE Score = 98\n```".to_string()],
        )]);
        let res =
            generate_and_execute(&table, &view, "who scored 98?", &aug, &gateway, &prompts, 1)
                .unwrap();
        assert_eq!(res.attempts.len(), 1);
        assert_eq!(res.attempts[0].outcome, AttemptOutcome::Ok);
        assert_eq!(res.final_sql, "SELECT Team FROM t WHERE Score = 98");
        let result = res.result.unwrap();
        assert_eq!(result.rows, vec![vec!["Eagles".to_string()]]);
    }

    #[test]
    fn repair_loop_recovers_from_bad_first_attempt() {
        let (table, aug) = fixture();
        let view = table.full_view();
        let prompts = PromptSet::bundled();
        // First response references a bad column; the repair prompt carries
        // the engine error and the second response fixes it. The repair rule
        // comes first because the repair prompt still embeds the base prompt.
        let gateway = gateway_with(vec![
            ScriptRule::new(
                StageLabel::SqlGen,
                vec!["```sql\nSELECT Team FROM t ORDER BY Score DESC\n```".to_string()],
            )
            .when_contains("no such column"),
            ScriptRule::new(
                StageLabel::SqlGen,
                vec!["```sql\nSELECT Nope FROM t\n```".to_string()],
            ),
        ]);
        let res = generate_and_execute(&table, &view, "best team?", &aug, &gateway, &prompts, 1)
            .unwrap();
        assert_eq!(res.attempts.len(), 2);
        assert_eq!(res.attempts[0].outcome, AttemptOutcome::ExecError);
        assert_eq!(res.attempts[1].outcome, AttemptOutcome::Ok);
        assert_eq!(
            res.result.unwrap().rows,
            vec![
                vec!["Eagles".to_string()],
                vec!["Hawks".to_string()],
                vec!["Owls".to_string()],
            ]
        );
    }

    #[test]
    fn exhausted_repairs_carry_all_attempts() {
        let (table, aug) = fixture();
        let view = table.full_view();
        let prompts = PromptSet::bundled();
        let gateway = gateway_with(vec![ScriptRule::new(
            StageLabel::SqlGen,
            vec!["```sql\nDROP TABLE t\n```".to_string()],
        )]);
        let err = generate_and_execute(&table, &view, "q", &aug, &gateway, &prompts, 1)
            .unwrap_err();
        match err {
            SqlError::GenerationFailed { attempts } => {
                assert_eq!(attempts.len(), 2);
                assert!(attempts
                    .iter()
                    .all(|a| a.outcome == AttemptOutcome::ParseError));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_result_is_success() {
        let (table, aug) = fixture();
        let view = table.full_view();
        let prompts = PromptSet::bundled();
        let gateway = gateway_with(vec![ScriptRule::new(
            StageLabel::SqlGen,
            vec!["```sql\nSELECT Team FROM t WHERE Score > 1000\n```".to_string()],
        )]);
        let res = generate_and_execute(&table, &view, "q", &aug, &gateway, &prompts, 1).unwrap();
        assert_eq!(res.attempts.len(), 1);
        assert_eq!(res.attempts[0].outcome, AttemptOutcome::EmptyResult);
        let result = res.result.unwrap();
        assert!(result.is_empty());
        assert_eq!(result.headers, vec!["Team"]);
    }

    #[test]
    fn result_table_serialization() {
        let rt = ResultTable {
            headers: vec!["a".into(), "b<c".into()],
            rows: vec![vec!["1".into(), "x&y".into()]],
        };
        let html = rt.to_html();
        assert!(html.contains("<th>b&lt;c</th>"));
        assert!(html.contains("<td>x&amp;y</td>"));
        let json = rt.to_json_rows();
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["header"][1], "b<c");
        assert_eq!(parsed["rows"][0][1], "x&y");
    }

    #[test]
    fn non_select_rejected_before_execution() {
        let (table, aug) = fixture();
        let engine = load_into_engine(&table, &aug).unwrap();
        for sql in [
            "INSERT INTO t VALUES (1, 2, 3)",
            "UPDATE t SET Score = 0",
            "DELETE FROM t",
            "SELECT 1; DELETE FROM t",
        ] {
            let err = engine.execute(sql).unwrap_err();
            assert_eq!(err.kind, ErrorKind::Parse, "{sql}");
        }
        // The table is untouched afterwards.
        let out = engine.execute("SELECT COUNT(*) FROM t").unwrap();
        assert_eq!(out.rows[0][0], Value::Num(3.0));
    }
}
