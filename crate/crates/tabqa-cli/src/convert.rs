//! Converters from benchmark-native layouts to the manifest + CSV layout
//! the harness consumes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::{Args, Subcommand};
use serde_json::{json, Value};
use tabqa_core::table::{load_table, TableFormat};
use tabqa_core::Table;

use crate::error::CliError;

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[command(subcommand)]
    pub source: ConvertSource,
}

#[derive(Debug, Subcommand)]
pub enum ConvertSource {
    /// WikiTableQuestions: examples TSV (id, utterance, context, targetValue)
    /// plus table files under the dataset root.
    Wikitq {
        /// Examples TSV file.
        examples: PathBuf,
        /// Dataset root that the context paths are relative to.
        root: PathBuf,
        /// Output directory for manifest.jsonl and tables/.
        #[arg(long)]
        out: PathBuf,
    },
    /// TabFact: statement collection JSON plus '#'-delimited table files.
    Tabfact {
        /// Statement collection ({table_file: [statements, labels, caption]}).
        statements: PathBuf,
        /// Directory holding the '#'-delimited table files.
        tables: PathBuf,
        /// Output directory for manifest.jsonl and tables/.
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn cmd_convert(args: &ConvertArgs) -> Result<(), CliError> {
    match &args.source {
        ConvertSource::Wikitq { examples, root, out } => convert_wikitq(examples, root, out),
        ConvertSource::Tabfact { statements, tables, out } => {
            convert_tabfact(statements, tables, out)
        }
    }
}

fn convert_wikitq(examples: &Path, root: &Path, out: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(examples)
        .map_err(|e| CliError::usage(anyhow!("cannot read {}: {e}", examples.display())))?;
    let tables_out = out.join("tables");
    fs::create_dir_all(&tables_out)
        .map_err(|e| CliError::usage(anyhow!("cannot create {}: {e}", tables_out.display())))?;

    let mut manifest = String::new();
    let mut converted: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut count = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if lineno == 0 && fields.first() == Some(&"id") {
            continue;
        }
        if fields.len() < 4 {
            return Err(CliError::usage(anyhow!(
                "{} line {}: expected 4 tab-separated fields, got {}",
                examples.display(),
                lineno + 1,
                fields.len()
            )));
        }
        let (utterance, context, target) = (fields[1], fields[2], fields[3]);
        let table_id = table_id_from_path(context);
        let source = root.join(context);
        match converted.get(&table_id) {
            Some(previous) if previous != &source => {
                return Err(CliError::usage(anyhow!(
                    "table id `{table_id}` maps to both {} and {}",
                    previous.display(),
                    source.display()
                )));
            }
            Some(_) => {}
            None => {
                let table = load_wikitq_table(&source, &table_id)?;
                write_table_csv(&tables_out, &table_id, &table)?;
                converted.insert(table_id.clone(), source);
            }
        }
        let answers: Vec<&str> = target.split('|').collect();
        manifest.push_str(
            &serde_json::to_string(&json!({
                "table_id": table_id,
                "question": utterance,
                "answers": answers,
            }))
            .expect("manifest line serializes"),
        );
        manifest.push('\n');
        count += 1;
    }
    if count == 0 {
        return Err(CliError::usage(anyhow!("{} has no examples", examples.display())));
    }
    write_manifest(out, &manifest)?;
    println!("{count} examples, {} tables -> {}", converted.len(), out.display());
    Ok(())
}

fn convert_tabfact(statements: &Path, tables_dir: &Path, out: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(statements)
        .map_err(|e| CliError::usage(anyhow!("cannot read {}: {e}", statements.display())))?;
    let doc: BTreeMap<String, Value> = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(anyhow!("{}: {e}", statements.display())))?;
    let tables_out = out.join("tables");
    fs::create_dir_all(&tables_out)
        .map_err(|e| CliError::usage(anyhow!("cannot create {}: {e}", tables_out.display())))?;

    let mut manifest = String::new();
    let mut converted: BTreeMap<String, String> = BTreeMap::new();
    let mut count = 0usize;
    for (file_name, entry) in &doc {
        let parts = entry.as_array().filter(|a| a.len() >= 2).ok_or_else(|| {
            CliError::usage(anyhow!(
                "{}: entry `{file_name}` is not [statements, labels, ..]",
                statements.display()
            ))
        })?;
        let stmts = string_array(&parts[0])
            .map_err(|detail| CliError::usage(anyhow!("entry `{file_name}`: {detail}")))?;
        let labels = label_array(&parts[1])
            .map_err(|detail| CliError::usage(anyhow!("entry `{file_name}`: {detail}")))?;
        if stmts.len() != labels.len() {
            return Err(CliError::usage(anyhow!(
                "entry `{file_name}`: {} statements but {} labels",
                stmts.len(),
                labels.len()
            )));
        }
        let table_id = table_id_from_path(file_name);
        if let Some(previous) = converted.get(&table_id) {
            if previous != file_name {
                return Err(CliError::usage(anyhow!(
                    "table id `{table_id}` maps to both {previous} and {file_name}"
                )));
            }
        } else {
            let table = load_hash_table(&tables_dir.join(file_name), &table_id)?;
            write_table_csv(&tables_out, &table_id, &table)?;
            converted.insert(table_id.clone(), file_name.clone());
        }
        for (stmt, label) in stmts.iter().zip(&labels) {
            manifest.push_str(
                &serde_json::to_string(&json!({
                    "table_id": table_id,
                    "question": stmt,
                    "label": label,
                }))
                .expect("manifest line serializes"),
            );
            manifest.push('\n');
            count += 1;
        }
    }
    if count == 0 {
        return Err(CliError::usage(anyhow!("{} has no examples", statements.display())));
    }
    write_manifest(out, &manifest)?;
    println!("{count} examples, {} tables -> {}", converted.len(), out.display());
    Ok(())
}

/// Stable table id from a dataset-relative path: known extensions stripped,
/// separators collapsed to single dashes.
fn table_id_from_path(context: &str) -> String {
    let mut stem = context.trim_start_matches("./");
    loop {
        let stripped = ["csv", "tsv", "html", "json"]
            .iter()
            .find_map(|ext| stem.strip_suffix(&format!(".{ext}")));
        match stripped {
            Some(rest) => stem = rest,
            None => break,
        }
    }
    let mut id = String::new();
    for c in stem.chars() {
        if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
            id.push(c);
        } else if !id.is_empty() && !id.ends_with('-') {
            id.push('-');
        }
    }
    let id = id.trim_matches('-').to_string();
    if id.is_empty() {
        "table".to_string()
    } else {
        id
    }
}

fn load_wikitq_table(path: &Path, id: &str) -> Result<Table, CliError> {
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") => TableFormat::Tsv,
        _ => TableFormat::Csv,
    };
    let file = fs::File::open(path)
        .map_err(|e| CliError::usage(anyhow!("cannot open table {}: {e}", path.display())))?;
    load_table(id, file, format)
        .map_err(|e| CliError::usage(anyhow!("cannot load {}: {e}", path.display())))
}

/// TabFact stores tables as '#'-separated rows without any quoting.
fn load_hash_table(path: &Path, id: &str) -> Result<Table, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(anyhow!("cannot read table {}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = match lines.next() {
        Some(l) => l.split('#').map(str::to_string).collect(),
        None => return Err(CliError::usage(anyhow!("{} is empty", path.display()))),
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row: Vec<String> = line.split('#').map(str::to_string).collect();
        if row.len() != header.len() {
            return Err(CliError::usage(anyhow!(
                "{} row {}: {} fields, header has {}",
                path.display(),
                i + 1,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Table::from_rows(id, None, header, rows)
        .map_err(|e| CliError::usage(anyhow!("{}: {e}", path.display())))
}

fn string_array(value: &Value) -> Result<Vec<String>, String> {
    value
        .as_array()
        .ok_or_else(|| "expected an array of statements".to_string())?
        .iter()
        .map(|v| v.as_str().map(str::to_string).ok_or_else(|| format!("not a string: {v}")))
        .collect()
}

fn label_array(value: &Value) -> Result<Vec<bool>, String> {
    value
        .as_array()
        .ok_or_else(|| "expected an array of labels".to_string())?
        .iter()
        .map(|v| match v {
            Value::Bool(b) => Ok(*b),
            Value::Number(n) if n.as_i64() == Some(0) => Ok(false),
            Value::Number(n) if n.as_i64() == Some(1) => Ok(true),
            other => Err(format!("label must be 0/1 or a boolean, got {other}")),
        })
        .collect()
}

fn write_table_csv(tables_out: &Path, table_id: &str, table: &Table) -> Result<(), CliError> {
    let path = tables_out.join(format!("{table_id}.csv"));
    fs::write(&path, table.to_csv())
        .map_err(|e| CliError::usage(anyhow!("cannot write {}: {e}", path.display())))
}

fn write_manifest(out: &Path, manifest: &str) -> Result<(), CliError> {
    let path = out.join("manifest.jsonl");
    fs::write(&path, manifest)
        .map_err(|e| CliError::usage(anyhow!("cannot write {}: {e}", path.display())))
}
