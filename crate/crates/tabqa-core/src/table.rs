//! Rectangular, immutable, column-major tables and index-based views.
//!
//! A [`Table`] is the single source of truth the rest of the pipeline reads.
//! Views select rows and columns by index without copying cell data, and the
//! HTML serialization of a view is what downstream prompts embed.

use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::{parse_cell, Parsed};

#[derive(Debug, Error)]
pub enum TableError {
    #[error("failed to decode input: {0}")]
    Decode(String),
    #[error("row {0} has a different cell count than the header")]
    RaggedRow(usize),
    #[error("table has no columns")]
    Empty,
    #[error("row index {0} out of range")]
    RowIndex(usize),
    #[error("duplicate row index {0} in view")]
    DuplicateRow(usize),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("duplicate column `{0}` in view")]
    DuplicateColumn(String),
}

/// Input formats accepted by [`load_table`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Tsv,
    JsonRows,
}

#[derive(Debug, Clone)]
pub struct CellValue {
    raw: String,
    parsed: Option<Parsed>,
}

impl CellValue {
    pub fn new(raw: String) -> Self {
        let parsed = parse_cell(&raw);
        CellValue { raw, parsed }
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn parsed(&self) -> Option<Parsed> {
        self.parsed
    }

    pub fn is_empty(&self) -> bool {
        self.raw.trim().is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Column {
    raw_name: String,
    sanitized_name: String,
    cells: Vec<CellValue>,
}

impl Column {
    pub fn raw_name(&self) -> &str {
        &self.raw_name
    }

    pub fn sanitized_name(&self) -> &str {
        &self.sanitized_name
    }

    pub fn cells(&self) -> &[CellValue] {
        &self.cells
    }
}

/// Maps a raw header to an identifier matching `[A-Za-z_][A-Za-z0-9_]*`.
/// Idempotent; uniqueness across a table is handled separately by suffixing.
pub fn sanitize_name(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for c in raw.trim().chars() {
        if c.is_ascii_alphanumeric() || c == '_' {
            out.push(c);
        } else {
            out.push('_');
        }
    }
    if out.is_empty() {
        return "col".to_string();
    }
    if out.as_bytes()[0].is_ascii_digit() {
        out.insert(0, '_');
    }
    out
}

fn unique_names(raws: &[String]) -> Vec<String> {
    let mut used = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(raws.len());
    for raw in raws {
        let base = sanitize_name(raw);
        let mut candidate = base.clone();
        let mut suffix = 2;
        while !used.insert(candidate.clone()) {
            candidate = format!("{base}_{suffix}");
            suffix += 1;
        }
        out.push(candidate);
    }
    out
}

#[derive(Debug)]
pub struct Table {
    id: String,
    title: Option<String>,
    columns: Vec<Column>,
    row_count: usize,
}

impl Table {
    /// Builds a validated table from a header and row-major cell data.
    pub fn from_rows(
        id: impl Into<String>,
        title: Option<String>,
        header: Vec<String>,
        rows: Vec<Vec<String>>,
    ) -> Result<Self, TableError> {
        if header.is_empty() {
            return Err(TableError::Empty);
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != header.len() {
                return Err(TableError::RaggedRow(i));
            }
        }
        let sanitized = unique_names(&header);
        let row_count = rows.len();
        let columns = header
            .into_iter()
            .zip(sanitized)
            .enumerate()
            .map(|(c, (raw_name, sanitized_name))| Column {
                raw_name,
                sanitized_name,
                cells: rows.iter().map(|row| CellValue::new(row[c].clone())).collect(),
            })
            .collect();
        Ok(Table { id: id.into(), title, columns, row_count })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn title(&self) -> Option<&str> {
        self.title.as_deref()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn cell_count(&self) -> usize {
        self.row_count * self.columns.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> &CellValue {
        &self.columns[col].cells[row]
    }

    /// Finds a column by raw or sanitized name, case-insensitively.
    pub fn find_column(&self, name: &str) -> Option<&Column> {
        let needle = name.trim().to_ascii_lowercase();
        self.columns.iter().find(|c| {
            c.sanitized_name.to_ascii_lowercase() == needle
                || c.raw_name.trim().to_ascii_lowercase() == needle
        })
    }

    /// Constructs a validated view. Row order follows the caller; column
    /// order always follows the table regardless of the requested order.
    pub fn view(&self, rows: &[usize], cols: &[String]) -> Result<SubTableView<'_>, TableError> {
        let mut seen_rows = std::collections::HashSet::new();
        for &r in rows {
            if r >= self.row_count {
                return Err(TableError::RowIndex(r));
            }
            if !seen_rows.insert(r) {
                return Err(TableError::DuplicateRow(r));
            }
        }
        let mut wanted = std::collections::HashSet::new();
        for name in cols {
            let col = self
                .columns
                .iter()
                .find(|c| c.sanitized_name == *name)
                .ok_or_else(|| TableError::UnknownColumn(name.clone()))?;
            if !wanted.insert(col.sanitized_name.clone()) {
                return Err(TableError::DuplicateColumn(name.clone()));
            }
        }
        let column_names = self
            .columns
            .iter()
            .filter(|c| wanted.contains(&c.sanitized_name))
            .map(|c| c.sanitized_name.clone())
            .collect();
        Ok(SubTableView { parent: self, row_indices: rows.to_vec(), column_names })
    }

    /// View over every row and column.
    pub fn full_view(&self) -> SubTableView<'_> {
        SubTableView {
            parent: self,
            row_indices: (0..self.row_count).collect(),
            column_names: self.columns.iter().map(|c| c.sanitized_name.clone()).collect(),
        }
    }

    /// Row-major raw cells, useful for serialization and perturbation.
    pub fn row(&self, index: usize) -> Vec<&str> {
        self.columns.iter().map(|c| c.cells[index].raw()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|c| c.raw_name.as_str())).expect("write header");
        for r in 0..self.row_count {
            w.write_record(self.row(r)).expect("write row");
        }
        String::from_utf8(w.into_inner().expect("flush csv")).expect("csv is utf-8")
    }
}

/// An ordered selection of rows and columns over a parent table.
#[derive(Debug, Clone)]
pub struct SubTableView<'a> {
    parent: &'a Table,
    row_indices: Vec<usize>,
    column_names: Vec<String>,
}

impl<'a> SubTableView<'a> {
    pub fn parent(&self) -> &'a Table {
        self.parent
    }

    pub fn row_indices(&self) -> &[usize] {
        &self.row_indices
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn selected_columns(&self) -> Vec<&'a Column> {
        self.column_names
            .iter()
            .map(|n| {
                self.parent
                    .columns
                    .iter()
                    .find(|c| c.sanitized_name == *n)
                    .expect("view column exists in parent")
            })
            .collect()
    }
}

pub fn html_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

/// HTML form of a view: header row with raw column names, one `<tr>` per
/// selected row, all cell text escaped. Byte-deterministic.
pub fn serialize_html(view: &SubTableView<'_>) -> String {
    let cols = view.selected_columns();
    let mut out = String::new();
    out.push_str("<table>\n<thead>\n<tr>");
    for col in &cols {
        let _ = write!(out, "<th>{}</th>", html_escape(col.raw_name()));
    }
    out.push_str("</tr>\n</thead>\n<tbody>\n");
    for &r in view.row_indices() {
        out.push_str("<tr>");
        for col in &cols {
            let _ = write!(out, "<td>{}</td>", html_escape(col.cells()[r].raw()));
        }
        out.push_str("</tr>\n");
    }
    out.push_str("</tbody>\n</table>");
    out
}

/// Flat text form of a single row, fed to the embedder:
/// `name1: v1 | name2: v2 | ...` over all columns in order.
pub fn serialize_row_text(table: &Table, row: usize) -> Result<String, TableError> {
    if row >= table.row_count {
        return Err(TableError::RowIndex(row));
    }
    Ok(table
        .columns
        .iter()
        .map(|c| format!("{}: {}", c.raw_name, c.cells[row].raw()))
        .collect::<Vec<_>>()
        .join(" | "))
}

#[derive(Serialize, Deserialize)]
struct JsonRows {
    header: Vec<serde_json::Value>,
    rows: Vec<Vec<serde_json::Value>>,
}

fn json_scalar_to_string(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::Null => String::new(),
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Loads a table from a byte stream. The first record is the header;
/// duplicate headers are suffixed and ragged rows rejected.
pub fn load_table(
    id: impl Into<String>,
    mut source: impl Read,
    format: TableFormat,
) -> Result<Table, TableError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes).map_err(|e| TableError::Decode(e.to_string()))?;
    let text = String::from_utf8(bytes).map_err(|e| TableError::Decode(e.to_string()))?;
    match format {
        TableFormat::Csv => load_delimited(id, &text, b','),
        TableFormat::Tsv => load_delimited(id, &text, b'\t'),
        TableFormat::JsonRows => {
            let parsed: JsonRows =
                serde_json::from_str(&text).map_err(|e| TableError::Decode(e.to_string()))?;
            let header = parsed.header.iter().map(json_scalar_to_string).collect::<Vec<_>>();
            let rows = parsed
                .rows
                .iter()
                .map(|r| r.iter().map(json_scalar_to_string).collect())
                .collect();
            Table::from_rows(id, None, header, rows)
        }
    }
}

fn load_delimited(id: impl Into<String>, text: &str, delim: u8) -> Result<Table, TableError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delim)
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header: Vec<String> = match records.next() {
        Some(rec) => rec
            .map_err(|e| TableError::Decode(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect(),
        None => return Err(TableError::Empty),
    };
    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec.map_err(|e| TableError::Decode(e.to_string()))?;
        let row: Vec<String> = rec.iter().map(str::to_string).collect();
        if row.len() != header.len() {
            return Err(TableError::RaggedRow(i));
        }
        rows.push(row);
    }
    Table::from_rows(id, None, header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(csv: &str) -> Table {
        load_table("t", csv.as_bytes(), TableFormat::Csv).unwrap()
    }

    #[test]
    fn minimal_csv_loads() {
        let t = table("a,b\n1,x");
        assert_eq!(t.column_count(), 2);
        assert_eq!(t.row_count(), 1);
        assert_eq!(t.cell(0, 0).raw(), "1");
    }

    #[test]
    fn duplicate_headers_suffixed() {
        let t = table("a,a\n1,2");
        let names: Vec<_> = t.columns().iter().map(|c| c.sanitized_name()).collect();
        assert_eq!(names, ["a", "a_2"]);
    }

    #[test]
    fn ragged_row_rejected() {
        match load_table("t", "a,b\n1".as_bytes(), TableFormat::Csv) {
            Err(TableError::RaggedRow(0)) => {}
            other => panic!("expected RaggedRow(0), got {other:?}"),
        }
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(
            load_table("t", "".as_bytes(), TableFormat::Csv),
            Err(TableError::Empty)
        ));
    }

    #[test]
    fn json_rows_load() {
        let t = load_table(
            "t",
            r#"{"header": ["a", "b"], "rows": [[1, "x"], [2.5, null]]}"#.as_bytes(),
            TableFormat::JsonRows,
        )
        .unwrap();
        assert_eq!(t.row_count(), 2);
        assert_eq!(t.cell(0, 0).raw(), "1");
        assert_eq!(t.cell(1, 0).raw(), "2.5");
        assert_eq!(t.cell(1, 1).raw(), "");
    }

    #[test]
    fn tsv_load() {
        let t = load_table("t", "a\tb\n1\tx".as_bytes(), TableFormat::Tsv).unwrap();
        assert_eq!(t.cell(0, 1).raw(), "x");
    }

    #[test]
    fn html_escapes_cells() {
        let t = table("a\nx<y");
        let html = serialize_html(&t.full_view());
        assert!(html.contains("x&lt;y"));
    }

    #[test]
    fn html_empty_rows_is_header_only() {
        let t = table("a,b\n1,2");
        let view = t.view(&[], &["a".into(), "b".into()]).unwrap();
        let html = serialize_html(&view);
        assert!(html.contains("<thead>"));
        assert!(html.contains("<tbody>\n</tbody>"));
        assert_eq!(html.matches("<td>").count(), 0);
    }

    #[test]
    fn html_structural_counts() {
        let t = table("a,b\n1,2\n3,4\n5,6");
        let view = t.view(&[0, 2], &["a".into(), "b".into()]).unwrap();
        let html = serialize_html(&view);
        assert_eq!(html.matches("<th>").count(), 2);
        let body = html.split("<tbody>").nth(1).unwrap();
        assert_eq!(body.matches("<tr>").count(), 2);
    }

    #[test]
    fn row_text_format() {
        let t = table("a,b\n1,x\n2,");
        assert_eq!(serialize_row_text(&t, 0).unwrap(), "a: 1 | b: x");
        assert_eq!(serialize_row_text(&t, 1).unwrap(), "a: 2 | b: ");
        let single = table("a\n7");
        assert_eq!(serialize_row_text(&single, 0).unwrap(), "a: 7");
        assert!(matches!(serialize_row_text(&t, 9), Err(TableError::RowIndex(9))));
    }

    #[test]
    fn view_validation() {
        let t = table("a,b\n1,2\n3,4\n5,6");
        let v = t.view(&[2, 0], &["b".into()]).unwrap();
        assert_eq!(v.row_indices(), [2, 0]);
        assert!(matches!(
            t.view(&[0, 0], &["a".into()]),
            Err(TableError::DuplicateRow(0))
        ));
        assert!(matches!(
            t.view(&[0], &["zz".into()]),
            Err(TableError::UnknownColumn(_))
        ));
        assert!(matches!(
            t.view(&[9], &["a".into()]),
            Err(TableError::RowIndex(9))
        ));
    }

    #[test]
    fn view_columns_follow_table_order() {
        let t = table("a,b,c\n1,2,3");
        let v = t.view(&[0], &["c".into(), "a".into()]).unwrap();
        assert_eq!(v.column_names(), ["a", "c"]);
    }

    #[test]
    fn sanitize_basics() {
        assert_eq!(sanitize_name("Team Name"), "Team_Name");
        assert_eq!(sanitize_name("2col"), "_2col");
        assert_eq!(sanitize_name(""), "col");
        assert_eq!(sanitize_name("a-b&c"), "a_b_c");
    }

    proptest! {
        #[test]
        fn sanitize_idempotent(s in ".{0,30}") {
            let once = sanitize_name(&s);
            prop_assert_eq!(sanitize_name(&once), once.clone());
        }

        #[test]
        fn sanitize_matches_identifier_grammar(s in ".{0,30}") {
            let out = sanitize_name(&s);
            let mut chars = out.chars();
            let first = chars.next().unwrap();
            prop_assert!(first.is_ascii_alphabetic() || first == '_');
            prop_assert!(chars.all(|c| c.is_ascii_alphanumeric() || c == '_'));
        }
    }

    #[test]
    fn html_size_grows_with_selected_rows_not_parent() {
        let small = table("a,b\n1,2\n3,4");
        let mut big_csv = String::from("a,b\n");
        for i in 0..500 {
            big_csv.push_str(&format!("{i},{i}\n"));
        }
        let big = table(&big_csv);
        let cols = vec!["a".to_string(), "b".to_string()];
        let v_small = small.view(&[0], &cols).unwrap();
        let v_big = big.view(&[0], &cols).unwrap();
        let len_small = serialize_html(&v_small).len();
        let len_big = serialize_html(&v_big).len();
        assert!((len_small as i64 - len_big as i64).abs() < 8);
    }
}
