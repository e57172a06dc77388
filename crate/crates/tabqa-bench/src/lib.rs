//! Synthetic table builders shared by the Criterion benches.

use tabqa_core::Table;

/// A plausible mixed-type table: text, numeric, date, and code columns.
pub fn synthetic_table(rows: usize) -> Table {
    let names = ["Mill Grove", "Harbor Crest", "Stone Hollow", "Fern Valley", "Cedar Point"];
    let built: Vec<Vec<String>> = (0..rows)
        .map(|i| {
            vec![
                format!("{} {:03}", names[i % names.len()], i),
                (1_000 + i * 37).to_string(),
                format!("2022-{:02}-{:02}", 1 + i % 12, 1 + i % 28),
                format!("C-{i:04}"),
                format!("{}.{}", i % 500, i % 100),
            ]
        })
        .collect();
    Table::from_rows(
        "bench",
        None,
        ["name", "value", "when", "code", "ratio"].iter().map(|s| s.to_string()).collect(),
        built,
    )
    .unwrap()
}
