#!/usr/bin/env python3
"""Generates the SQL fidelity corpus: fixtures/sql/source.csv plus
fixtures/sql/corpus.json with expected result rows computed by sqlite3.

sqlite is the reference implementation for the query engine, so expected
rows come from executing every query against an in-memory sqlite database
loaded exactly the way the engine loads the CSV: numeric columns as REAL
(empty cells NULL), date columns as ISO text (empty cells NULL), text
columns verbatim.

Guards that keep the two engines comparable:
- numeric columns are declared REAL so division and comparison semantics
  match an all-float engine (sqlite integer/integer would truncate);
- no bare integer/integer literal division in any query;
- no casting REAL to TEXT and no || on numeric columns (the engines render
  floats differently in text position: sqlite keeps a trailing .0);
- values stay well inside 1e15 so integral floats render as integers in
  both canonicalizations;
- every query marked ordered carries a total ORDER BY key; GROUP BY and
  DISTINCT queries without one are marked unordered and compared as
  multisets.
"""

import csv
import json
import sqlite3
from pathlib import Path

OUT_DIR = Path(__file__).resolve().parent.parent / "fixtures" / "sql"

HEADER = ["id", "team", "opponent", "score", "attendance", "played", "venue", "result"]
NUMERIC = {"id", "score", "attendance"}
DATE = {"played"}

ROWS = [
    ["1", "Eagles", "Bears", "98.5", "21000", "2021-03-01", "Delta Arena", "W"],
    ["2", "hawks", "Lions", "83.25", "9500", "2021-03-02", "North Field", "L"],
    ["3", "Owls", "Bears", "77", "12000", "2021-03-05", "O'Hare Arena", "L"],
    ["4", "Crows", "Tigers", "91.5", "15500", "2021-03-07", "Harbor Dome", "W"],
    ["5", "Eagles", "Lions", "88", "20000", "2021-03-09", "Delta Arena", "W"],
    ["6", "Falcons", "Tigers", "69.75", "8000", "2021-03-11", "South Bowl", "L"],
    ["7", "Owls", "Wolves", "102", "13500", "2021-03-14", "O'Hare Arena", "W"],
    ["8", "hawks", "Bears", "", "9000", "2021-03-16", "North Field", "L"],
    ["9", "Crows", "Wolves", "84.5", "16000", "2021-03-18", "Harbor Dome", "L"],
    ["10", "Eagles", "Tigers", "95", "22000", "2021-03-21", "Delta Arena", "W"],
    ["11", "Falcons", "Lions", "73.5", "", "2021-03-23", "South Bowl", "L"],
    ["12", "Owls", "Bears", "81", "11000", "2021-03-25", "O'Hare Arena", "L"],
    ["13", "Crows", "Lions", "79.25", "14000", "2021-03-28", "Harbor Dome", "L"],
    ["14", "Eagles", "Wolves", "101.5", "21500", "2021-04-01", "Delta Arena", "W"],
    ["15", "hawks", "Tigers", "87", "9800", "2021-04-03", "North Field", "W"],
    ["16", "Falcons", "Bears", "", "8200", "2021-04-06", "South Bowl", "L"],
    ["17", "Owls", "Lions", "93.5", "12800", "2021-04-08", "O'Hare Arena", "W"],
    ["18", "Crows", "Bears", "86", "15000", "", "Harbor Dome", "W"],
    ["19", "Eagles", "Lions", "90.5", "20500", "2021-04-12", "Delta Arena", "L"],
    ["20", "Falcons", "Wolves", "75", "8400", "2021-04-15", "South Bowl", "L"],
    ["21", "hawks", "Wolves", "89.25", "9300", "2021-04-17", "North Field", "W"],
    ["22", "Owls", "Tigers", "97", "13100", "2021-04-20", "O'Hare Arena", "W"],
    ["23", "Crows", "Wolves", "82.5", "14800", "2021-04-22", "Harbor Dome", "L"],
    ["24", "Eagles", "Bears", "99", "21800", "2021-04-25", "Delta Arena", "W"],
]

# (name, sql, ordered)
QUERIES = [
    ("select_all", "SELECT * FROM t ORDER BY id", True),
    ("project_columns", "SELECT team, score FROM t ORDER BY id", True),
    ("where_eq_number", "SELECT id FROM t WHERE score = 98.5 ORDER BY id", True),
    ("where_text_vs_numeric_column", "SELECT id FROM t WHERE score = '77' ORDER BY id", True),
    ("where_greater", "SELECT id, score FROM t WHERE score > 90 ORDER BY id", True),
    (
        "where_and_or",
        "SELECT id FROM t WHERE (result = 'W' AND score > 80) OR attendance > 21000 ORDER BY id",
        True,
    ),
    ("not_equal_both_spellings", "SELECT id FROM t WHERE result <> 'W' AND result != '' ORDER BY id", True),
    ("between_range", "SELECT id FROM t WHERE score BETWEEN 80 AND 90 ORDER BY id", True),
    ("not_between", "SELECT id FROM t WHERE score NOT BETWEEN 75 AND 100 ORDER BY id", True),
    ("in_list", "SELECT id FROM t WHERE team IN ('Eagles', 'Owls') ORDER BY id", True),
    ("not_in_list", "SELECT id FROM t WHERE team NOT IN ('Eagles') AND id <= 10 ORDER BY id", True),
    ("is_null_rows", "SELECT id FROM t WHERE score IS NULL ORDER BY id", True),
    ("is_not_null_rows", "SELECT id FROM t WHERE attendance IS NOT NULL AND id >= 20 ORDER BY id", True),
    ("null_never_compares", "SELECT id FROM t WHERE score > 0 OR score <= 0 ORDER BY id", True),
    ("coalesce_fills", "SELECT id, coalesce(score, 0) FROM t WHERE id BETWEEN 6 AND 9 ORDER BY id", True),
    ("ifnull_inside_sum", "SELECT sum(ifnull(score, 0)) FROM t", True),
    ("like_case_insensitive", "SELECT id FROM t WHERE team LIKE 'eag%' ORDER BY id", True),
    ("like_underscore", "SELECT id FROM t WHERE team LIKE '_awks' ORDER BY id", True),
    ("not_like", "SELECT id FROM t WHERE venue NOT LIKE '%arena%' ORDER BY id", True),
    ("empty_result_ok", "SELECT id FROM t WHERE score > 1000 ORDER BY id", True),
    ("count_star", "SELECT count(*) FROM t", True),
    ("count_column_skips_null", "SELECT count(score) FROM t", True),
    ("count_distinct", "SELECT count(DISTINCT team) FROM t", True),
    ("sum_and_avg", "SELECT sum(score), avg(score) FROM t", True),
    ("min_max_numeric", "SELECT min(score), max(score) FROM t", True),
    ("min_max_text_binary_collation", "SELECT min(team), max(team) FROM t", True),
    ("group_count_ordered", "SELECT team, count(*) FROM t GROUP BY team ORDER BY team", True),
    (
        "group_sum_having",
        "SELECT team, sum(score) FROM t GROUP BY team HAVING count(*) >= 4 ORDER BY team",
        True,
    ),
    ("group_unordered", "SELECT result, count(*) FROM t GROUP BY result", False),
    (
        "group_avg_where",
        "SELECT team, avg(attendance) FROM t WHERE result = 'W' GROUP BY team ORDER BY team",
        True,
    ),
    ("aggregate_on_empty_input", "SELECT count(*), sum(score), min(score) FROM t WHERE id > 900", True),
    ("arithmetic_add_mul", "SELECT id, score + 10, score * 2 FROM t WHERE id <= 3 ORDER BY id", True),
    ("real_division", "SELECT id, score / 2 FROM t WHERE id <= 4 ORDER BY id", True),
    ("division_by_zero_is_null", "SELECT id, score / 0 FROM t WHERE id = 1", True),
    ("modulo_truncates", "SELECT id, attendance % 1000 FROM t WHERE id <= 4 ORDER BY id", True),
    ("unary_minus", "SELECT id, -score FROM t WHERE id <= 3 ORDER BY id", True),
    (
        "case_searched",
        "SELECT id, CASE WHEN score >= 90 THEN 'high' WHEN score >= 80 THEN 'mid' ELSE 'low' END "
        "FROM t WHERE score IS NOT NULL AND id <= 8 ORDER BY id",
        True,
    ),
    (
        "case_simple",
        "SELECT id, CASE result WHEN 'W' THEN 1 ELSE 0 END FROM t WHERE id <= 6 ORDER BY id",
        True,
    ),
    ("concat_text_columns", "SELECT team || ' vs ' || opponent FROM t WHERE id <= 3 ORDER BY id", True),
    (
        "cast_real_to_integer",
        "SELECT id, CAST(score AS INTEGER) FROM t WHERE score IS NOT NULL AND id <= 5 ORDER BY id",
        True,
    ),
    ("upper_lower", "SELECT upper(team), lower(venue) FROM t WHERE id = 1", True),
    ("length_of_text", "SELECT id, length(team) FROM t WHERE id <= 4 ORDER BY id", True),
    ("abs_and_round", "SELECT abs(-5.5), round(score) FROM t WHERE id = 2", True),
    ("substr_prefix", "SELECT substr(team, 1, 3) FROM t WHERE id <= 3 ORDER BY id", True),
    ("replace_and_trim", "SELECT replace(venue, ' ', '_'), trim('  pad  ') FROM t WHERE id = 1", True),
    ("nullif_blanks_a_value", "SELECT id, nullif(result, 'W') FROM t WHERE id <= 4 ORDER BY id", True),
    ("scalar_two_arg_max", "SELECT id, max(score, 80) FROM t WHERE id <= 3 ORDER BY id", True),
    ("quoted_apostrophe_literal", "SELECT id FROM t WHERE venue = 'O''Hare Arena' ORDER BY id", True),
    ("date_text_range", "SELECT id FROM t WHERE played >= '2021-04-01' AND played <= '2021-04-30' ORDER BY id", True),
    ("order_desc_with_tiebreak", "SELECT id, score FROM t WHERE score IS NOT NULL ORDER BY score DESC, id", True),
    ("order_nulls_first_asc", "SELECT id, score FROM t ORDER BY score, id", True),
    ("order_by_ordinal", "SELECT team, score FROM t WHERE id <= 5 ORDER BY 2 DESC, 1", True),
    (
        "order_by_alias",
        "SELECT id, score * 2 AS doubled FROM t WHERE score IS NOT NULL ORDER BY doubled DESC, id LIMIT 3",
        True,
    ),
    ("limit_offset_keyword", "SELECT id FROM t ORDER BY id LIMIT 5 OFFSET 3", True),
    ("limit_comma_form", "SELECT id FROM t ORDER BY id LIMIT 3, 4", True),
    ("negative_limit_unbounded", "SELECT id FROM t WHERE id > 20 ORDER BY id LIMIT -1", True),
    ("distinct_unordered", "SELECT DISTINCT team FROM t", False),
    ("distinct_pairs_unordered", "SELECT DISTINCT venue, result FROM t", False),
]

# Statements the engine must refuse outright (read-only, single SELECT).
REJECTED = [
    "INSERT INTO t (id) VALUES (99)",
    "UPDATE t SET score = 0",
    "DELETE FROM t",
    "DROP TABLE t",
    "CREATE TABLE x (a INTEGER)",
    "CREATE INDEX idx ON t (id)",
    "ALTER TABLE t ADD COLUMN z TEXT",
    "PRAGMA table_info(t)",
    "ATTACH DATABASE 'x.db' AS other",
    "VACUUM",
    "BEGIN",
    "REPLACE INTO t VALUES (1, 'a', 'b', 1, 1, '', '', 'W')",
    "WITH c AS (SELECT 1) SELECT * FROM c",
    "EXPLAIN SELECT * FROM t",
    "SELECT 1; SELECT 2",
    "SELECT * FROM t; DROP TABLE t",
]


def canon(value) -> str:
    """Matches the engine's rendering: NULL -> empty string, integral
    floats -> integer form, other floats -> shortest round-trip."""
    if value is None:
        return ""
    if isinstance(value, float):
        if value == int(value) and abs(value) < 1e15:
            return str(int(value))
        return repr(value)
    if isinstance(value, int):
        return str(value)
    return str(value)


def build_db() -> sqlite3.Connection:
    conn = sqlite3.connect(":memory:")
    decls = []
    for name in HEADER:
        if name in NUMERIC:
            decls.append(f"{name} REAL")
        else:
            decls.append(f"{name} TEXT")
    conn.execute(f"CREATE TABLE t ({', '.join(decls)})")
    for row in ROWS:
        values = []
        for name, cell in zip(HEADER, row):
            if name in NUMERIC:
                values.append(None if cell == "" else float(cell))
            elif name in DATE:
                values.append(None if cell == "" else cell)
            else:
                values.append(cell)
        conn.execute(
            f"INSERT INTO t VALUES ({', '.join('?' * len(HEADER))})", values
        )
    return conn


def main() -> None:
    OUT_DIR.mkdir(parents=True, exist_ok=True)

    with open(OUT_DIR / "source.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(HEADER)
        writer.writerows(ROWS)

    conn = build_db()
    entries = []
    for name, sql, ordered in QUERIES:
        rows = [[canon(v) for v in row] for row in conn.execute(sql).fetchall()]
        entries.append({"name": name, "sql": sql, "ordered": ordered, "rows": rows})

    corpus = {
        "source": "source.csv",
        "queries": entries,
        "rejected": REJECTED,
    }
    with open(OUT_DIR / "corpus.json", "w") as f:
        json.dump(corpus, f, indent=2)
        f.write("\n")

    print(f"wrote {len(ROWS)} source rows, {len(entries)} queries, {len(REJECTED)} rejected statements")


if __name__ == "__main__":
    main()
