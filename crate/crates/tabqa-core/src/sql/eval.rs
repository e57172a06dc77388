//! In-memory evaluator for the parsed SELECT dialect.
//!
//! Semantics track SQLite where observable: three-valued logic, storage
//! class ordering Null < Num < Text, affinity-based comparison coercion,
//! division by zero yielding NULL, ASCII case-insensitive LIKE. The golden
//! corpus cross-checks these against a real SQLite process.

use std::cmp::Ordering;
use std::collections::HashMap;

use super::parser::{parse_select, BinOp, Expr, OrderItem, Select, SelectItem, TypeName, UnOp};
use crate::value::format_number;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Parse,
    Exec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalError {
    pub kind: ErrorKind,
    pub message: String,
}

impl std::fmt::Display for EvalError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for EvalError {}

fn exec_err(message: impl Into<String>) -> EvalError {
    EvalError { kind: ErrorKind::Exec, message: message.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Num(f64),
    Text(String),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// Rendering used for result cells: NULL becomes the empty string,
    /// integral numbers drop the fraction.
    pub fn render(&self) -> String {
        match self {
            Value::Null => String::new(),
            Value::Num(n) => format_number(*n),
            Value::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Affinity {
    None,
    Real,
    Text,
}

#[derive(Debug, Clone)]
pub struct EngineColumn {
    /// Name shown in result headers (the original column name).
    pub display_name: String,
    /// Sanitized name the generated SQL is expected to use.
    pub match_name: String,
    pub affinity: Affinity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutput {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Debug)]
pub struct Engine {
    table_name: String,
    columns: Vec<EngineColumn>,
    rows: Vec<Vec<Value>>,
}

/// Hashable identity for grouping and DISTINCT. Zero is normalized so
/// -0.0 and 0.0 land in the same group.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum GroupKey {
    Null,
    Num(u64),
    Text(String),
}

fn key_of(v: &Value) -> GroupKey {
    match v {
        Value::Null => GroupKey::Null,
        Value::Num(n) => {
            let n = if *n == 0.0 { 0.0 } else { *n };
            GroupKey::Num(n.to_bits())
        }
        Value::Text(s) => GroupKey::Text(s.clone()),
    }
}

/// Storage-class comparison: Null < Num < Text, numbers by value,
/// text by byte order.
fn cmp_storage(a: &Value, b: &Value) -> Ordering {
    match (a, b) {
        (Value::Null, Value::Null) => Ordering::Equal,
        (Value::Null, _) => Ordering::Less,
        (_, Value::Null) => Ordering::Greater,
        (Value::Num(x), Value::Num(y)) => {
            if x == y {
                Ordering::Equal
            } else {
                x.total_cmp(y)
            }
        }
        (Value::Num(_), Value::Text(_)) => Ordering::Less,
        (Value::Text(_), Value::Num(_)) => Ordering::Greater,
        (Value::Text(x), Value::Text(y)) => x.cmp(y),
    }
}

/// Longest numeric prefix, SQLite's text-to-number conversion. No digits
/// anywhere yields 0.0.
fn numeric_prefix(s: &str) -> f64 {
    let t = s.trim_start();
    let b = t.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i > int_start;
    let mut end = if digits { i } else { 0 };
    if i < b.len() && b[i] == b'.' {
        let frac_start = i + 1;
        let mut j = frac_start;
        while j < b.len() && b[j].is_ascii_digit() {
            j += 1;
        }
        if j > frac_start || digits {
            digits = digits || j > frac_start;
            end = j;
            i = j;
        }
    }
    if digits && i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        let exp_start = j;
        while j < b.len() && b[j].is_ascii_digit() {
            j += 1;
        }
        if j > exp_start {
            end = j;
        }
    }
    if !digits {
        return 0.0;
    }
    t[..end].parse().unwrap_or(0.0)
}

/// Whole-string numeric check used when numeric affinity is applied to a
/// text value. Stricter than `numeric_prefix`: the entire trimmed string
/// must be a number.
fn complete_number(s: &str) -> Option<f64> {
    let t = s.trim();
    if t.is_empty() {
        return None;
    }
    let b = t.as_bytes();
    let mut i = 0;
    if b[i] == b'+' || b[i] == b'-' {
        i += 1;
    }
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i > int_start;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        digits = digits || i > frac_start;
    }
    if !digits {
        return None;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        let exp_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == exp_start {
            return None;
        }
    }
    if i != b.len() {
        return None;
    }
    t.parse().ok()
}

fn to_number(v: &Value) -> Option<f64> {
    match v {
        Value::Null => None,
        Value::Num(n) => Some(*n),
        Value::Text(s) => Some(numeric_prefix(s)),
    }
}

fn to_text(v: &Value) -> Option<String> {
    match v {
        Value::Null => None,
        Value::Num(n) => Some(format_number(*n)),
        Value::Text(s) => Some(s.clone()),
    }
}

fn truthy(v: &Value) -> Option<bool> {
    match v {
        Value::Null => None,
        Value::Num(n) => Some(*n != 0.0),
        Value::Text(s) => Some(numeric_prefix(s) != 0.0),
    }
}

fn bool_value(b: Option<bool>) -> Value {
    match b {
        None => Value::Null,
        Some(true) => Value::Num(1.0),
        Some(false) => Value::Num(0.0),
    }
}

fn is_aggregate(name: &str, arg_count: usize, star: bool) -> bool {
    match name {
        "count" | "sum" | "avg" => true,
        // Single-argument min/max are aggregates; with two or more
        // arguments they are the scalar functions.
        "min" | "max" => star || arg_count == 1,
        _ => false,
    }
}

fn contains_aggregate(e: &Expr) -> bool {
    match e {
        Expr::Func { name, args, star, .. } => {
            if is_aggregate(name, args.len(), *star) {
                return true;
            }
            args.iter().any(contains_aggregate)
        }
        Expr::Unary(_, a) => contains_aggregate(a),
        Expr::Binary(_, a, b) => contains_aggregate(a) || contains_aggregate(b),
        Expr::Like { expr, pattern, .. } => {
            contains_aggregate(expr) || contains_aggregate(pattern)
        }
        Expr::InList { expr, list, .. } => {
            contains_aggregate(expr) || list.iter().any(contains_aggregate)
        }
        Expr::Between { expr, lo, hi, .. } => {
            contains_aggregate(expr) || contains_aggregate(lo) || contains_aggregate(hi)
        }
        Expr::IsNull { expr, .. } => contains_aggregate(expr),
        Expr::Case { base, whens, otherwise } => {
            base.as_deref().map_or(false, contains_aggregate)
                || whens.iter().any(|(c, v)| contains_aggregate(c) || contains_aggregate(v))
                || otherwise.as_deref().map_or(false, contains_aggregate)
        }
        Expr::Cast { expr, .. } => contains_aggregate(expr),
        Expr::Column { .. } | Expr::Number(_) | Expr::Str(_) | Expr::Null => false,
    }
}

fn like_match(pattern: &[char], text: &[char]) -> bool {
    let eq = |a: char, b: char| a.to_ascii_lowercase() == b.to_ascii_lowercase();
    if pattern.is_empty() {
        return text.is_empty();
    }
    match pattern[0] {
        '%' => (0..=text.len()).any(|k| like_match(&pattern[1..], &text[k..])),
        '_' => !text.is_empty() && like_match(&pattern[1..], &text[1..]),
        c => !text.is_empty() && eq(c, text[0]) && like_match(&pattern[1..], &text[1..]),
    }
}

#[derive(Clone, Copy)]
enum Scope<'a> {
    /// Evaluation against one base row (index into engine rows).
    Row(usize),
    /// Aggregate context: bare columns read the representative row,
    /// aggregates fold over the member rows.
    Group { rep: Option<usize>, members: &'a [usize] },
}

struct Exec<'e> {
    engine: &'e Engine,
    has_from: bool,
    alias: Option<String>,
}

impl Engine {
    pub fn new(
        table_name: impl Into<String>,
        columns: Vec<EngineColumn>,
        rows: Vec<Vec<Value>>,
    ) -> Result<Engine, EvalError> {
        let table_name = table_name.into();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(exec_err(format!(
                    "row {i} has {} values, expected {}",
                    row.len(),
                    columns.len()
                )));
            }
        }
        Ok(Engine { table_name, columns, rows })
    }

    pub fn table_name(&self) -> &str {
        &self.table_name
    }

    pub fn columns(&self) -> &[EngineColumn] {
        &self.columns
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn execute(&self, sql: &str) -> Result<QueryOutput, EvalError> {
        let select = parse_select(sql)
            .map_err(|message| EvalError { kind: ErrorKind::Parse, message })?;
        self.run(&select)
    }

    fn run(&self, select: &Select) -> Result<QueryOutput, EvalError> {
        let has_from = select.from_table.is_some();
        if let Some(t) = &select.from_table {
            if !t.eq_ignore_ascii_case(&self.table_name) {
                return Err(exec_err(format!("no such table: {t}")));
            }
        }
        let exec = Exec { engine: self, has_from, alias: select.from_alias.clone() };

        // WHERE filter.
        if let Some(w) = &select.where_clause {
            if contains_aggregate(w) {
                return Err(exec_err("aggregate functions are not allowed in WHERE"));
            }
        }
        let base_count = if has_from { self.rows.len() } else { 1 };
        let mut kept: Vec<usize> = Vec::with_capacity(base_count);
        for i in 0..base_count {
            let keep = match &select.where_clause {
                Some(w) => {
                    let v = exec.eval(w, Scope::Row(i))?;
                    truthy(&v) == Some(true)
                }
                None => true,
            };
            if keep {
                kept.push(i);
            }
        }

        // Grouping decision.
        let any_agg = select.items.iter().any(|item| match item {
            SelectItem::Star => false,
            SelectItem::Expr { expr, .. } => contains_aggregate(expr),
        }) || select.having.as_ref().map_or(false, |h| contains_aggregate(h))
            || select.order_by.iter().any(|o| contains_aggregate(&o.expr));

        for g in &select.group_by {
            if contains_aggregate(g) {
                return Err(exec_err("aggregate functions are not allowed in GROUP BY"));
            }
        }

        let mut groups: Vec<(Option<usize>, Vec<usize>)> = Vec::new();
        if !select.group_by.is_empty() {
            let mut seen: HashMap<Vec<GroupKey>, usize> = HashMap::new();
            for &i in &kept {
                let mut key = Vec::with_capacity(select.group_by.len());
                for g in &select.group_by {
                    key.push(key_of(&exec.eval(g, Scope::Row(i))?));
                }
                match seen.get(&key) {
                    Some(&gi) => groups[gi].1.push(i),
                    None => {
                        seen.insert(key, groups.len());
                        groups.push((Some(i), vec![i]));
                    }
                }
            }
        } else if any_agg {
            // One group over everything; zero matching rows still produce
            // one output row with NULL bare columns.
            groups.push((kept.first().copied(), kept.clone()));
        } else {
            groups.extend(kept.iter().map(|&i| (Some(i), vec![i])));
        }

        // HAVING filter (parser guarantees GROUP BY is present).
        if let Some(h) = &select.having {
            let mut filtered = Vec::with_capacity(groups.len());
            for (rep, members) in groups {
                let v = exec.eval(h, Scope::Group { rep, members: &members })?;
                if truthy(&v) == Some(true) {
                    filtered.push((rep, members));
                }
            }
            groups = filtered;
        }

        // Projection plan.
        enum Proj {
            Col(usize),
            Expr(Expr),
        }
        let mut plan: Vec<Proj> = Vec::new();
        let mut headers: Vec<String> = Vec::new();
        let mut aliases: Vec<Option<String>> = Vec::new();
        for item in &select.items {
            match item {
                SelectItem::Star => {
                    if !has_from {
                        return Err(exec_err("no tables specified"));
                    }
                    for (ci, col) in self.columns.iter().enumerate() {
                        plan.push(Proj::Col(ci));
                        headers.push(col.display_name.clone());
                        aliases.push(None);
                    }
                }
                SelectItem::Expr { expr, alias, text } => {
                    let header = if let Some(a) = alias {
                        a.clone()
                    } else if let Expr::Column { qualifier, name } = expr {
                        exec.check_qualifier(qualifier)?;
                        let ci = exec.resolve_column(name)?;
                        self.columns[ci].match_name.clone()
                    } else {
                        text.clone()
                    };
                    plan.push(Proj::Expr(expr.clone()));
                    headers.push(header);
                    aliases.push(alias.clone());
                }
            }
        }

        // Resolve ORDER BY targets against the projection.
        enum OrderTarget {
            Ordinal(usize),
            Expr(Expr),
        }
        let mut order_plan: Vec<(OrderTarget, bool)> = Vec::new();
        for OrderItem { expr, desc } in &select.order_by {
            let target = match expr {
                Expr::Number(n) if n.fract() == 0.0 && *n >= 1.0 => {
                    let pos = *n as usize;
                    if pos > plan.len() {
                        return Err(exec_err(format!("ORDER BY position {pos} out of range")));
                    }
                    OrderTarget::Ordinal(pos - 1)
                }
                Expr::Column { qualifier: None, name } => {
                    match aliases
                        .iter()
                        .position(|a| a.as_deref().is_some_and(|a| a.eq_ignore_ascii_case(name)))
                    {
                        Some(idx) => OrderTarget::Ordinal(idx),
                        None => OrderTarget::Expr(expr.clone()),
                    }
                }
                _ => OrderTarget::Expr(expr.clone()),
            };
            order_plan.push((target, *desc));
        }

        // Evaluate projection and sort keys per group.
        struct OutRow {
            cells: Vec<Value>,
            keys: Vec<Value>,
        }
        let mut out: Vec<OutRow> = Vec::with_capacity(groups.len());
        for (rep, members) in &groups {
            let scope = Scope::Group { rep: *rep, members };
            let mut cells = Vec::with_capacity(plan.len());
            for proj in &plan {
                let v = match proj {
                    Proj::Col(ci) => match rep {
                        Some(ri) => self.rows[*ri][*ci].clone(),
                        None => Value::Null,
                    },
                    Proj::Expr(e) => exec.eval(e, scope)?,
                };
                cells.push(v);
            }
            let mut keys = Vec::with_capacity(order_plan.len());
            for (target, _) in &order_plan {
                let v = match target {
                    OrderTarget::Ordinal(idx) => cells[*idx].clone(),
                    OrderTarget::Expr(e) => exec.eval(e, scope)?,
                };
                keys.push(v);
            }
            out.push(OutRow { cells, keys });
        }

        // DISTINCT keeps the first occurrence of each projected row.
        if select.distinct {
            let mut seen: HashMap<Vec<GroupKey>, ()> = HashMap::new();
            out.retain(|row| {
                let key: Vec<GroupKey> = row.cells.iter().map(key_of).collect();
                seen.insert(key, ()).is_none()
            });
        }

        // Stable sort; NULLs sort first ascending, last descending.
        if !order_plan.is_empty() {
            out.sort_by(|a, b| {
                for (i, (_, desc)) in order_plan.iter().enumerate() {
                    let ord = cmp_storage(&a.keys[i], &b.keys[i]);
                    let ord = if *desc { ord.reverse() } else { ord };
                    if ord != Ordering::Equal {
                        return ord;
                    }
                }
                Ordering::Equal
            });
        }

        // LIMIT and OFFSET are constant expressions.
        let const_int = |e: &Expr, what: &str| -> Result<i64, EvalError> {
            let v = exec.eval(e, Scope::Group { rep: None, members: &[] })?;
            match v {
                Value::Num(n) => Ok(n.trunc() as i64),
                _ => Err(exec_err(format!("{what} must be a number"))),
            }
        };
        let offset = match &select.offset {
            Some(e) => const_int(e, "OFFSET")?.max(0) as usize,
            None => 0,
        };
        let limit = match &select.limit {
            Some(e) => {
                let n = const_int(e, "LIMIT")?;
                if n < 0 {
                    usize::MAX
                } else {
                    n as usize
                }
            }
            None => usize::MAX,
        };
        let rows: Vec<Vec<Value>> =
            out.into_iter().skip(offset).take(limit).map(|r| r.cells).collect();

        Ok(QueryOutput { headers, rows })
    }
}

impl<'e> Exec<'e> {
    fn check_qualifier(&self, qualifier: &Option<String>) -> Result<(), EvalError> {
        if let Some(q) = qualifier {
            let matches_table = q.eq_ignore_ascii_case(&self.engine.table_name);
            let matches_alias =
                self.alias.as_deref().is_some_and(|a| q.eq_ignore_ascii_case(a));
            if !self.has_from || !(matches_table || matches_alias) {
                return Err(exec_err(format!("no such table: {q}")));
            }
        }
        Ok(())
    }

    fn resolve_column(&self, name: &str) -> Result<usize, EvalError> {
        if !self.has_from {
            return Err(exec_err(format!("no such column: {name}")));
        }
        // Sanitized names take priority; original names resolve as a
        // fallback so quoted identifiers from the source table also work.
        let found = self
            .engine
            .columns
            .iter()
            .position(|c| c.match_name.eq_ignore_ascii_case(name))
            .or_else(|| {
                self.engine
                    .columns
                    .iter()
                    .position(|c| c.display_name.eq_ignore_ascii_case(name))
            });
        found.ok_or_else(|| exec_err(format!("no such column: {name}")))
    }

    fn affinity(&self, e: &Expr) -> Affinity {
        match e {
            Expr::Column { name, .. } => match self.resolve_column(name) {
                Ok(ci) => self.engine.columns[ci].affinity,
                Err(_) => Affinity::None,
            },
            Expr::Cast { target, .. } => match target {
                TypeName::Integer | TypeName::Real | TypeName::Numeric => Affinity::Real,
                TypeName::Text => Affinity::Text,
            },
            _ => Affinity::None,
        }
    }

    /// Applies SQLite comparison affinity rules, then compares by storage
    /// class. Returns None when either side is NULL.
    fn compare(
        &self,
        le: &Expr,
        re: &Expr,
        scope: Scope<'_>,
    ) -> Result<Option<Ordering>, EvalError> {
        let l = self.eval(le, scope)?;
        let r = self.eval(re, scope)?;
        Ok(self.compare_values(l, self.affinity(le), r, self.affinity(re)))
    }

    fn compare_values(
        &self,
        l: Value,
        la: Affinity,
        r: Value,
        ra: Affinity,
    ) -> Option<Ordering> {
        if l.is_null() || r.is_null() {
            return None;
        }
        let (l, r) = coerce_pair(l, la, r, ra);
        Some(cmp_storage(&l, &r))
    }

    fn eval(&self, e: &Expr, scope: Scope<'_>) -> Result<Value, EvalError> {
        match e {
            Expr::Number(n) => Ok(Value::Num(*n)),
            Expr::Str(s) => Ok(Value::Text(s.clone())),
            Expr::Null => Ok(Value::Null),
            Expr::Column { qualifier, name } => {
                self.check_qualifier(qualifier)?;
                let ci = self.resolve_column(name)?;
                let row = match scope {
                    Scope::Row(ri) => Some(ri),
                    Scope::Group { rep, .. } => rep,
                };
                Ok(match row {
                    Some(ri) => self.engine.rows[ri][ci].clone(),
                    None => Value::Null,
                })
            }
            Expr::Unary(UnOp::Neg, inner) => {
                let v = self.eval(inner, scope)?;
                Ok(match to_number(&v) {
                    Some(n) => Value::Num(-n),
                    None => Value::Null,
                })
            }
            Expr::Unary(UnOp::Not, inner) => {
                let v = self.eval(inner, scope)?;
                Ok(bool_value(truthy(&v).map(|b| !b)))
            }
            Expr::Binary(op, le, re) => self.eval_binary(*op, le, re, scope),
            Expr::Like { expr, pattern, negated } => {
                let l = self.eval(expr, scope)?;
                let p = self.eval(pattern, scope)?;
                let (Some(l), Some(p)) = (to_text(&l), to_text(&p)) else {
                    return Ok(Value::Null);
                };
                let hit = like_match(
                    &p.chars().collect::<Vec<_>>(),
                    &l.chars().collect::<Vec<_>>(),
                );
                Ok(bool_value(Some(hit != *negated)))
            }
            Expr::InList { expr, list, negated } => {
                if list.is_empty() {
                    return Ok(bool_value(Some(*negated)));
                }
                let l = self.eval(expr, scope)?;
                if l.is_null() {
                    return Ok(Value::Null);
                }
                let la = self.affinity(expr);
                let mut saw_null = false;
                for item in list {
                    let r = self.eval(item, scope)?;
                    if r.is_null() {
                        saw_null = true;
                        continue;
                    }
                    // The left operand's affinity applies to each element.
                    if self.compare_values(l.clone(), la, r, Affinity::None)
                        == Some(Ordering::Equal)
                    {
                        return Ok(bool_value(Some(!*negated)));
                    }
                }
                if saw_null {
                    Ok(Value::Null)
                } else {
                    Ok(bool_value(Some(*negated)))
                }
            }
            Expr::Between { expr, lo, hi, negated } => {
                let ge = self.compare(expr, lo, scope)?.map(|o| o != Ordering::Less);
                let le = self.compare(expr, hi, scope)?.map(|o| o != Ordering::Greater);
                let both = match (ge, le) {
                    (Some(false), _) | (_, Some(false)) => Some(false),
                    (Some(true), Some(true)) => Some(true),
                    _ => None,
                };
                Ok(bool_value(both.map(|b| b != *negated)))
            }
            Expr::IsNull { expr, negated } => {
                let v = self.eval(expr, scope)?;
                Ok(bool_value(Some(v.is_null() != *negated)))
            }
            Expr::Case { base, whens, otherwise } => {
                match base {
                    Some(base) => {
                        let ba = self.affinity(base);
                        let b = self.eval(base, scope)?;
                        for (when, value) in whens {
                            let w = self.eval(when, scope)?;
                            let eq = self.compare_values(
                                b.clone(),
                                ba,
                                w,
                                self.affinity(when),
                            );
                            if eq == Some(Ordering::Equal) {
                                return self.eval(value, scope);
                            }
                        }
                    }
                    None => {
                        for (cond, value) in whens {
                            let c = self.eval(cond, scope)?;
                            if truthy(&c) == Some(true) {
                                return self.eval(value, scope);
                            }
                        }
                    }
                }
                match otherwise {
                    Some(e) => self.eval(e, scope),
                    None => Ok(Value::Null),
                }
            }
            Expr::Cast { expr, target } => {
                let v = self.eval(expr, scope)?;
                Ok(cast_value(v, *target))
            }
            Expr::Func { name, distinct, args, star } => {
                if is_aggregate(name, args.len(), *star) {
                    self.eval_aggregate(name, *distinct, args, *star, scope)
                } else {
                    self.eval_scalar(name, args, scope)
                }
            }
        }
    }

    fn eval_binary(
        &self,
        op: BinOp,
        le: &Expr,
        re: &Expr,
        scope: Scope<'_>,
    ) -> Result<Value, EvalError> {
        match op {
            BinOp::Or => {
                let l = truthy(&self.eval(le, scope)?);
                if l == Some(true) {
                    return Ok(bool_value(Some(true)));
                }
                let r = truthy(&self.eval(re, scope)?);
                Ok(match (l, r) {
                    (_, Some(true)) => bool_value(Some(true)),
                    (Some(false), Some(false)) => bool_value(Some(false)),
                    _ => Value::Null,
                })
            }
            BinOp::And => {
                let l = truthy(&self.eval(le, scope)?);
                if l == Some(false) {
                    return Ok(bool_value(Some(false)));
                }
                let r = truthy(&self.eval(re, scope)?);
                Ok(match (l, r) {
                    (_, Some(false)) => bool_value(Some(false)),
                    (Some(true), Some(true)) => bool_value(Some(true)),
                    _ => Value::Null,
                })
            }
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                let ord = self.compare(le, re, scope)?;
                let b = ord.map(|o| match op {
                    BinOp::Eq => o == Ordering::Equal,
                    BinOp::Ne => o != Ordering::Equal,
                    BinOp::Lt => o == Ordering::Less,
                    BinOp::Le => o != Ordering::Greater,
                    BinOp::Gt => o == Ordering::Greater,
                    BinOp::Ge => o != Ordering::Less,
                    _ => unreachable!(),
                });
                Ok(bool_value(b))
            }
            BinOp::Is | BinOp::IsNot => {
                let l = self.eval(le, scope)?;
                let r = self.eval(re, scope)?;
                let equal = match (l.is_null(), r.is_null()) {
                    (true, true) => true,
                    (true, false) | (false, true) => false,
                    (false, false) => {
                        let (l, r) =
                            coerce_pair(l, self.affinity(le), r, self.affinity(re));
                        cmp_storage(&l, &r) == Ordering::Equal
                    }
                };
                Ok(bool_value(Some(if op == BinOp::Is { equal } else { !equal })))
            }
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod => {
                let l = self.eval(le, scope)?;
                let r = self.eval(re, scope)?;
                let (Some(a), Some(b)) = (to_number(&l), to_number(&r)) else {
                    return Ok(Value::Null);
                };
                Ok(match op {
                    BinOp::Add => Value::Num(a + b),
                    BinOp::Sub => Value::Num(a - b),
                    BinOp::Mul => Value::Num(a * b),
                    BinOp::Div => {
                        if b == 0.0 {
                            Value::Null
                        } else {
                            Value::Num(a / b)
                        }
                    }
                    BinOp::Mod => {
                        let bi = b.trunc() as i64;
                        if bi == 0 {
                            Value::Null
                        } else {
                            Value::Num(((a.trunc() as i64) % bi) as f64)
                        }
                    }
                    _ => unreachable!(),
                })
            }
            BinOp::Concat => {
                let l = self.eval(le, scope)?;
                let r = self.eval(re, scope)?;
                let (Some(a), Some(b)) = (to_text(&l), to_text(&r)) else {
                    return Ok(Value::Null);
                };
                Ok(Value::Text(format!("{a}{b}")))
            }
        }
    }

    fn eval_aggregate(
        &self,
        name: &str,
        distinct: bool,
        args: &[Expr],
        star: bool,
        scope: Scope<'_>,
    ) -> Result<Value, EvalError> {
        let Scope::Group { members, .. } = scope else {
            return Err(exec_err(format!("misuse of aggregate function {name}()")));
        };
        if star {
            if name != "count" {
                return Err(exec_err(format!("misuse of {name}(*)")));
            }
            return Ok(Value::Num(members.len() as f64));
        }
        if args.len() != 1 {
            return Err(exec_err(format!("wrong number of arguments to function {name}()")));
        }
        let arg = &args[0];
        if contains_aggregate(arg) {
            return Err(exec_err("nested aggregate functions are not allowed"));
        }

        let mut values: Vec<Value> = Vec::with_capacity(members.len());
        for &ri in members {
            let v = self.eval(arg, Scope::Row(ri))?;
            if !v.is_null() {
                values.push(v);
            }
        }
        if distinct {
            let mut seen: HashMap<GroupKey, ()> = HashMap::new();
            values.retain(|v| seen.insert(key_of(v), ()).is_none());
        }

        Ok(match name {
            "count" => Value::Num(values.len() as f64),
            "sum" => {
                if values.is_empty() {
                    Value::Null
                } else {
                    Value::Num(values.iter().filter_map(to_number).sum())
                }
            }
            "avg" => {
                if values.is_empty() {
                    Value::Null
                } else {
                    let total: f64 = values.iter().filter_map(to_number).sum();
                    Value::Num(total / values.len() as f64)
                }
            }
            "min" => values
                .into_iter()
                .min_by(|a, b| cmp_storage(a, b))
                .unwrap_or(Value::Null),
            "max" => values
                .into_iter()
                .max_by(|a, b| cmp_storage(a, b))
                .unwrap_or(Value::Null),
            other => return Err(exec_err(format!("no such function: {other}"))),
        })
    }

    fn eval_scalar(
        &self,
        name: &str,
        args: &[Expr],
        scope: Scope<'_>,
    ) -> Result<Value, EvalError> {
        let arity = |lo: usize, hi: usize| -> Result<(), EvalError> {
            if args.len() < lo || args.len() > hi {
                Err(exec_err(format!("wrong number of arguments to function {name}()")))
            } else {
                Ok(())
            }
        };
        let eval_all = |exec: &Self| -> Result<Vec<Value>, EvalError> {
            args.iter().map(|a| exec.eval(a, scope)).collect()
        };

        match name {
            "lower" | "upper" => {
                arity(1, 1)?;
                let v = self.eval(&args[0], scope)?;
                Ok(match to_text(&v) {
                    Some(s) => Value::Text(if name == "lower" {
                        s.to_ascii_lowercase()
                    } else {
                        s.to_ascii_uppercase()
                    }),
                    None => Value::Null,
                })
            }
            "length" => {
                arity(1, 1)?;
                let v = self.eval(&args[0], scope)?;
                Ok(match to_text(&v) {
                    Some(s) => Value::Num(s.chars().count() as f64),
                    None => Value::Null,
                })
            }
            "abs" => {
                arity(1, 1)?;
                let v = self.eval(&args[0], scope)?;
                Ok(match to_number(&v) {
                    Some(n) => Value::Num(n.abs()),
                    None => Value::Null,
                })
            }
            "round" => {
                arity(1, 2)?;
                let v = self.eval(&args[0], scope)?;
                let digits = if args.len() == 2 {
                    match to_number(&self.eval(&args[1], scope)?) {
                        Some(d) => d.trunc() as i32,
                        None => return Ok(Value::Null),
                    }
                } else {
                    0
                };
                Ok(match to_number(&v) {
                    Some(n) => {
                        let scale = 10f64.powi(digits.clamp(-30, 30));
                        Value::Num((n * scale).round() / scale)
                    }
                    None => Value::Null,
                })
            }
            "substr" | "substring" => {
                arity(2, 3)?;
                let vals = eval_all(self)?;
                if vals.iter().any(Value::is_null) {
                    return Ok(Value::Null);
                }
                let s = to_text(&vals[0]).unwrap();
                let chars: Vec<char> = s.chars().collect();
                let len = chars.len() as i64;
                let mut p1 = to_number(&vals[1]).unwrap().trunc() as i64;
                let mut p2 = if vals.len() == 3 {
                    to_number(&vals[2]).unwrap().trunc() as i64
                } else {
                    i64::MAX / 2
                };
                if p2 < 0 {
                    // Negative length takes characters before the start.
                    p1 += p2;
                    p2 = -p2;
                }
                if p1 < 0 {
                    p1 += len;
                    if p1 < 0 {
                        p2 += p1;
                        if p2 < 0 {
                            p2 = 0;
                        }
                        p1 = 0;
                    }
                } else if p1 > 0 {
                    p1 -= 1;
                } else if p2 > 0 {
                    p2 -= 1;
                }
                let start = (p1.max(0) as usize).min(chars.len());
                let take = p2.max(0) as usize;
                Ok(Value::Text(chars[start..].iter().take(take).collect()))
            }
            "trim" | "ltrim" | "rtrim" => {
                arity(1, 2)?;
                let v = self.eval(&args[0], scope)?;
                let Some(s) = to_text(&v) else { return Ok(Value::Null) };
                let set: Vec<char> = if args.len() == 2 {
                    match to_text(&self.eval(&args[1], scope)?) {
                        Some(cs) => cs.chars().collect(),
                        None => return Ok(Value::Null),
                    }
                } else {
                    vec![' ']
                };
                let in_set = |c: char| set.contains(&c);
                let trimmed = match name {
                    "trim" => s.trim_matches(in_set),
                    "ltrim" => s.trim_start_matches(in_set),
                    _ => s.trim_end_matches(in_set),
                };
                Ok(Value::Text(trimmed.to_string()))
            }
            "replace" => {
                arity(3, 3)?;
                let vals = eval_all(self)?;
                if vals.iter().any(Value::is_null) {
                    return Ok(Value::Null);
                }
                let s = to_text(&vals[0]).unwrap();
                let from = to_text(&vals[1]).unwrap();
                let to = to_text(&vals[2]).unwrap();
                Ok(Value::Text(if from.is_empty() { s } else { s.replace(&from, &to) }))
            }
            "coalesce" => {
                arity(2, usize::MAX)?;
                for a in args {
                    let v = self.eval(a, scope)?;
                    if !v.is_null() {
                        return Ok(v);
                    }
                }
                Ok(Value::Null)
            }
            "ifnull" => {
                arity(2, 2)?;
                let v = self.eval(&args[0], scope)?;
                if v.is_null() {
                    self.eval(&args[1], scope)
                } else {
                    Ok(v)
                }
            }
            "nullif" => {
                arity(2, 2)?;
                let a = self.eval(&args[0], scope)?;
                let b = self.eval(&args[1], scope)?;
                let equal = match (a.is_null(), b.is_null()) {
                    (true, _) | (_, true) => false,
                    _ => cmp_storage(&a, &b) == Ordering::Equal,
                };
                Ok(if equal { Value::Null } else { a })
            }
            "min" | "max" => {
                arity(2, usize::MAX)?;
                let vals = eval_all(self)?;
                if vals.iter().any(Value::is_null) {
                    return Ok(Value::Null);
                }
                let picked = if name == "min" {
                    vals.into_iter().min_by(|a, b| cmp_storage(a, b))
                } else {
                    vals.into_iter().max_by(|a, b| cmp_storage(a, b))
                };
                Ok(picked.unwrap())
            }
            other => Err(exec_err(format!("no such function: {other}"))),
        }
    }
}

fn coerce_pair(l: Value, la: Affinity, r: Value, ra: Affinity) -> (Value, Value) {
    let numify = |v: Value| match &v {
        Value::Text(s) => match complete_number(s) {
            Some(n) => Value::Num(n),
            None => v,
        },
        _ => v,
    };
    let textify = |v: Value| match &v {
        Value::Num(n) => Value::Text(format_number(*n)),
        _ => v,
    };
    match (la, ra) {
        (Affinity::Real, Affinity::Real) => (l, r),
        (Affinity::Real, _) => (l, numify(r)),
        (_, Affinity::Real) => (numify(l), r),
        (Affinity::Text, Affinity::None) => (l, textify(r)),
        (Affinity::None, Affinity::Text) => (textify(l), r),
        _ => (l, r),
    }
}

fn cast_value(v: Value, target: TypeName) -> Value {
    if v.is_null() {
        return Value::Null;
    }
    match target {
        TypeName::Integer => match &v {
            Value::Num(n) => Value::Num(n.trunc()),
            Value::Text(s) => Value::Num(numeric_prefix(s).trunc()),
            Value::Null => unreachable!(),
        },
        TypeName::Real | TypeName::Numeric => match &v {
            Value::Num(n) => Value::Num(*n),
            Value::Text(s) => Value::Num(numeric_prefix(s)),
            Value::Null => unreachable!(),
        },
        TypeName::Text => match &v {
            Value::Num(n) => Value::Text(format_number(*n)),
            Value::Text(_) => v,
            Value::Null => unreachable!(),
        },
    }
}
