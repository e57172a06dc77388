//! Typed interpretation of raw cell text: numbers with optional sign and
//! thousands separators, and calendar dates in the three accepted layouts.

use chrono::NaiveDate;

/// A cell's typed value when it parses as something richer than text.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Parsed {
    Number(f64),
    Date(NaiveDate),
}

/// Splits a numeric string into (negative, integer digits, fraction digits).
///
/// Accepts an optional leading sign, comma thousands separators in the
/// integer part (group widths validated), and a decimal point. Returns None
/// for anything else.
fn split_numeric(raw: &str) -> Option<(bool, String, String)> {
    let s = raw.trim();
    let (neg, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    if rest.is_empty() {
        return None;
    }
    let (int_part, frac_part) = match rest.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (rest, None),
    };
    if let Some(f) = frac_part {
        if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
    }
    let int_digits = if int_part.is_empty() {
        // ".5" style: fraction must exist
        frac_part?;
        String::new()
    } else if int_part.contains(',') {
        let groups: Vec<&str> = int_part.split(',').collect();
        let first = groups[0];
        if first.is_empty() || first.len() > 3 || !first.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        if groups[1..]
            .iter()
            .any(|g| g.len() != 3 || !g.bytes().all(|b| b.is_ascii_digit()))
        {
            return None;
        }
        groups.concat()
    } else {
        if !int_part.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        int_part.to_string()
    };
    Some((neg, int_digits, frac_part.unwrap_or("").to_string()))
}

/// Parses a numeric cell. "1,234.5" -> 1234.5, "-2.5" -> -2.5.
pub fn parse_number(raw: &str) -> Option<f64> {
    let (neg, int_digits, frac) = split_numeric(raw)?;
    let mut s = String::with_capacity(int_digits.len() + frac.len() + 2);
    if neg {
        s.push('-');
    }
    s.push_str(if int_digits.is_empty() { "0" } else { &int_digits });
    if !frac.is_empty() {
        s.push('.');
        s.push_str(&frac);
    }
    s.parse().ok()
}

/// Canonical text form of a numeric string, without going through a float:
/// separators and redundant zeros stripped, so "2,000.0" becomes "2000".
pub fn canonical_numeric(raw: &str) -> Option<String> {
    let (neg, int_digits, frac) = split_numeric(raw)?;
    let int_trimmed = int_digits.trim_start_matches('0');
    let int_norm = if int_trimmed.is_empty() { "0" } else { int_trimmed };
    let frac_norm = frac.trim_end_matches('0');
    let zero = int_norm == "0" && frac_norm.is_empty();
    let mut out = String::new();
    if neg && !zero {
        out.push('-');
    }
    out.push_str(int_norm);
    if !frac_norm.is_empty() {
        out.push('.');
        out.push_str(frac_norm);
    }
    Some(out)
}

/// Minimal text rendering of a number: integral values drop the fraction,
/// everything else uses the shortest round-trip form.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if v.fract() == 0.0 && v.abs() < 1e15 {
        return format!("{}", v as i64);
    }
    format!("{v}")
}

const DATE_FORMATS: &[&str] = &[
    "%Y-%m-%d",  // 1999-06-04
    "%B %d, %Y", // June 4, 1999 (abbreviated month names accepted too)
    "%d %B %Y",  // 4 June 1999
];

/// Parses a date cell in one of the accepted layouts.
pub fn parse_date(raw: &str) -> Option<NaiveDate> {
    let s = raw.trim();
    if s.is_empty() {
        return None;
    }
    DATE_FORMATS
        .iter()
        .find_map(|fmt| NaiveDate::parse_from_str(s, fmt).ok())
}

/// Number first, then date, else None (plain text).
pub fn parse_cell(raw: &str) -> Option<Parsed> {
    if let Some(n) = parse_number(raw) {
        return Some(Parsed::Number(n));
    }
    parse_date(raw).map(Parsed::Date)
}

/// Count of digits after the decimal point in a numeric cell, if it is one.
pub fn decimal_places(raw: &str) -> Option<usize> {
    split_numeric(raw).map(|(_, _, frac)| frac.len())
}
