//! SQL tokenizer. Produces position-tagged tokens so the parser can report
//! offsets and recover the source text of expressions for result headers.

#[derive(Debug, Clone, PartialEq)]
pub enum Token {
    /// Bare word: identifier or keyword, matched case-insensitively.
    Word(String),
    /// Identifier quoted with `"`, backticks, or brackets.
    QuotedIdent(String),
    /// String literal in single quotes, escapes resolved.
    Str(String),
    Number(f64),
    /// Operator or punctuation, normalized (e.g. `<>` stays `<>`).
    Punct(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spanned {
    pub token: Token,
    pub start: usize,
    pub end: usize,
}

pub fn lex(sql: &str) -> Result<Vec<Spanned>, String> {
    let bytes = sql.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        // Line comment.
        if c == b'-' && bytes.get(i + 1) == Some(&b'-') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        // Block comment.
        if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            let start = i;
            i += 2;
            loop {
                if i + 1 >= bytes.len() {
                    return Err(format!("unterminated block comment at offset {start}"));
                }
                if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                    i += 2;
                    break;
                }
                i += 1;
            }
            continue;
        }
        let start = i;
        // String literal with '' escape.
        if c == b'\'' {
            let mut value = String::new();
            i += 1;
            loop {
                if i >= bytes.len() {
                    return Err(format!("unterminated string starting at offset {start}"));
                }
                if bytes[i] == b'\'' {
                    if bytes.get(i + 1) == Some(&b'\'') {
                        value.push('\'');
                        i += 2;
                        continue;
                    }
                    i += 1;
                    break;
                }
                // Copy one UTF-8 scalar.
                let ch = sql[i..].chars().next().expect("in-bounds char");
                value.push(ch);
                i += ch.len_utf8();
            }
            out.push(Spanned { token: Token::Str(value), start, end: i });
            continue;
        }
        // Quoted identifiers: "..." (with "" escape), `...`, [...].
        if c == b'"' || c == b'`' || c == b'[' {
            let close = match c {
                b'"' => b'"',
                b'`' => b'`',
                _ => b']',
            };
            let mut value = String::new();
            i += 1;
            loop {
                if i >= bytes.len() {
                    return Err(format!("unterminated quoted identifier at offset {start}"));
                }
                if bytes[i] == close {
                    if close != b']' && bytes.get(i + 1) == Some(&close) {
                        value.push(close as char);
                        i += 2;
                        continue;
                    }
                    i += 1;
                    break;
                }
                let ch = sql[i..].chars().next().expect("in-bounds char");
                value.push(ch);
                i += ch.len_utf8();
            }
            out.push(Spanned { token: Token::QuotedIdent(value), start, end: i });
            continue;
        }
        // Number: digits, optional fraction, optional exponent; or .digits.
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let mut j = i;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j < bytes.len() && bytes[j] == b'.' {
                j += 1;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
            }
            if j < bytes.len() && (bytes[j] | 0x20) == b'e' {
                let mut k = j + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    j = k;
                }
            }
            let text = &sql[i..j];
            let value: f64 = text
                .parse()
                .map_err(|_| format!("bad numeric literal `{text}` at offset {i}"))?;
            out.push(Spanned { token: Token::Number(value), start, end: j });
            i = j;
            continue;
        }
        // Bare word.
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut j = i;
            while j < bytes.len()
                && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_' || bytes[j] == b'$')
            {
                j += 1;
            }
            out.push(Spanned { token: Token::Word(sql[i..j].to_string()), start, end: j });
            i = j;
            continue;
        }
        // Operators, longest first.
        let two = if i + 1 < bytes.len() { &sql[i..i + 2] } else { "" };
        let punct2 = match two {
            "<=" => Some("<="),
            ">=" => Some(">="),
            "<>" => Some("<>"),
            "!=" => Some("!="),
            "==" => Some("=="),
            "||" => Some("||"),
            _ => None,
        };
        if let Some(p) = punct2 {
            out.push(Spanned { token: Token::Punct(p), start, end: i + 2 });
            i += 2;
            continue;
        }
        let punct1 = match c {
            b',' => Some(","),
            b'(' => Some("("),
            b')' => Some(")"),
            b'.' => Some("."),
            b'*' => Some("*"),
            b'=' => Some("="),
            b'<' => Some("<"),
            b'>' => Some(">"),
            b'+' => Some("+"),
            b'-' => Some("-"),
            b'/' => Some("/"),
            b'%' => Some("%"),
            b';' => Some(";"),
            _ => None,
        };
        match punct1 {
            Some(p) => {
                out.push(Spanned { token: Token::Punct(p), start, end: i + 1 });
                i += 1;
            }
            None => {
                let ch = sql[i..].chars().next().expect("in-bounds char");
                return Err(format!("unexpected character `{ch}` at offset {i}"));
            }
        }
    }
    Ok(out)
}
