//! Recursive-descent parser for the single-table SELECT dialect the
//! engine executes. Anything else (writes, DDL, joins, subqueries,
//! multiple statements) is rejected here, which is what makes execution
//! read-only by construction.

use super::lexer::{lex, Spanned, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Is,
    IsNot,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Concat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypeName {
    Integer,
    Real,
    Text,
    Numeric,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Column { qualifier: Option<String>, name: String },
    Number(f64),
    Str(String),
    Null,
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Like { expr: Box<Expr>, pattern: Box<Expr>, negated: bool },
    InList { expr: Box<Expr>, list: Vec<Expr>, negated: bool },
    Between { expr: Box<Expr>, lo: Box<Expr>, hi: Box<Expr>, negated: bool },
    IsNull { expr: Box<Expr>, negated: bool },
    Case { base: Option<Box<Expr>>, whens: Vec<(Expr, Expr)>, otherwise: Option<Box<Expr>> },
    Cast { expr: Box<Expr>, target: TypeName },
    Func { name: String, distinct: bool, args: Vec<Expr>, star: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectItem {
    Star,
    Expr { expr: Expr, alias: Option<String>, text: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderItem {
    pub expr: Expr,
    pub desc: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Select {
    pub distinct: bool,
    pub items: Vec<SelectItem>,
    pub from_table: Option<String>,
    pub from_alias: Option<String>,
    pub where_clause: Option<Expr>,
    pub group_by: Vec<Expr>,
    pub having: Option<Expr>,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<Expr>,
    pub offset: Option<Expr>,
}

const RESERVED: &[&str] = &[
    "SELECT", "DISTINCT", "ALL", "FROM", "WHERE", "GROUP", "BY", "HAVING", "ORDER", "LIMIT",
    "OFFSET", "AND", "OR", "NOT", "AS", "IS", "IN", "LIKE", "BETWEEN", "NULL", "CASE", "WHEN",
    "THEN", "ELSE", "END", "CAST", "ASC", "DESC", "UNION", "EXCEPT", "INTERSECT", "JOIN",
    "INNER", "LEFT", "RIGHT", "OUTER", "CROSS", "ON",
];

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Spanned>,
    pos: usize,
}

pub fn parse_select(sql: &str) -> Result<Select, String> {
    let toks = lex(sql)?;
    if toks.is_empty() {
        return Err("empty statement".to_string());
    }
    let mut parser = Parser { src: sql, toks, pos: 0 };
    let select = parser.select_statement()?;
    // One optional trailing semicolon; anything beyond is a second statement.
    if parser.eat_punct(";") && !parser.at_end() {
        return Err("multiple statements are not allowed".to_string());
    }
    if !parser.at_end() {
        return Err(format!("unexpected trailing input at offset {}", parser.offset()));
    }
    Ok(select)
}

impl<'a> Parser<'a> {
    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.src.len(), |s| s.start)
    }

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos).map(|s| &s.token)
    }

    fn peek_kw(&self) -> Option<String> {
        match self.peek() {
            Some(Token::Word(w)) => Some(w.to_ascii_uppercase()),
            _ => None,
        }
    }

    fn kw_at(&self, offset: usize) -> Option<String> {
        match self.toks.get(self.pos + offset).map(|s| &s.token) {
            Some(Token::Word(w)) => Some(w.to_ascii_uppercase()),
            _ => None,
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.peek_kw().as_deref() == Some(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), String> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(format!("expected {kw} at offset {}", self.offset()))
        }
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Some(Token::Punct(q)) if *q == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), String> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(format!("expected `{p}` at offset {}", self.offset()))
        }
    }

    /// Identifier usable as a name: bare non-reserved word or quoted.
    fn eat_identifier(&mut self) -> Option<String> {
        match self.peek() {
            Some(Token::Word(w)) if !RESERVED.contains(&w.to_ascii_uppercase().as_str()) => {
                let w = w.clone();
                self.pos += 1;
                Some(w)
            }
            Some(Token::QuotedIdent(q)) => {
                let q = q.clone();
                self.pos += 1;
                Some(q)
            }
            _ => None,
        }
    }

    fn select_statement(&mut self) -> Result<Select, String> {
        match self.peek_kw().as_deref() {
            Some("SELECT") => {
                self.pos += 1;
            }
            Some(other) => {
                return Err(format!("only SELECT statements are supported, found {other}"))
            }
            None => return Err("only SELECT statements are supported".to_string()),
        }

        let distinct = if self.eat_kw("DISTINCT") {
            true
        } else {
            self.eat_kw("ALL");
            false
        };

        let mut items = Vec::new();
        loop {
            items.push(self.select_item()?);
            if !self.eat_punct(",") {
                break;
            }
        }

        let (from_table, from_alias) = if self.eat_kw("FROM") {
            let table = self
                .eat_identifier()
                .ok_or_else(|| format!("expected table name at offset {}", self.offset()))?;
            if matches!(
                self.peek_kw().as_deref(),
                Some("JOIN" | "INNER" | "LEFT" | "RIGHT" | "OUTER" | "CROSS")
            ) {
                return Err("joins are not supported".to_string());
            }
            let alias = if self.eat_kw("AS") {
                Some(self.eat_identifier().ok_or_else(|| {
                    format!("expected alias after AS at offset {}", self.offset())
                })?)
            } else {
                self.eat_identifier()
            };
            if self.eat_punct(",") {
                return Err("multiple FROM tables are not supported".to_string());
            }
            (Some(table), alias)
        } else {
            (None, None)
        };

        let where_clause = if self.eat_kw("WHERE") { Some(self.expr()?) } else { None };

        let mut group_by = Vec::new();
        if self.eat_kw("GROUP") {
            self.expect_kw("BY")?;
            loop {
                group_by.push(self.expr()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }

        let having = if self.eat_kw("HAVING") {
            if group_by.is_empty() {
                return Err("HAVING requires GROUP BY".to_string());
            }
            Some(self.expr()?)
        } else {
            None
        };

        let mut order_by = Vec::new();
        if self.eat_kw("ORDER") {
            self.expect_kw("BY")?;
            loop {
                let expr = self.expr()?;
                let desc = if self.eat_kw("DESC") {
                    true
                } else {
                    self.eat_kw("ASC");
                    false
                };
                order_by.push(OrderItem { expr, desc });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }

        let mut limit = None;
        let mut offset = None;
        if self.eat_kw("LIMIT") {
            let first = self.expr()?;
            if self.eat_punct(",") {
                // MySQL-compatible `LIMIT offset, count`.
                offset = Some(first);
                limit = Some(self.expr()?);
            } else {
                limit = Some(first);
                if self.eat_kw("OFFSET") {
                    offset = Some(self.expr()?);
                }
            }
        }

        if matches!(self.peek_kw().as_deref(), Some("UNION" | "EXCEPT" | "INTERSECT")) {
            return Err("compound queries are not supported".to_string());
        }

        Ok(Select {
            distinct,
            items,
            from_table,
            from_alias,
            where_clause,
            group_by,
            having,
            order_by,
            limit,
            offset,
        })
    }

    fn select_item(&mut self) -> Result<SelectItem, String> {
        if self.eat_punct("*") {
            return Ok(SelectItem::Star);
        }
        let start = self.offset();
        let expr = self.expr()?;
        let end = self.toks.get(self.pos.saturating_sub(1)).map_or(start, |s| s.end);
        let text = self.src[start..end].trim().to_string();
        let alias = if self.eat_kw("AS") {
            Some(self.eat_identifier().ok_or_else(|| {
                format!("expected alias after AS at offset {}", self.offset())
            })?)
        } else {
            self.eat_identifier()
        };
        Ok(SelectItem::Expr { expr, alias, text })
    }

    fn expr(&mut self) -> Result<Expr, String> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, String> {
        let mut lhs = self.and_expr()?;
        while self.eat_kw("OR") {
            let rhs = self.and_expr()?;
            lhs = Expr::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, String> {
        let mut lhs = self.not_expr()?;
        while self.eat_kw("AND") {
            let rhs = self.not_expr()?;
            lhs = Expr::Binary(BinOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, String> {
        if self.eat_kw("NOT") {
            let inner = self.not_expr()?;
            return Ok(Expr::Unary(UnOp::Not, Box::new(inner)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, String> {
        let mut lhs = self.relational()?;
        loop {
            if self.eat_punct("=") || self.eat_punct("==") {
                let rhs = self.relational()?;
                lhs = Expr::Binary(BinOp::Eq, Box::new(lhs), Box::new(rhs));
                continue;
            }
            if self.eat_punct("!=") || self.eat_punct("<>") {
                let rhs = self.relational()?;
                lhs = Expr::Binary(BinOp::Ne, Box::new(lhs), Box::new(rhs));
                continue;
            }
            if self.eat_kw("IS") {
                let negated = self.eat_kw("NOT");
                if self.eat_kw("NULL") {
                    lhs = Expr::IsNull { expr: Box::new(lhs), negated };
                } else {
                    let rhs = self.relational()?;
                    let op = if negated { BinOp::IsNot } else { BinOp::Is };
                    lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
                }
                continue;
            }
            let negated = if self.peek_kw().as_deref() == Some("NOT")
                && matches!(self.kw_at(1).as_deref(), Some("IN" | "LIKE" | "BETWEEN"))
            {
                self.pos += 1;
                true
            } else {
                false
            };
            if self.eat_kw("IN") {
                self.expect_punct("(")?;
                if self.peek_kw().as_deref() == Some("SELECT") {
                    return Err("subqueries are not supported".to_string());
                }
                let mut list = Vec::new();
                if !self.eat_punct(")") {
                    loop {
                        list.push(self.expr()?);
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                    self.expect_punct(")")?;
                }
                lhs = Expr::InList { expr: Box::new(lhs), list, negated };
                continue;
            }
            if self.eat_kw("LIKE") {
                let pattern = self.relational()?;
                lhs = Expr::Like { expr: Box::new(lhs), pattern: Box::new(pattern), negated };
                continue;
            }
            if self.eat_kw("BETWEEN") {
                let lo = self.relational()?;
                self.expect_kw("AND")?;
                let hi = self.relational()?;
                lhs = Expr::Between {
                    expr: Box::new(lhs),
                    lo: Box::new(lo),
                    hi: Box::new(hi),
                    negated,
                };
                continue;
            }
            if negated {
                return Err(format!("expected IN, LIKE, or BETWEEN at offset {}", self.offset()));
            }
            break;
        }
        Ok(lhs)
    }

    fn relational(&mut self) -> Result<Expr, String> {
        let mut lhs = self.additive()?;
        loop {
            let op = if self.eat_punct("<=") {
                BinOp::Le
            } else if self.eat_punct(">=") {
                BinOp::Ge
            } else if self.eat_punct("<") {
                BinOp::Lt
            } else if self.eat_punct(">") {
                BinOp::Gt
            } else {
                break;
            };
            let rhs = self.additive()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn additive(&mut self) -> Result<Expr, String> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = if self.eat_punct("+") {
                BinOp::Add
            } else if self.eat_punct("-") {
                BinOp::Sub
            } else {
                break;
            };
            let rhs = self.multiplicative()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn multiplicative(&mut self) -> Result<Expr, String> {
        let mut lhs = self.concat()?;
        loop {
            let op = if self.eat_punct("*") {
                BinOp::Mul
            } else if self.eat_punct("/") {
                BinOp::Div
            } else if self.eat_punct("%") {
                BinOp::Mod
            } else {
                break;
            };
            let rhs = self.concat()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn concat(&mut self) -> Result<Expr, String> {
        let mut lhs = self.unary()?;
        while self.eat_punct("||") {
            let rhs = self.unary()?;
            lhs = Expr::Binary(BinOp::Concat, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, String> {
        if self.eat_punct("-") {
            let inner = self.unary()?;
            return Ok(Expr::Unary(UnOp::Neg, Box::new(inner)));
        }
        if self.eat_punct("+") {
            return self.unary();
        }
        self.primary()
    }

    fn type_name(&mut self) -> Result<TypeName, String> {
        let word = self
            .peek_kw()
            .or_else(|| match self.peek() {
                Some(Token::Word(w)) => Some(w.to_ascii_uppercase()),
                _ => None,
            })
            .ok_or_else(|| format!("expected type name at offset {}", self.offset()))?;
        let target = match word.as_str() {
            "INTEGER" | "INT" | "BIGINT" | "SMALLINT" => TypeName::Integer,
            "REAL" | "FLOAT" | "DOUBLE" => TypeName::Real,
            "TEXT" | "VARCHAR" | "CHAR" | "STRING" | "CLOB" => TypeName::Text,
            "NUMERIC" | "DECIMAL" => TypeName::Numeric,
            other => return Err(format!("unsupported cast type {other}")),
        };
        self.pos += 1;
        // Optional length arguments like VARCHAR(20).
        if self.eat_punct("(") {
            while !self.eat_punct(")") {
                if self.at_end() {
                    return Err("unterminated type arguments".to_string());
                }
                self.pos += 1;
            }
        }
        Ok(target)
    }

    fn primary(&mut self) -> Result<Expr, String> {
        match self.peek().cloned() {
            Some(Token::Number(v)) => {
                self.pos += 1;
                Ok(Expr::Number(v))
            }
            Some(Token::Str(s)) => {
                self.pos += 1;
                Ok(Expr::Str(s))
            }
            Some(Token::Punct("(")) => {
                self.pos += 1;
                if self.peek_kw().as_deref() == Some("SELECT") {
                    return Err("subqueries are not supported".to_string());
                }
                let inner = self.expr()?;
                self.expect_punct(")")?;
                Ok(inner)
            }
            Some(Token::Word(word)) => {
                let upper = word.to_ascii_uppercase();
                match upper.as_str() {
                    "NULL" => {
                        self.pos += 1;
                        Ok(Expr::Null)
                    }
                    "TRUE" => {
                        self.pos += 1;
                        Ok(Expr::Number(1.0))
                    }
                    "FALSE" => {
                        self.pos += 1;
                        Ok(Expr::Number(0.0))
                    }
                    "CASE" => {
                        self.pos += 1;
                        self.case_expr()
                    }
                    "CAST" => {
                        self.pos += 1;
                        self.expect_punct("(")?;
                        let inner = self.expr()?;
                        self.expect_kw("AS")?;
                        let target = self.type_name()?;
                        self.expect_punct(")")?;
                        Ok(Expr::Cast { expr: Box::new(inner), target })
                    }
                    _ => {
                        // Function call?
                        if matches!(
                            self.toks.get(self.pos + 1).map(|s| &s.token),
                            Some(Token::Punct("("))
                        ) {
                            self.pos += 2;
                            return self.function_call(word.to_ascii_lowercase());
                        }
                        if RESERVED.contains(&upper.as_str()) {
                            return Err(format!(
                                "unexpected keyword {upper} at offset {}",
                                self.offset()
                            ));
                        }
                        self.pos += 1;
                        self.column_ref(word)
                    }
                }
            }
            Some(Token::QuotedIdent(name)) => {
                self.pos += 1;
                self.column_ref(name)
            }
            Some(Token::Punct(p)) => Err(format!("unexpected `{p}` at offset {}", self.offset())),
            None => Err("unexpected end of statement".to_string()),
        }
    }

    fn column_ref(&mut self, first: String) -> Result<Expr, String> {
        if self.eat_punct(".") {
            let name = match self.peek().cloned() {
                Some(Token::Word(w)) => {
                    self.pos += 1;
                    w
                }
                Some(Token::QuotedIdent(q)) => {
                    self.pos += 1;
                    q
                }
                _ => {
                    return Err(format!(
                        "expected column name after `.` at offset {}",
                        self.offset()
                    ))
                }
            };
            Ok(Expr::Column { qualifier: Some(first), name })
        } else {
            Ok(Expr::Column { qualifier: None, name: first })
        }
    }

    fn case_expr(&mut self) -> Result<Expr, String> {
        let base = if self.peek_kw().as_deref() == Some("WHEN") {
            None
        } else {
            Some(Box::new(self.expr()?))
        };
        let mut whens = Vec::new();
        while self.eat_kw("WHEN") {
            let cond = self.expr()?;
            self.expect_kw("THEN")?;
            let value = self.expr()?;
            whens.push((cond, value));
        }
        if whens.is_empty() {
            return Err(format!("CASE requires at least one WHEN at offset {}", self.offset()));
        }
        let otherwise =
            if self.eat_kw("ELSE") { Some(Box::new(self.expr()?)) } else { None };
        self.expect_kw("END")?;
        Ok(Expr::Case { base, whens, otherwise })
    }

    fn function_call(&mut self, name: String) -> Result<Expr, String> {
        if self.eat_punct("*") {
            self.expect_punct(")")?;
            return Ok(Expr::Func { name, distinct: false, args: Vec::new(), star: true });
        }
        let distinct = self.eat_kw("DISTINCT");
        let mut args = Vec::new();
        if !self.eat_punct(")") {
            loop {
                args.push(self.expr()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(")")?;
        }
        Ok(Expr::Func { name, distinct, args, star: false })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_select() {
        let s = parse_select("SELECT a, b FROM t WHERE a > 1 ORDER BY b DESC LIMIT 5").unwrap();
        assert_eq!(s.items.len(), 2);
        assert_eq!(s.from_table.as_deref(), Some("t"));
        assert!(s.where_clause.is_some());
        assert_eq!(s.order_by.len(), 1);
        assert!(s.order_by[0].desc);
        assert_eq!(s.limit, Some(Expr::Number(5.0)));
    }

    #[test]
    fn star_and_aliases() {
        let s = parse_select("select *, a as x, b y from t z").unwrap();
        assert_eq!(s.items[0], SelectItem::Star);
        match &s.items[1] {
            SelectItem::Expr { alias, .. } => assert_eq!(alias.as_deref(), Some("x")),
            other => panic!("unexpected {other:?}"),
        }
        match &s.items[2] {
            SelectItem::Expr { alias, .. } => assert_eq!(alias.as_deref(), Some("y")),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(s.from_alias.as_deref(), Some("z"));
    }

    #[test]
    fn only_select_allowed() {
        for sql in [
            "INSERT INTO t VALUES (1)",
            "UPDATE t SET a = 1",
            "DELETE FROM t",
            "DROP TABLE t",
            "CREATE TABLE x (a)",
            "PRAGMA table_info(t)",
            "ATTACH 'x' AS y",
        ] {
            let err = parse_select(sql).unwrap_err();
            assert!(err.contains("only SELECT"), "{sql}: {err}");
        }
    }

    #[test]
    fn multi_statement_rejected() {
        assert!(parse_select("SELECT 1; SELECT 2").is_err());
        assert!(parse_select("SELECT 1; DROP TABLE t").is_err());
        // A single trailing semicolon is fine.
        assert!(parse_select("SELECT 1;").is_ok());
    }

    #[test]
    fn joins_subqueries_compounds_rejected() {
        assert!(parse_select("SELECT * FROM t JOIN u ON 1").unwrap_err().contains("join"));
        assert!(parse_select("SELECT (SELECT 1)").unwrap_err().contains("subquer"));
        assert!(parse_select("SELECT * FROM t WHERE a IN (SELECT b FROM t)")
            .unwrap_err()
            .contains("subquer"));
        assert!(parse_select("SELECT 1 UNION SELECT 2").unwrap_err().contains("compound"));
        assert!(parse_select("SELECT * FROM t, u").unwrap_err().contains("multiple FROM"));
    }

    #[test]
    fn between_binds_tighter_than_and() {
        let s = parse_select("SELECT * FROM t WHERE a BETWEEN 1 AND 3 AND b = 2").unwrap();
        match s.where_clause.unwrap() {
            Expr::Binary(BinOp::And, lhs, _) => {
                assert!(matches!(*lhs, Expr::Between { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn not_variants() {
        let s = parse_select("SELECT * FROM t WHERE a NOT IN (1, 2) AND b NOT LIKE 'x%' AND c IS NOT NULL").unwrap();
        let mut found_in = false;
        let mut found_like = false;
        let mut found_null = false;
        fn walk(e: &Expr, f: &mut impl FnMut(&Expr)) {
            f(e);
            match e {
                Expr::Binary(_, a, b) => {
                    walk(a, f);
                    walk(b, f);
                }
                Expr::Unary(_, a) => walk(a, f),
                Expr::InList { expr, list, .. } => {
                    walk(expr, f);
                    list.iter().for_each(|x| walk(x, f));
                }
                Expr::Like { expr, pattern, .. } => {
                    walk(expr, f);
                    walk(pattern, f);
                }
                Expr::IsNull { expr, .. } => walk(expr, f),
                _ => {}
            }
        }
        walk(&s.where_clause.unwrap(), &mut |e| match e {
            Expr::InList { negated: true, .. } => found_in = true,
            Expr::Like { negated: true, .. } => found_like = true,
            Expr::IsNull { negated: true, .. } => found_null = true,
            _ => {}
        });
        assert!(found_in && found_like && found_null);
    }

    #[test]
    fn case_and_cast() {
        let s =
            parse_select("SELECT CASE WHEN a > 1 THEN 'big' ELSE 'small' END, CAST(a AS INTEGER) FROM t")
                .unwrap();
        assert_eq!(s.items.len(), 2);
        match &s.items[0] {
            SelectItem::Expr { expr: Expr::Case { base: None, whens, otherwise }, .. } => {
                assert_eq!(whens.len(), 1);
                assert!(otherwise.is_some());
            }
            other => panic!("unexpected {other:?}"),
        }
        match &s.items[1] {
            SelectItem::Expr { expr: Expr::Cast { target: TypeName::Integer, .. }, .. } => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn functions_and_count_star() {
        let s = parse_select("SELECT COUNT(*), COUNT(DISTINCT a), sum(b + 1) FROM t").unwrap();
        match &s.items[0] {
            SelectItem::Expr { expr: Expr::Func { name, star: true, .. }, .. } => {
                assert_eq!(name, "count")
            }
            other => panic!("unexpected {other:?}"),
        }
        match &s.items[1] {
            SelectItem::Expr { expr: Expr::Func { distinct: true, args, .. }, .. } => {
                assert_eq!(args.len(), 1)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn group_having_requires_group() {
        assert!(parse_select("SELECT a, COUNT(*) FROM t GROUP BY a HAVING COUNT(*) > 1").is_ok());
        assert!(parse_select("SELECT a FROM t HAVING a > 1").unwrap_err().contains("GROUP BY"));
    }

    #[test]
    fn limit_forms() {
        let s = parse_select("SELECT * FROM t LIMIT 10 OFFSET 4").unwrap();
        assert_eq!(s.limit, Some(Expr::Number(10.0)));
        assert_eq!(s.offset, Some(Expr::Number(4.0)));
        let s = parse_select("SELECT * FROM t LIMIT 4, 10").unwrap();
        assert_eq!(s.limit, Some(Expr::Number(10.0)));
        assert_eq!(s.offset, Some(Expr::Number(4.0)));
    }

    #[test]
    fn select_item_text_recovers_source() {
        let s = parse_select("SELECT COUNT( * ) AS n, a+1 FROM t").unwrap();
        match &s.items[0] {
            SelectItem::Expr { text, .. } => assert_eq!(text, "COUNT( * )"),
            other => panic!("unexpected {other:?}"),
        }
        match &s.items[1] {
            SelectItem::Expr { text, .. } => assert_eq!(text, "a+1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn qualified_columns() {
        let s = parse_select("SELECT t.a, x.b FROM t x").unwrap();
        match &s.items[0] {
            SelectItem::Expr { expr: Expr::Column { qualifier, name }, .. } => {
                assert_eq!(qualifier.as_deref(), Some("t"));
                assert_eq!(name, "a");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
