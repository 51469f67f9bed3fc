//! Advanced-search query language.
//!
//! ```text
//! expr   := term ("OR" term)*
//! term   := factor ("AND" factor)*
//! factor := clause | "(" expr ")"
//! clause := FIELD ":" (QUOTED | WORD)
//! ```
//!
//! `AND` binds tighter than `OR`; both keywords are case-sensitive. Field
//! names match the schema case-insensitively. `*` inside a value is a
//! wildcard. The empty query matches everything.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::storage::{Criterion, Op, Value};

pub const MAX_QUERY_LEN: usize = 4096;
pub const MAX_DEPTH: usize = 32;
pub const MAX_ALTERNATIVES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Text,
    Number,
    /// Rendered as `YYYY-MM-DD` in search views.
    Date,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldSpec {
    pub name: String,
    pub kind: ValueKind,
}

/// Searchable fields of one entity kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldSchema {
    pub entity: String,
    pub fields: Vec<FieldSpec>,
}

impl FieldSchema {
    pub fn new(entity: &str, fields: &[(&str, ValueKind)]) -> Self {
        let s = FieldSchema {
            entity: entity.to_string(),
            fields: fields
                .iter()
                .map(|(n, k)| FieldSpec {
                    name: n.to_string(),
                    kind: *k,
                })
                .collect(),
        };
        debug_assert!(!s.fields.is_empty());
        debug_assert!({
            let mut names: Vec<_> = s.fields.iter().map(|f| f.name.to_lowercase()).collect();
            names.sort();
            names.windows(2).all(|w| w[0] != w[1])
        });
        s
    }

    /// Case-insensitive lookup.
    pub fn lookup(&self, name: &str) -> Option<&FieldSpec> {
        self.fields
            .iter()
            .find(|f| f.name.eq_ignore_ascii_case(name))
    }

    pub fn require(&self, name: &str) -> Result<&FieldSpec> {
        self.lookup(name).ok_or_else(|| Error::unknown_field(name))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Expr {
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Clause { field: String, pattern: String },
}

impl Expr {
    pub fn clause(field: impl Into<String>, pattern: impl Into<String>) -> Self {
        Expr::Clause {
            field: field.into(),
            pattern: pattern.into(),
        }
    }

    pub fn and(a: Expr, b: Expr) -> Self {
        Expr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Expr, b: Expr) -> Self {
        Expr::Or(Box::new(a), Box::new(b))
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Clause { .. } => 1,
            Expr::And(a, b) | Expr::Or(a, b) => 1 + a.depth().max(b.depth()),
        }
    }
}

/// Parsed query. `None` is the match-all query.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct QueryAst {
    pub root: Option<Expr>,
}

impl QueryAst {
    pub fn match_all() -> Self {
        QueryAst { root: None }
    }

    pub fn is_match_all(&self) -> bool {
        self.root.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    Colon,
    And,
    Or,
    Word(String),
    Quoted(String),
}

fn syntax(position: usize, expected: &[&str]) -> Error {
    Error::Syntax {
        position,
        expected: expected.iter().map(|s| s.to_string()).collect(),
    }
}

/// Tokens with their character offsets.
fn lex(input: &str) -> Result<Vec<(usize, Tok)>> {
    let chars: Vec<char> = input.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '(' => {
                out.push((start, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((start, Tok::RParen));
                i += 1;
            }
            ':' => {
                out.push((start, Tok::Colon));
                i += 1;
            }
            '"' => {
                i += 1;
                let mut s = String::new();
                loop {
                    match chars.get(i) {
                        None => return Err(syntax(chars.len(), &["'\"'"])),
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') => match chars.get(i + 1) {
                            Some(&e @ ('"' | '\\')) => {
                                s.push(e);
                                i += 2;
                            }
                            _ => return Err(syntax(i + 1, &["'\"'", "'\\\\'"])),
                        },
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                out.push((start, Tok::Quoted(s)));
            }
            _ => {
                let mut s = String::new();
                while let Some(&ch) = chars.get(i) {
                    if ch.is_whitespace() || matches!(ch, '(' | ')' | ':' | '"') {
                        break;
                    }
                    s.push(ch);
                    i += 1;
                }
                let tok = match s.as_str() {
                    "AND" => Tok::And,
                    "OR" => Tok::Or,
                    _ => Tok::Word(s),
                };
                out.push((start, tok));
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    schema: &'a FieldSchema,
    nesting: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut left = self.term()?;
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            let right = self.term()?;
            left = Expr::or(left, right);
        }
        Ok(left)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut left = self.factor()?;
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            let right = self.factor()?;
            left = Expr::and(left, right);
        }
        Ok(left)
    }

    fn factor(&mut self) -> Result<Expr> {
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.nesting += 1;
                if self.nesting > MAX_DEPTH {
                    return Err(Error::DepthExceeded(MAX_DEPTH));
                }
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(syntax(self.offset(), &["')'", "AND", "OR"]));
                }
                self.pos += 1;
                self.nesting -= 1;
                Ok(e)
            }
            Some(Tok::Word(name)) => {
                let field = self.schema.require(&name)?.name.clone();
                self.pos += 1;
                if self.peek() != Some(&Tok::Colon) {
                    return Err(syntax(self.offset(), &["':'"]));
                }
                self.pos += 1;
                match self.peek().cloned() {
                    Some(Tok::Word(v)) | Some(Tok::Quoted(v)) => {
                        self.pos += 1;
                        Ok(Expr::Clause { field, pattern: v })
                    }
                    _ => Err(syntax(self.offset(), &["quoted string", "word"])),
                }
            }
            _ => Err(syntax(self.offset(), &["field name", "'('"])),
        }
    }
}

/// Parses `input` against `schema`.
pub fn parse(input: &str, schema: &FieldSchema) -> Result<QueryAst> {
    if input.chars().count() > MAX_QUERY_LEN {
        return Err(Error::QueryTooLong(MAX_QUERY_LEN));
    }
    let toks = lex(input)?;
    if toks.is_empty() {
        return Ok(QueryAst::match_all());
    }
    let mut p = Parser {
        toks,
        pos: 0,
        end: input.chars().count(),
        schema,
        nesting: 0,
    };
    let root = p.expr()?;
    if p.peek().is_some() {
        return Err(syntax(p.offset(), &["AND", "OR", "end of input"]));
    }
    if root.depth() > MAX_DEPTH {
        return Err(Error::DepthExceeded(MAX_DEPTH));
    }
    Ok(QueryAst { root: Some(root) })
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if matches!(c, '"' | '\\') {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn write_expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Clause { field, pattern } => {
            let _ = write!(out, "{field}: {}", quote(pattern));
        }
        Expr::And(a, b) => {
            write_child(a, matches!(**a, Expr::Or(..)), out);
            out.push_str(" AND ");
            write_child(b, matches!(**b, Expr::Or(..) | Expr::And(..)), out);
        }
        Expr::Or(a, b) => {
            write_child(a, false, out);
            out.push_str(" OR ");
            write_child(b, matches!(**b, Expr::Or(..)), out);
        }
    }
}

fn write_child(e: &Expr, parens: bool, out: &mut String) {
    if parens {
        out.push('(');
        write_expr(e, out);
        out.push(')');
    } else {
        write_expr(e, out);
    }
}

/// Canonical text: values always quoted, parentheses only where the tree
/// shape would otherwise be lost.
pub fn serialize(ast: &QueryAst) -> String {
    let mut out = String::new();
    if let Some(root) = &ast.root {
        write_expr(root, &mut out);
    }
    out
}

/// One conjunction of the disjunctive normal form.
pub type Conjunction = Vec<Criterion>;

fn clause_criterion(field: &str, pattern: &str, schema: &FieldSchema) -> Result<Criterion> {
    let spec = schema.require(field)?;
    let bad = || Error::BadValueForType {
        field: spec.name.clone(),
        value: pattern.to_string(),
    };
    let wild = pattern.contains('*');
    let op = match spec.kind {
        ValueKind::Number => {
            if wild {
                return Err(bad());
            }
            Op::Equals(Value::Int(pattern.trim().parse().map_err(|_| bad())?))
        }
        ValueKind::Date if !wild => {
            let d = NaiveDate::parse_from_str(pattern.trim(), "%Y-%m-%d").map_err(|_| bad())?;
            Op::Equals(Value::Text(d.format("%Y-%m-%d").to_string()))
        }
        _ => text_op(pattern),
    };
    Ok(Criterion::new(spec.name.clone(), op))
}

fn text_op(pattern: &str) -> Op {
    let parts: Vec<&str> = pattern.split('*').collect();
    match parts.as_slice() {
        [exact] => Op::TextEquals(exact.to_string()),
        [prefix, ""] if !prefix.is_empty() => Op::StartsWith(prefix.to_string()),
        ["", suffix] if !suffix.is_empty() => Op::EndsWith(suffix.to_string()),
        ["", middle, ""] if !middle.is_empty() => Op::Contains(middle.to_string()),
        _ => Op::Like(pattern.to_string()),
    }
}

fn dnf(e: &Expr, schema: &FieldSchema) -> Result<Vec<Conjunction>> {
    Ok(match e {
        Expr::Clause { field, pattern } => vec![vec![clause_criterion(field, pattern, schema)?]],
        Expr::Or(a, b) => {
            let mut l = dnf(a, schema)?;
            l.extend(dnf(b, schema)?);
            if l.len() > MAX_ALTERNATIVES {
                return Err(Error::TooComplex);
            }
            l
        }
        Expr::And(a, b) => {
            let l = dnf(a, schema)?;
            let r = dnf(b, schema)?;
            if l.len().saturating_mul(r.len()) > MAX_ALTERNATIVES {
                return Err(Error::TooComplex);
            }
            let mut out = Vec::with_capacity(l.len() * r.len());
            for x in &l {
                for y in &r {
                    let mut c = x.clone();
                    c.extend(y.iter().cloned());
                    out.push(c);
                }
            }
            out
        }
    })
}

/// Compiles to disjunctive normal form. The match-all query yields a single
/// empty conjunction.
pub fn compile(ast: &QueryAst, schema: &FieldSchema) -> Result<Vec<Conjunction>> {
    match &ast.root {
        None => Ok(vec![Vec::new()]),
        Some(e) => dnf(e, schema),
    }
}

/// True when `row` satisfies at least one conjunction.
pub fn matches(dnf: &[Conjunction], row: &BTreeMap<String, Value>) -> bool {
    dnf.iter().any(|conj| conj.iter().all(|c| c.matches(row)))
}

/// AND-chain of one clause per non-empty input, in schema order.
pub fn build_from_fields(
    inputs: &BTreeMap<String, String>,
    schema: &FieldSchema,
) -> Result<QueryAst> {
    let mut by_field: BTreeMap<&str, &str> = BTreeMap::new();
    for (k, v) in inputs {
        let spec = schema.require(k)?;
        if !v.trim().is_empty() {
            by_field.insert(spec.name.as_str(), v.as_str());
        }
    }
    let mut root: Option<Expr> = None;
    for f in &schema.fields {
        if let Some(v) = by_field.get(f.name.as_str()) {
            let c = Expr::clause(f.name.clone(), v.trim());
            root = Some(match root {
                None => c,
                Some(prev) => Expr::and(prev, c),
            });
        }
    }
    Ok(QueryAst { root })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assets() -> FieldSchema {
        FieldSchema::new(
            "PhysicalAsset",
            &[
                ("ItemId", ValueKind::Number),
                ("Location", ValueKind::Text),
                ("Type", ValueKind::Text),
                ("Color", ValueKind::Text),
                ("DatePurchased", ValueKind::Date),
            ],
        )
    }

    fn software() -> FieldSchema {
        FieldSchema::new(
            "Software",
            &[("Contact", ValueKind::Text), ("ReqNum", ValueKind::Text)],
        )
    }

    const CHAIR_QUERY: &str = r#"Location: "H-623 through H-629" AND Type: "Plastic Classroom Chair""#;
    const LICENSE_QUERY: &str = r#"Contact: "Professor John Smith" AND ReqNum: "Req-28100we""#;

    #[test]
    fn example_queries_parse_to_two_clause_and() {
        let ast = parse(CHAIR_QUERY, &assets()).unwrap();
        assert_eq!(
            ast.root,
            Some(Expr::and(
                Expr::clause("Location", "H-623 through H-629"),
                Expr::clause("Type", "Plastic Classroom Chair"),
            ))
        );
        assert_eq!(serialize(&ast), CHAIR_QUERY);
        let ast = parse(LICENSE_QUERY, &software()).unwrap();
        assert_eq!(serialize(&ast), LICENSE_QUERY);
    }

    #[test]
    fn and_binds_tighter_than_or() {
        let s = assets();
        let ast = parse("Type: a OR Type: b AND Color: c", &s).unwrap();
        assert_eq!(
            ast.root.unwrap(),
            Expr::or(
                Expr::clause("Type", "a"),
                Expr::and(Expr::clause("Type", "b"), Expr::clause("Color", "c"))
            )
        );
    }

    #[test]
    fn field_names_case_insensitive_keywords_not() {
        let s = assets();
        let ast = parse("type: x", &s).unwrap();
        assert_eq!(ast.root.unwrap(), Expr::clause("Type", "x"));
        let err = parse("Type: x and Color: y", &s).unwrap_err();
        assert!(matches!(err, Error::Syntax { .. }), "{err:?}");
    }

    #[test]
    fn empty_is_match_all() {
        let ast = parse("   ", &assets()).unwrap();
        assert!(ast.is_match_all());
        assert_eq!(serialize(&ast), "");
        assert_eq!(compile(&ast, &assets()).unwrap(), vec![Vec::<Criterion>::new()]);
    }

    #[test]
    fn errors_are_positioned() {
        let s = assets();
        assert_eq!(
            parse("Type \"x\"", &s).unwrap_err(),
            Error::Syntax {
                position: 5,
                expected: vec!["':'".into()]
            }
        );
        assert!(matches!(
            parse("(Type: x", &s).unwrap_err(),
            Error::Syntax { position: 8, .. }
        ));
        assert!(matches!(
            parse("Type: \"open", &s).unwrap_err(),
            Error::Syntax { position: 11, .. }
        ));
        assert!(matches!(
            parse("Type: x)", &s).unwrap_err(),
            Error::Syntax { position: 7, .. }
        ));
        assert_eq!(
            parse("Colour: red", &s).unwrap_err(),
            Error::UnknownField {
                field: "Colour".into()
            }
        );
    }

    #[test]
    fn depth_and_length_limits() {
        let s = assets();
        let chain = |n: usize| vec!["Type: x"; n].join(" AND ");
        assert!(parse(&chain(32), &s).is_ok());
        assert_eq!(parse(&chain(33), &s).unwrap_err(), Error::DepthExceeded(32));
        let nested = format!("{}Type: x{}", "(".repeat(40), ")".repeat(40));
        assert_eq!(parse(&nested, &s).unwrap_err(), Error::DepthExceeded(32));
        let long = format!("Type: \"{}\"", "a".repeat(4100));
        assert_eq!(parse(&long, &s).unwrap_err(), Error::QueryTooLong(4096));
    }

    #[test]
    fn precedence_forcing_parens() {
        let ast = QueryAst {
            root: Some(Expr::and(
                Expr::clause("Type", "a"),
                Expr::or(Expr::clause("Type", "b"), Expr::clause("Color", "c")),
            )),
        };
        assert_eq!(
            serialize(&ast),
            r#"Type: "a" AND (Type: "b" OR Color: "c")"#
        );
    }

    #[test]
    fn quotes_escape() {
        let s = assets();
        let ast = QueryAst {
            root: Some(Expr::clause("Type", r#"say "hi" \ bye"#)),
        };
        let text = serialize(&ast);
        assert_eq!(text, r#"Type: "say \"hi\" \\ bye""#);
        assert_eq!(parse(&text, &s).unwrap(), ast);
    }

    #[test]
    fn compile_wildcards_and_types() {
        let s = assets();
        let dnf = compile(&parse("Type: chair*", &s).unwrap(), &s).unwrap();
        assert_eq!(
            dnf,
            vec![vec![Criterion::new("Type", Op::StartsWith("chair".into()))]]
        );
        let dnf = compile(&parse("Type: *chair* OR Type: *a*b", &s).unwrap(), &s).unwrap();
        assert_eq!(dnf[0][0].op, Op::Contains("chair".into()));
        assert_eq!(dnf[1][0].op, Op::Like("*a*b".into()));
        let err = compile(&parse("ItemId: seven", &s).unwrap(), &s).unwrap_err();
        assert!(matches!(err, Error::BadValueForType { .. }));
        let dnf = compile(&parse("ItemId: 7 AND DatePurchased: 2012-01-01", &s).unwrap(), &s)
            .unwrap();
        assert_eq!(dnf[0][0].op, Op::Equals(Value::Int(7)));
        assert_eq!(dnf[0][1].op, Op::Equals(Value::from("2012-01-01")));
    }

    #[test]
    fn dnf_by_hand() {
        let s = assets();
        let ast = parse("Type: a OR Type: b AND Color: c", &s).unwrap();
        let dnf = compile(&ast, &s).unwrap();
        let shape: Vec<Vec<&str>> = dnf
            .iter()
            .map(|c| c.iter().map(|x| x.field.as_str()).collect())
            .collect();
        assert_eq!(shape, vec![vec!["Type"], vec!["Type", "Color"]]);
    }

    #[test]
    fn dnf_blowup_is_bounded() {
        let s = assets();
        let q = vec!["(Type: a OR Type: b)"; 13].join(" AND ");
        assert_eq!(compile(&parse(&q, &s).unwrap(), &s).unwrap_err(), Error::TooComplex);
    }

    #[test]
    fn build_from_fields_follows_schema_order() {
        let s = assets();
        let mut inputs = BTreeMap::new();
        inputs.insert("Type".to_string(), "Plastic Classroom Chair".to_string());
        inputs.insert("location".to_string(), "H-623 through H-629".to_string());
        inputs.insert("Color".to_string(), "  ".to_string());
        let ast = build_from_fields(&inputs, &s).unwrap();
        assert_eq!(serialize(&ast), CHAIR_QUERY);
        inputs.insert("Colour".to_string(), "x".to_string());
        assert!(build_from_fields(&inputs, &s).is_err());
        assert!(build_from_fields(&BTreeMap::new(), &s).unwrap().is_match_all());
    }
}
