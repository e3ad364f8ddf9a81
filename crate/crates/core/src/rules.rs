//! Business-rule validation in two steps: facts are curated from extraction
//! results, then a rule's condition is evaluated over the curated facts only.
//!
//! Conditions use a small expression language:
//!
//! ```text
//! expr    := or
//! or      := and ("or" and)*
//! and     := unary ("and" unary)*
//! unary   := "not" unary | "exists" NAME | "(" expr ")" | operand OP operand
//! operand := NAME | NUMBER | "string" | 'string'
//! OP      := == | != | < | <= | > | >= | contains
//! ```
//!
//! A fact may occur several times (one per section). A comparison holds only if
//! it holds for every combination of occurrences; `exists` holds if there is at
//! least one.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, Error, Result};
use crate::extraction::ExtractionResult;
use crate::model::{ClassSchema, Value};
use crate::segmentation::Section;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Contains,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Contains => "contains",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Fact(String),
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Cmp(Operand, CmpOp, Operand),
    Exists(String),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.or()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expression(format!(
                "unexpected {} after end of expression",
                p.tokens[p.pos]
            )));
        }
        Ok(e)
    }

    pub fn fact_names(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_facts(&mut out);
        out
    }

    fn collect_facts<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Expr::Cmp(a, _, b) => {
                for o in [a, b] {
                    if let Operand::Fact(n) = o {
                        out.insert(n);
                    }
                }
            }
            Expr::Exists(n) => {
                out.insert(n);
            }
            Expr::Not(e) => e.collect_facts(out),
            Expr::And(a, b) | Expr::Or(a, b) => {
                a.collect_facts(out);
                b.collect_facts(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Number(f64),
    Text(String),
    Op(CmpOp),
    LParen,
    RParen,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Ident(s) => write!(f, "{s:?}"),
            Token::Number(n) => write!(f, "{n}"),
            Token::Text(s) => write!(f, "string {s:?}"),
            Token::Op(o) => f.write_str(o.symbol()),
            Token::LParen => f.write_str("'('"),
            Token::RParen => f.write_str("')'"),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            _ if c.is_whitespace() => i += 1,
            '(' => {
                out.push(Token::LParen);
                i += 1;
            }
            ')' => {
                out.push(Token::RParen);
                i += 1;
            }
            '=' | '!' | '<' | '>' => {
                let next = chars.get(i + 1).copied();
                let (op, len) = match (c, next) {
                    ('=', Some('=')) => (CmpOp::Eq, 2),
                    ('!', Some('=')) => (CmpOp::Ne, 2),
                    ('<', Some('=')) => (CmpOp::Le, 2),
                    ('>', Some('=')) => (CmpOp::Ge, 2),
                    ('<', _) => (CmpOp::Lt, 1),
                    ('>', _) => (CmpOp::Gt, 1),
                    _ => return Err(Error::Expression(format!("unexpected {c:?} at offset {i}"))),
                };
                out.push(Token::Op(op));
                i += len;
            }
            '"' | '\'' => {
                let start = i + 1;
                let end = (start..chars.len())
                    .find(|&k| chars[k] == c)
                    .ok_or_else(|| {
                        Error::Expression(format!("unterminated string at offset {i}"))
                    })?;
                out.push(Token::Text(chars[start..end].iter().collect()));
                i = end + 1;
            }
            _ if c.is_ascii_digit()
                || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) =>
            {
                let start = i;
                i += 1;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let n = s
                    .parse::<f64>()
                    .map_err(|_| Error::Expression(format!("bad number {s:?}")))?;
                out.push(Token::Number(n));
            }
            _ if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.')
                {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                out.push(if word == "contains" {
                    Token::Op(CmpOp::Contains)
                } else {
                    Token::Ident(word)
                });
            }
            _ => return Err(Error::Expression(format!("unexpected {c:?} at offset {i}"))),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek_word(&self, w: &str) -> bool {
        matches!(self.tokens.get(self.pos), Some(Token::Ident(s)) if s == w)
    }

    fn next(&mut self) -> Result<Token> {
        let t = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Expression("unexpected end of expression".into()))?;
        self.pos += 1;
        Ok(t)
    }

    fn or(&mut self) -> Result<Expr> {
        let mut e = self.and()?;
        while self.peek_word("or") {
            self.pos += 1;
            e = Expr::Or(Box::new(e), Box::new(self.and()?));
        }
        Ok(e)
    }

    fn and(&mut self) -> Result<Expr> {
        let mut e = self.unary()?;
        while self.peek_word("and") {
            self.pos += 1;
            e = Expr::And(Box::new(e), Box::new(self.unary()?));
        }
        Ok(e)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek_word("not") {
            self.pos += 1;
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        if self.peek_word("exists") {
            self.pos += 1;
            return match self.next()? {
                Token::Ident(n) if !is_keyword(&n) => Ok(Expr::Exists(n)),
                t => Err(Error::Expression(format!(
                    "exists expects a fact name, found {t}"
                ))),
            };
        }
        if self.tokens.get(self.pos) == Some(&Token::LParen) {
            self.pos += 1;
            let e = self.or()?;
            return match self.next()? {
                Token::RParen => Ok(e),
                t => Err(Error::Expression(format!("expected ')', found {t}"))),
            };
        }
        let lhs = self.operand()?;
        let op = match self.next()? {
            Token::Op(op) => op,
            t => {
                return Err(Error::Expression(format!(
                    "expected a comparison operator, found {t}"
                )))
            }
        };
        let rhs = self.operand()?;
        Ok(Expr::Cmp(lhs, op, rhs))
    }

    fn operand(&mut self) -> Result<Operand> {
        match self.next()? {
            Token::Ident(n) if !is_keyword(&n) => Ok(Operand::Fact(n)),
            Token::Number(n) => Ok(Operand::Number(n)),
            Token::Text(s) => Ok(Operand::Text(s)),
            t => Err(Error::Expression(format!(
                "expected a fact name or literal, found {t}"
            ))),
        }
    }
}

fn is_keyword(w: &str) -> bool {
    matches!(w, "and" | "or" | "not" | "exists" | "contains")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactBinding {
    pub name: String,
    pub class: String,
    pub attribute: String,
    /// Optional facts may be missing without making the rule undecidable.
    #[serde(default)]
    pub optional: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleSpec {
    pub rule_id: String,
    pub description: String,
    pub facts: Vec<FactBinding>,
    pub condition: String,
    pub expr: Expr,
    pub recommendations: Vec<String>,
}

impl RuleSpec {
    pub fn new(
        rule_id: impl Into<String>,
        facts: Vec<FactBinding>,
        condition: &str,
        recommendations: Vec<String>,
    ) -> Result<Self> {
        let expr = Expr::parse(condition)?;
        let rule = RuleSpec {
            rule_id: rule_id.into(),
            description: String::new(),
            facts,
            condition: condition.to_string(),
            expr,
            recommendations,
        };
        rule.check()?;
        Ok(rule)
    }

    fn check(&self) -> Result<()> {
        let mut names = BTreeSet::new();
        for f in &self.facts {
            if !names.insert(f.name.as_str()) {
                return Err(Error::Validation(format!(
                    "rule {}: duplicate fact {:?}",
                    self.rule_id, f.name
                )));
            }
        }
        if let Some(unknown) = self
            .expr
            .fact_names()
            .into_iter()
            .find(|n| !names.contains(n))
        {
            return Err(Error::Validation(format!(
                "rule {}: condition references undeclared fact {unknown:?}",
                self.rule_id
            )));
        }
        Ok(())
    }

    /// The same rule with its condition negated.
    pub fn negated(&self) -> RuleSpec {
        RuleSpec {
            condition: format!("not ({})", self.condition),
            expr: Expr::Not(Box::new(self.expr.clone())),
            ..self.clone()
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    rule_id: String,
    #[serde(default)]
    description: String,
    facts: Vec<FactBinding>,
    condition: String,
    #[serde(default)]
    recommendations: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRules {
    rules: Vec<RawRule>,
}

/// Parses a rule file; when `classes` is given, fact bindings are checked against it.
pub fn parse_rules(text: &str, classes: Option<&[ClassSchema]>) -> Result<Vec<RuleSpec>> {
    let raw: RawRules =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("rules: {e}")))?;
    let mut ids = BTreeSet::new();
    let mut out = Vec::with_capacity(raw.rules.len());
    for (i, r) in raw.rules.into_iter().enumerate() {
        if !ids.insert(r.rule_id.clone()) {
            return Err(Error::Validation(format!(
                "rules[{i}].rule_id: duplicate {:?}",
                r.rule_id
            )));
        }
        let expr = Expr::parse(&r.condition)
            .map_err(|e| Error::Validation(format!("rules[{i}].condition: {e}")))?;
        if let Some(classes) = classes {
            for f in &r.facts {
                let known = classes
                    .iter()
                    .find(|c| c.class_name == f.class)
                    .is_some_and(|c| c.attribute(&f.attribute).is_some());
                if !known {
                    return Err(Error::Validation(format!(
                        "rules[{i}].facts: {}.{} is not a configured attribute",
                        f.class, f.attribute
                    )));
                }
            }
        }
        let rule = RuleSpec {
            rule_id: r.rule_id,
            description: r.description,
            facts: r.facts,
            condition: r.condition,
            expr,
            recommendations: r.recommendations,
        };
        rule.check()?;
        out.push(rule);
    }
    Ok(out)
}

pub fn load_rules(
    path: impl AsRef<Path>,
    classes: Option<&[ClassSchema]>,
) -> Result<Vec<RuleSpec>> {
    parse_rules(&read_to_string(path.as_ref())?, classes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactSource {
    pub section_id: String,
    pub attribute: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub fact_name: String,
    pub value: Value,
    pub source: FactSource,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeterminationStatus {
    Pass,
    Fail,
    InformationNotFound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Determination {
    pub status: DeterminationStatus,
    pub evidence: Vec<Fact>,
    pub reasoning: String,
    pub recommendations: Vec<String>,
}

/// Collects every occurrence of each bound attribute from successful
/// extractions, by fact then section order.
pub fn curate_facts(rule: &RuleSpec, sections: &[(Section, ExtractionResult)]) -> Vec<Fact> {
    let mut facts = Vec::new();
    for binding in &rule.facts {
        for (section, result) in sections {
            if section.class_name != binding.class || !result.is_ok() {
                continue;
            }
            if let Some(a) = result.attribute(&binding.attribute) {
                facts.push(Fact {
                    fact_name: binding.name.clone(),
                    value: a.value.clone(),
                    source: FactSource {
                        section_id: section.section_id.clone(),
                        attribute: binding.attribute.clone(),
                    },
                    confidence: a.confidence,
                });
            }
        }
    }
    facts
}

fn occurrences<'a>(facts: &'a [Fact], name: &str) -> Vec<&'a Value> {
    facts
        .iter()
        .filter(|f| f.fact_name == name)
        .map(|f| &f.value)
        .collect()
}

fn compare(a: &Value, op: CmpOp, b: &Value) -> bool {
    use std::cmp::Ordering;
    let ordering = match (a, b) {
        (Value::Number(x), Value::Number(y)) => x.partial_cmp(y),
        (Value::Text(x), Value::Text(y)) => Some(x.cmp(y)),
        (Value::Number(x), Value::Text(y)) => {
            crate::model::parse_number(y).and_then(|y| x.partial_cmp(&y))
        }
        (Value::Text(x), Value::Number(y)) => {
            crate::model::parse_number(x).and_then(|x| x.partial_cmp(y))
        }
        _ => (a == b).then_some(Ordering::Equal),
    };
    match op {
        CmpOp::Eq => ordering == Some(Ordering::Equal),
        CmpOp::Ne => ordering != Some(Ordering::Equal),
        CmpOp::Lt => ordering == Some(Ordering::Less),
        CmpOp::Le => matches!(ordering, Some(Ordering::Less | Ordering::Equal)),
        CmpOp::Gt => ordering == Some(Ordering::Greater),
        CmpOp::Ge => matches!(ordering, Some(Ordering::Greater | Ordering::Equal)),
        CmpOp::Contains => match (a, b) {
            (Value::Text(x), Value::Text(y)) => x.contains(y.as_str()),
            (Value::Records(rs), v) => rs.iter().any(|r| r.values().any(|f| f == v)),
            _ => false,
        },
    }
}

fn operand_values(o: &Operand, facts: &[Fact]) -> Vec<Value> {
    match o {
        Operand::Fact(n) => occurrences(facts, n).into_iter().cloned().collect(),
        Operand::Number(n) => vec![Value::Number(*n)],
        Operand::Text(s) => vec![Value::Text(s.clone())],
    }
}

fn render_operand(o: &Operand, facts: &[Fact]) -> String {
    let vals = operand_values(o, facts);
    match (o, vals.as_slice()) {
        (Operand::Fact(_), [single]) => single.to_string(),
        (Operand::Fact(_), many) => {
            let parts: Vec<String> = many.iter().map(Value::to_string).collect();
            format!("[{}]", parts.join(", "))
        }
        (Operand::Number(n), _) => n.to_string(),
        (Operand::Text(s), _) => format!("{s:?}"),
    }
}

/// Evaluates `expr` over `facts`, returning the truth value and the expression
/// rendered with substituted values.
fn evaluate(expr: &Expr, facts: &[Fact]) -> (bool, String) {
    match expr {
        Expr::Cmp(a, op, b) => {
            let (av, bv) = (operand_values(a, facts), operand_values(b, facts));
            let holds = av.iter().all(|x| bv.iter().all(|y| compare(x, *op, y)));
            let text = format!(
                "{} {} {}",
                render_operand(a, facts),
                op.symbol(),
                render_operand(b, facts)
            );
            (holds, text)
        }
        Expr::Exists(n) => {
            let count = occurrences(facts, n).len();
            (count > 0, format!("exists {n} ({count} found)"))
        }
        Expr::Not(e) => {
            let (v, t) = evaluate(e, facts);
            (!v, format!("not ({t})"))
        }
        Expr::And(a, b) => {
            let ((va, ta), (vb, tb)) = (evaluate(a, facts), evaluate(b, facts));
            (va && vb, format!("({ta} and {tb})"))
        }
        Expr::Or(a, b) => {
            let ((va, ta), (vb, tb)) = (evaluate(a, facts), evaluate(b, facts));
            (va || vb, format!("({ta} or {tb})"))
        }
    }
}

/// Decides `rule` from curated facts only.
pub fn consolidate(rule: &RuleSpec, facts: &[Fact]) -> Determination {
    let missing: Vec<&str> = rule
        .facts
        .iter()
        .filter(|b| !b.optional && !facts.iter().any(|f| f.fact_name == b.name))
        .map(|b| b.name.as_str())
        .collect();
    let referenced = rule.expr.fact_names();
    let evidence: Vec<Fact> = facts
        .iter()
        .filter(|f| referenced.contains(f.fact_name.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Determination {
            status: DeterminationStatus::InformationNotFound,
            evidence,
            reasoning: format!("required facts not found: {}", missing.join(", ")),
            recommendations: Vec::new(),
        };
    }
    let (holds, rendered) = evaluate(&rule.expr, facts);
    Determination {
        status: if holds {
            DeterminationStatus::Pass
        } else {
            DeterminationStatus::Fail
        },
        evidence,
        reasoning: format!("{rendered} is {holds}"),
        recommendations: if holds {
            Vec::new()
        } else {
            rule.recommendations.clone()
        },
    }
}

/// One determination per rule, in rule order.
pub fn validate_all(
    rules: &[RuleSpec],
    sections: &[(Section, ExtractionResult)],
) -> Vec<(String, Determination)> {
    rules
        .iter()
        .map(|r| {
            (
                r.rule_id.clone(),
                consolidate(r, &curate_facts(r, sections)),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::{AttributeValue, ExtractionStatus, Provenance, Usage};
    use proptest::prelude::*;

    fn binding(name: &str, class: &str, attribute: &str) -> FactBinding {
        FactBinding {
            name: name.into(),
            class: class.into(),
            attribute: attribute.into(),
            optional: false,
        }
    }

    fn limit_rule() -> RuleSpec {
        RuleSpec::new(
            "total-under-limit",
            vec![
                binding("total", "invoice", "total"),
                binding("limit", "policy", "limit"),
            ],
            "total <= limit",
            vec!["Escalate to an approver".into()],
        )
        .unwrap()
    }

    fn fact(name: &str, v: f64) -> Fact {
        Fact {
            fact_name: name.into(),
            value: Value::Number(v),
            source: FactSource {
                section_id: "s".into(),
                attribute: name.into(),
            },
            confidence: 1.0,
        }
    }

    #[test]
    fn consolidate_examples() {
        let r = limit_rule();
        let d = consolidate(&r, &[fact("total", 120.0), fact("limit", 500.0)]);
        assert_eq!(d.status, DeterminationStatus::Pass);
        assert_eq!(d.evidence.len(), 2);
        assert!(d.recommendations.is_empty());

        let d = consolidate(&r, &[fact("total", 900.0), fact("limit", 500.0)]);
        assert_eq!(d.status, DeterminationStatus::Fail);
        assert!(
            d.reasoning.contains("900 <= 500 is false"),
            "{}",
            d.reasoning
        );
        assert_eq!(d.recommendations, vec!["Escalate to an approver"]);

        let d = consolidate(&r, &[fact("total", 120.0)]);
        assert_eq!(d.status, DeterminationStatus::InformationNotFound);
        assert!(d.reasoning.contains("limit"));
    }

    #[test]
    fn universal_semantics() {
        let r = limit_rule();
        let d = consolidate(
            &r,
            &[
                fact("total", 120.0),
                fact("total", 800.0),
                fact("limit", 500.0),
            ],
        );
        assert_eq!(d.status, DeterminationStatus::Fail);
        assert!(
            d.reasoning.starts_with("[120, 800] <= 500"),
            "{}",
            d.reasoning
        );
    }

    #[test]
    fn parser() {
        let e = Expr::parse("not (a > 1 and b contains 'x') or exists c").unwrap();
        assert_eq!(
            e.fact_names().into_iter().collect::<Vec<_>>(),
            vec!["a", "b", "c"]
        );
        for bad in [
            "", "a >", "a ~ b", "(a > 1", "a > 1 b", "exists 3", "'open", "and > 1",
        ] {
            assert!(
                matches!(Expr::parse(bad), Err(Error::Expression(_))),
                "{bad}"
            );
        }
        assert!(RuleSpec::new("r", vec![binding("a", "c", "x")], "a > b", vec![]).is_err());
    }

    #[test]
    fn optional_facts_and_exists() {
        let mut b = binding("po", "invoice", "po_number");
        b.optional = true;
        let r = RuleSpec::new("has-po", vec![b], "exists po", vec![]).unwrap();
        assert_eq!(consolidate(&r, &[]).status, DeterminationStatus::Fail);
    }

    fn extraction(
        id: &str,
        class: &str,
        attrs: &[(&str, f64)],
        ok: bool,
    ) -> (Section, ExtractionResult) {
        (
            Section {
                section_id: id.into(),
                class_name: class.into(),
                page_indices: vec![0],
            },
            ExtractionResult {
                section_id: id.into(),
                class_name: class.into(),
                attributes: attrs
                    .iter()
                    .map(|(n, v)| AttributeValue {
                        name: n.to_string(),
                        value: Value::Number(*v),
                        confidence: 0.9,
                        bbox: None,
                        justification: None,
                        provenance: Provenance::Model,
                    })
                    .collect(),
                status: if ok {
                    ExtractionStatus::Ok
                } else {
                    ExtractionStatus::Failed
                },
                failure_reason: (!ok).then(|| "x".into()),
                failure_kind: None,
                attempts: 1,
                latency_ms: 0.0,
                cost: 0.0,
                usage: Usage::default(),
                warnings: vec![],
            },
        )
    }

    #[test]
    fn curation() {
        let r = limit_rule();
        let one = vec![extraction("a", "invoice", &[("total", 120.0)], true)];
        let f = curate_facts(&r, &one);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].value, Value::Number(120.0));

        let two = vec![
            extraction("a", "invoice", &[("total", 120.0)], true),
            extraction("b", "invoice", &[("total", 80.0)], true),
        ];
        let f = curate_facts(&r, &two);
        assert_eq!(
            f.iter()
                .map(|f| f.source.section_id.as_str())
                .collect::<Vec<_>>(),
            vec!["a", "b"]
        );
        assert!(curate_facts(&r, &[extraction("a", "w2", &[("total", 1.0)], true)]).is_empty());
        assert!(
            curate_facts(&r, &[extraction("a", "invoice", &[("total", 1.0)], false)]).is_empty()
        );
    }

    #[test]
    fn validate_all_keeps_order() {
        assert!(validate_all(&[], &[]).is_empty());
        let other = RuleSpec::new(
            "b",
            vec![binding("t", "invoice", "total")],
            "t > 100",
            vec![],
        )
        .unwrap();
        let rules = vec![limit_rule(), other];
        let secs = vec![
            extraction("a", "invoice", &[("total", 120.0)], true),
            extraction("p", "policy", &[("limit", 100.0)], true),
        ];
        let out = validate_all(&rules, &secs);
        assert_eq!(out[0].0, "total-under-limit");
        assert_eq!(out[0].1.status, DeterminationStatus::Fail);
        assert_eq!(out[1].1.status, DeterminationStatus::Pass);
    }

    #[test]
    fn rule_file_parsing() {
        let text = r#"{"rules":[{"rule_id":"r1","facts":[{"name":"t","class":"invoice","attribute":"total"}],
            "condition":"t < 10","recommendations":["check"]}]}"#;
        let rules = parse_rules(text, None).unwrap();
        assert_eq!(rules[0].recommendations, vec!["check"]);
        let bad = text.replace("t < 10", "t <");
        assert!(matches!(parse_rules(&bad, None), Err(Error::Validation(_))));
        let dup = r#"{"rules":[{"rule_id":"r","facts":[],"condition":"1 < 2"},{"rule_id":"r","facts":[],"condition":"1 < 2"}]}"#;
        assert!(parse_rules(dup, None).is_err());
    }

    proptest! {
        #[test]
        fn negation_is_coherent(totals in proptest::collection::vec(0.0f64..1000.0, 1..4), limit in 0.0f64..1000.0) {
            let r = limit_rule();
            let mut facts: Vec<Fact> = totals.iter().map(|t| fact("total", *t)).collect();
            facts.push(fact("limit", limit));
            let d = consolidate(&r, &facts);
            let n = consolidate(&r.negated(), &facts);
            prop_assert_eq!(d.status == DeterminationStatus::Pass, n.status == DeterminationStatus::Fail);
            prop_assert_eq!(d.status == DeterminationStatus::Fail, n.status == DeterminationStatus::Pass);
        }
    }
}
