//! Subpopulation predicates over item attributes.
//!
//! Grammar:
//!
//! ```text
//! expr   := or
//! or     := and ("||" and)*
//! and    := unary ("&&" unary)*
//! unary  := "!" unary | "(" expr ")" | "true" | "*" | cmp
//! cmp    := name op value      op in == != < <= > >=
//! ```
//!
//! `value` is a bare word or a quoted string. Ordering comparisons are
//! numeric when both sides parse as numbers, lexicographic otherwise.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sketch::Attributes;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
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
        }
    }

    fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Ge => ord != Less,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    True,
    Cmp { attribute: String, op: CmpOp, value: String },
    Not(Box<Predicate>),
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
}

impl Predicate {
    pub fn all() -> Self {
        Predicate::True
    }

    /// `attribute == value`
    pub fn equals(attribute: impl Into<String>, value: impl Into<String>) -> Self {
        Predicate::Cmp {
            attribute: attribute.into(),
            op: CmpOp::Eq,
            value: value.into(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let tokens = tokenize(text)?;
        let mut p = Parser { tokens, pos: 0 };
        let expr = p.or()?;
        if p.pos != p.tokens.len() {
            return Err(Error::parse(
                format!("predicate token {}", p.pos + 1),
                format!("unexpected `{}`", p.tokens[p.pos]),
            ));
        }
        Ok(expr)
    }

    /// Evaluates on one item. `id` is only used in error messages.
    pub fn eval(&self, id: &str, attributes: &Attributes) -> Result<bool> {
        Ok(match self {
            Predicate::True => true,
            Predicate::Cmp { attribute, op, value } => {
                let actual = attributes.get(attribute).ok_or_else(|| Error::Evaluation {
                    item: id.to_string(),
                    message: format!("missing attribute `{attribute}`"),
                })?;
                let ord = match (actual.parse::<f64>(), value.parse::<f64>()) {
                    (Ok(a), Ok(b)) if !a.is_nan() && !b.is_nan() => a.total_cmp(&b),
                    _ => actual.as_str().cmp(value.as_str()),
                };
                op.holds(ord)
            }
            Predicate::Not(p) => !p.eval(id, attributes)?,
            Predicate::And(a, b) => a.eval(id, attributes)? && b.eval(id, attributes)?,
            Predicate::Or(a, b) => a.eval(id, attributes)? || b.eval(id, attributes)?,
        })
    }
}

impl FromStr for Predicate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Predicate::parse(s)
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::True => f.write_str("true"),
            Predicate::Cmp { attribute, op, value } => write!(f, "{attribute} {} {value:?}", op.symbol()),
            Predicate::Not(p) => write!(f, "!({p})"),
            Predicate::And(a, b) => write!(f, "({a} && {b})"),
            Predicate::Or(a, b) => write!(f, "({a} || {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Word(String),
    Quoted(String),
    Op(CmpOp),
    And,
    Or,
    Not,
    Open,
    Close,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Word(w) => f.write_str(w),
            Token::Quoted(w) => write!(f, "{w:?}"),
            Token::Op(op) => f.write_str(op.symbol()),
            Token::And => f.write_str("&&"),
            Token::Or => f.write_str("||"),
            Token::Not => f.write_str("!"),
            Token::Open => f.write_str("("),
            Token::Close => f.write_str(")"),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |i: usize, msg: &str| Error::parse(format!("predicate column {}", i + 1), msg.to_string());
    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                out.push(Token::Open);
                i += 1;
            }
            ')' => {
                out.push(Token::Close);
                i += 1;
            }
            '&' if next == Some('&') => {
                out.push(Token::And);
                i += 2;
            }
            '|' if next == Some('|') => {
                out.push(Token::Or);
                i += 2;
            }
            '=' if next == Some('=') => {
                out.push(Token::Op(CmpOp::Eq));
                i += 2;
            }
            '!' if next == Some('=') => {
                out.push(Token::Op(CmpOp::Ne));
                i += 2;
            }
            '!' => {
                out.push(Token::Not);
                i += 1;
            }
            '<' | '>' => {
                let eq = next == Some('=');
                out.push(Token::Op(match (c, eq) {
                    ('<', false) => CmpOp::Lt,
                    ('<', true) => CmpOp::Le,
                    ('>', false) => CmpOp::Gt,
                    _ => CmpOp::Ge,
                }));
                i += if eq { 2 } else { 1 };
            }
            '"' | '\'' => {
                let start = i;
                i += 1;
                let mut s = String::new();
                while i < chars.len() && chars[i] != c {
                    s.push(chars[i]);
                    i += 1;
                }
                if i == chars.len() {
                    return Err(err(start, "unterminated string"));
                }
                i += 1;
                out.push(Token::Quoted(s));
            }
            _ => {
                let start = i;
                let mut s = String::new();
                while i < chars.len() && !chars[i].is_whitespace() && !"()&|=!<>\"'".contains(chars[i]) {
                    s.push(chars[i]);
                    i += 1;
                }
                if s.is_empty() {
                    return Err(err(start, &format!("unexpected character `{c}`")));
                }
                out.push(Token::Word(s));
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn fail(&self, msg: impl Into<String>) -> Error {
        Error::parse(format!("predicate token {}", self.pos + 1), msg)
    }

    fn or(&mut self) -> Result<Predicate> {
        let mut lhs = self.and()?;
        while self.peek() == Some(&Token::Or) {
            self.pos += 1;
            lhs = Predicate::Or(Box::new(lhs), Box::new(self.and()?));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Predicate> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&Token::And) {
            self.pos += 1;
            lhs = Predicate::And(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Predicate> {
        match self.peek().cloned() {
            Some(Token::Not) => {
                self.pos += 1;
                Ok(Predicate::Not(Box::new(self.unary()?)))
            }
            Some(Token::Open) => {
                self.pos += 1;
                let e = self.or()?;
                if self.peek() != Some(&Token::Close) {
                    return Err(self.fail("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(Token::Word(w)) if (w == "true" || w == "*") && !matches!(self.tokens.get(self.pos + 1), Some(Token::Op(_))) => {
                self.pos += 1;
                Ok(Predicate::True)
            }
            Some(Token::Word(attribute)) => {
                self.pos += 1;
                let op = match self.peek() {
                    Some(Token::Op(op)) => *op,
                    _ => return Err(self.fail(format!("expected comparison after `{attribute}`"))),
                };
                self.pos += 1;
                let value = match self.peek() {
                    Some(Token::Word(v)) | Some(Token::Quoted(v)) => v.clone(),
                    _ => return Err(self.fail("expected a value")),
                };
                self.pos += 1;
                Ok(Predicate::Cmp { attribute, op, value })
            }
            Some(t) => Err(self.fail(format!("unexpected `{t}`"))),
            None => Err(self.fail("unexpected end of predicate")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attrs(pairs: &[(&str, &str)]) -> Attributes {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn equality_and_boolean_ops() {
        let p = Predicate::parse("region == us && !(tier == gold) || size > 10").unwrap();
        assert!(p.eval("a", &attrs(&[("region", "us"), ("tier", "silver"), ("size", "1")])).unwrap());
        assert!(!p.eval("b", &attrs(&[("region", "us"), ("tier", "gold"), ("size", "3")])).unwrap());
        assert!(p.eval("c", &attrs(&[("region", "eu"), ("tier", "gold"), ("size", "11")])).unwrap());
    }

    #[test]
    fn numeric_vs_string_ordering() {
        let p = Predicate::parse("n <= 9").unwrap();
        assert!(p.eval("x", &attrs(&[("n", "9.0")])).unwrap());
        assert!(!p.eval("x", &attrs(&[("n", "10")])).unwrap());
        let p = Predicate::parse("name < 'm'").unwrap();
        assert!(p.eval("x", &attrs(&[("name", "alpha")])).unwrap());
    }

    #[test]
    fn match_all_forms() {
        for text in ["true", "*", "(true)"] {
            assert_eq!(Predicate::parse(text).unwrap(), Predicate::True);
        }
    }

    #[test]
    fn missing_attribute_names_item() {
        let p = Predicate::equals("g", "1");
        let err = p.eval("item-7", &Attributes::new()).unwrap_err();
        assert!(matches!(err, Error::Evaluation { ref item, .. } if item == "item-7"));
    }

    #[test]
    fn syntax_errors() {
        for text in ["a ==", "(a == 1", "a 1", "&& b == 2", "a == 'x"] {
            assert!(matches!(Predicate::parse(text), Err(Error::Parse { .. })), "{text}");
        }
    }
}
