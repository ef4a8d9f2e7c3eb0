//! Bound expressions.
//!
//! A bound is either a linear combination of previously declared features
//! plus a constant (`0.1*r4`, `beta2 - 20`, `r2s`) or a single conditional
//! choosing between two linear forms (`0 if Z_b > 11 else Z_b`).

/// `constant + sum(coefficient * value[feature])`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearExpr {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl LinearExpr {
    pub fn constant(value: f64) -> Self {
        Self {
            constant: value,
            terms: Vec::new(),
        }
    }

    pub fn eval(&self, values: &[f64]) -> Option<f64> {
        let mut acc = self.constant;
        for &(index, coefficient) in &self.terms {
            acc += coefficient * values.get(index)?;
        }
        Some(acc)
    }

    fn render(&self, names: &[String]) -> String {
        let mut out = String::new();
        for &(index, coefficient) in &self.terms {
            let name = &names[index];
            let magnitude = coefficient.abs();
            if out.is_empty() {
                if coefficient < 0.0 {
                    out.push('-');
                }
            } else if coefficient < 0.0 {
                out.push_str(" - ");
            } else {
                out.push_str(" + ");
            }
            if magnitude == 1.0 {
                out.push_str(name);
            } else {
                out.push_str(&format!("{magnitude}*{name}"));
            }
        }
        if out.is_empty() {
            return format!("{}", self.constant);
        }
        if self.constant > 0.0 {
            out.push_str(&format!(" + {}", self.constant));
        } else if self.constant < 0.0 {
            out.push_str(&format!(" - {}", -self.constant));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Greater,
    GreaterEqual,
    Less,
    LessEqual,
}

impl Comparison {
    fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparison::Greater => lhs > rhs,
            Comparison::GreaterEqual => lhs >= rhs,
            Comparison::Less => lhs < rhs,
            Comparison::LessEqual => lhs <= rhs,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Comparison::Greater => ">",
            Comparison::GreaterEqual => ">=",
            Comparison::Less => "<",
            Comparison::LessEqual => "<=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundExpr {
    Linear(LinearExpr),
    Conditional {
        feature: usize,
        comparison: Comparison,
        threshold: f64,
        then: LinearExpr,
        otherwise: LinearExpr,
    },
}

impl BoundExpr {
    pub fn constant(value: f64) -> Self {
        BoundExpr::Linear(LinearExpr::constant(value))
    }

    /// Returns `None` when a referenced feature has no value in `values`.
    pub fn eval(&self, values: &[f64]) -> Option<f64> {
        match self {
            BoundExpr::Linear(linear) => linear.eval(values),
            BoundExpr::Conditional {
                feature,
                comparison,
                threshold,
                then,
                otherwise,
            } => {
                let lhs = *values.get(*feature)?;
                if comparison.holds(lhs, *threshold) {
                    then.eval(values)
                } else {
                    otherwise.eval(values)
                }
            }
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            BoundExpr::Linear(linear) if linear.terms.is_empty() => Some(linear.constant),
            _ => None,
        }
    }

    /// Indices of every feature the expression reads.
    pub fn references(&self) -> Vec<usize> {
        let mut out: Vec<usize> = match self {
            BoundExpr::Linear(linear) => linear.terms.iter().map(|t| t.0).collect(),
            BoundExpr::Conditional {
                feature,
                then,
                otherwise,
                ..
            } => std::iter::once(*feature)
                .chain(then.terms.iter().map(|t| t.0))
                .chain(otherwise.terms.iter().map(|t| t.0))
                .collect(),
        };
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn render(&self, names: &[String]) -> String {
        match self {
            BoundExpr::Linear(linear) => linear.render(names),
            BoundExpr::Conditional {
                feature,
                comparison,
                threshold,
                then,
                otherwise,
            } => format!(
                "{} if {} {} {} else {}",
                then.render(names),
                names[*feature],
                comparison.symbol(),
                threshold,
                otherwise.render(names)
            ),
        }
    }
}

/// Parse failure inside a single expression; `offset` is a byte offset into
/// the expression text.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ExprError {
    pub offset: usize,
    pub kind: ExprErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum ExprErrorKind {
    Syntax(String),
    UnknownReference(String),
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Cmp(Comparison),
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ExprError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' => i += 1,
            b'+' => {
                tokens.push((i, Token::Plus));
                i += 1;
            }
            b'-' => {
                tokens.push((i, Token::Minus));
                i += 1;
            }
            b'*' => {
                tokens.push((i, Token::Star));
                i += 1;
            }
            b'>' | b'<' => {
                let or_equal = bytes.get(i + 1) == Some(&b'=');
                let cmp = match (c, or_equal) {
                    (b'>', false) => Comparison::Greater,
                    (b'>', true) => Comparison::GreaterEqual,
                    (b'<', false) => Comparison::Less,
                    _ => Comparison::LessEqual,
                };
                tokens.push((i, Token::Cmp(cmp)));
                i += if or_equal { 2 } else { 1 };
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let literal = &text[start..i];
                let value: f64 = literal.parse().map_err(|_| ExprError {
                    offset: start,
                    kind: ExprErrorKind::Syntax(format!("malformed number `{literal}`")),
                })?;
                tokens.push((start, Token::Number(value)));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                tokens.push((start, Token::Ident(text[start..i].to_string())));
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(ExprError {
                    offset: i,
                    kind: ExprErrorKind::Syntax(format!("unexpected character `{ch}`")),
                });
            }
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
    resolve: &'a dyn Fn(&str) -> Option<usize>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|t| &t.1)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |t| t.0)
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError {
            offset: self.offset(),
            kind: ExprErrorKind::Syntax(message.into()),
        })
    }

    fn is_keyword(&self, keyword: &str) -> bool {
        matches!(self.peek(), Some(Token::Ident(name)) if name == keyword)
    }

    fn reference(&mut self, name: &str, offset: usize) -> Result<usize, ExprError> {
        if name == "inf" || name == "infinity" {
            return Err(ExprError {
                offset,
                kind: ExprErrorKind::Unbounded,
            });
        }
        (self.resolve)(name).ok_or(ExprError {
            offset,
            kind: ExprErrorKind::UnknownReference(name.to_string()),
        })
    }

    fn term(&mut self) -> Result<(Option<usize>, f64), ExprError> {
        let mut coefficient = 1.0;
        let mut feature = None;
        loop {
            let offset = self.offset();
            match self.peek().cloned() {
                Some(Token::Number(value)) => {
                    coefficient *= value;
                    self.pos += 1;
                }
                Some(Token::Ident(name)) if name != "if" && name != "else" => {
                    if feature.is_some() {
                        return self.syntax("product of two features is not a linear bound");
                    }
                    feature = Some(self.reference(&name, offset)?);
                    self.pos += 1;
                }
                _ => return self.syntax("expected a number or a feature name"),
            }
            if self.peek() == Some(&Token::Star) {
                self.pos += 1;
            } else {
                return Ok((feature, coefficient));
            }
        }
    }

    fn linear(&mut self) -> Result<LinearExpr, ExprError> {
        let mut expr = LinearExpr::constant(0.0);
        let mut sign = 1.0;
        loop {
            while let Some(Token::Plus | Token::Minus) = self.peek() {
                if self.peek() == Some(&Token::Minus) {
                    sign = -sign;
                }
                self.pos += 1;
            }
            let (feature, coefficient) = self.term()?;
            let coefficient = sign * coefficient;
            match feature {
                Some(index) => match expr.terms.iter_mut().find(|t| t.0 == index) {
                    Some(existing) => existing.1 += coefficient,
                    None => expr.terms.push((index, coefficient)),
                },
                None => expr.constant += coefficient,
            }
            sign = 1.0;
            match self.peek() {
                Some(Token::Plus | Token::Minus) => continue,
                _ => break,
            }
        }
        if !expr.constant.is_finite() {
            return self.syntax("non-finite constant");
        }
        Ok(expr)
    }

    fn bound(&mut self) -> Result<BoundExpr, ExprError> {
        let then = self.linear()?;
        if !self.is_keyword("if") {
            return Ok(BoundExpr::Linear(then));
        }
        self.pos += 1;
        let offset = self.offset();
        let feature = match self.peek().cloned() {
            Some(Token::Ident(name)) => {
                let index = self.reference(&name, offset)?;
                self.pos += 1;
                index
            }
            _ => return self.syntax("expected a feature name after `if`"),
        };
        let comparison = match self.peek() {
            Some(Token::Cmp(cmp)) => *cmp,
            _ => return self.syntax("expected a comparison (>, >=, <, <=)"),
        };
        self.pos += 1;
        let negative = if self.peek() == Some(&Token::Minus) {
            self.pos += 1;
            true
        } else {
            false
        };
        let threshold = match self.peek() {
            Some(Token::Number(value)) => {
                if negative {
                    -value
                } else {
                    *value
                }
            }
            _ => return self.syntax("expected a numeric threshold"),
        };
        self.pos += 1;
        if !self.is_keyword("else") {
            return self.syntax("expected `else`");
        }
        self.pos += 1;
        let otherwise = self.linear()?;
        Ok(BoundExpr::Conditional {
            feature,
            comparison,
            threshold,
            then,
            otherwise,
        })
    }
}

/// Parse a bound expression; `resolve` maps a feature name to its index and
/// must only accept features declared before the one being parsed.
pub(crate) fn parse_bound(
    text: &str,
    resolve: &dyn Fn(&str) -> Option<usize>,
) -> Result<BoundExpr, ExprError> {
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Err(ExprError {
            offset: 0,
            kind: ExprErrorKind::Syntax("empty bound expression".into()),
        });
    }
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.len(),
        resolve,
    };
    let expr = parser.bound()?;
    if parser.pos != parser.tokens.len() {
        return parser.syntax("unexpected trailing input");
    }
    Ok(expr)
}
