//! Recursive-descent parser for the rule language.
//!
//! ```text
//! expr    := or
//! or      := and ("||" and)*
//! and     := cmp ("&&" cmp)*
//! cmp     := add (("=="|"!="|"<"|"<="|">"|">=") add)?
//! add     := mul (("+"|"-") mul)*
//! mul     := unary (("*"|"/"|"%") unary)*
//! unary   := ("!"|"-") unary | primary
//! primary := number | string | "true" | "false" | "null"
//!          | ident | ident "(" args ")" | "(" expr ")"
//! ```

use std::fmt;

use thiserror::Error;

use super::ast::{BinaryOp, Builtin, Expr, UnaryOp};
use super::value::Value;

/// Trees deeper than this are rejected so evaluation never exhausts the stack.
pub const MAX_DEPTH: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("at byte {offset}: expected {}, found {found}", .expected.join(" | "))]
pub struct ParseError {
    pub offset: usize,
    pub expected: Vec<String>,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(f64),
    Str(String),
    Ident(String),
    True,
    False,
    Null,
    Op(&'static str),
    LParen,
    RParen,
    Comma,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Number(n) => write!(f, "number {n}"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::True => f.write_str("`true`"),
            Tok::False => f.write_str("`false`"),
            Tok::Null => f.write_str("`null`"),
            Tok::Op(op) => write!(f, "`{op}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

struct Token {
    tok: Tok,
    offset: usize,
}

fn err(offset: usize, expected: &[&str], found: impl fmt::Display) -> ParseError {
    ParseError {
        offset,
        expected: expected.iter().map(|s| s.to_string()).collect(),
        found: found.to_string(),
    }
}

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_'
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    const OPS: [&str; 15] = [
        "||", "&&", "==", "!=", "<=", ">=", "<", ">", "!", "+", "-", "*", "/", "%", ",",
    ];
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    'outer: while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                if i >= bytes.len() || !bytes[i].is_ascii_digit() {
                    return Err(err(i, &["digit"], describe_at(src, i)));
                }
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let n: f64 = src[start..i].parse().expect("digits form a valid float");
            if !n.is_finite() {
                return Err(err(start, &["finite number"], &src[start..i]));
            }
            out.push(Token {
                tok: Tok::Number(n),
                offset: start,
            });
            continue;
        }
        if is_ident_start(c) {
            while i < bytes.len() && is_ident_char(bytes[i]) {
                i += 1;
            }
            let tok = match &src[start..i] {
                "true" => Tok::True,
                "false" => Tok::False,
                "null" => Tok::Null,
                word => Tok::Ident(word.to_owned()),
            };
            out.push(Token { tok, offset: start });
            continue;
        }
        if c == b'"' {
            i += 1;
            let mut s = String::new();
            let mut chunk = i;
            loop {
                match bytes.get(i) {
                    None => return Err(err(i, &["`\"`"], "end of input")),
                    Some(b'"') => {
                        s.push_str(&src[chunk..i]);
                        i += 1;
                        break;
                    }
                    Some(b'\\') => {
                        s.push_str(&src[chunk..i]);
                        match bytes.get(i + 1) {
                            Some(b'"') => s.push('"'),
                            Some(b'\\') => s.push('\\'),
                            _ => return Err(err(i + 1, &["`\"`", "`\\`"], describe_at(src, i + 1))),
                        }
                        i += 2;
                        chunk = i;
                    }
                    Some(_) => i += 1,
                }
            }
            out.push(Token {
                tok: Tok::Str(s),
                offset: start,
            });
            continue;
        }
        match c {
            b'(' => {
                out.push(Token {
                    tok: Tok::LParen,
                    offset: start,
                });
                i += 1;
                continue;
            }
            b')' => {
                out.push(Token {
                    tok: Tok::RParen,
                    offset: start,
                });
                i += 1;
                continue;
            }
            _ => {}
        }
        for op in OPS {
            if src[i..].starts_with(op) {
                let tok = if op == "," { Tok::Comma } else { Tok::Op(op) };
                out.push(Token { tok, offset: start });
                i += op.len();
                continue 'outer;
            }
        }
        return Err(err(start, &["token"], describe_at(src, start)));
    }
    out.push(Token {
        tok: Tok::Eof,
        offset: src.len(),
    });
    Ok(out)
}

fn describe_at(src: &str, offset: usize) -> String {
    match src[offset..].chars().next() {
        Some(c) => format!("{c:?}"),
        None => "end of input".to_owned(),
    }
}

const PRIMARY_START: &[&str] = &[
    "number",
    "string",
    "`true`",
    "`false`",
    "`null`",
    "identifier",
    "`(`",
    "`!`",
    "`-`",
];

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    nesting: usize,
}

type Parsed = (Expr, usize);

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> &Token {
        let t = &self.tokens[self.pos];
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn peek_op(&self, candidates: &[(&'static str, BinaryOp)]) -> Option<BinaryOp> {
        match &self.peek().tok {
            Tok::Op(op) => candidates.iter().find(|(s, _)| s == op).map(|(_, b)| *b),
            _ => None,
        }
    }

    fn combine(&self, op: BinaryOp, lhs: Parsed, rhs: Parsed, offset: usize) -> Result<Parsed, ParseError> {
        let depth = lhs.1.max(rhs.1) + 1;
        if depth > MAX_DEPTH {
            return Err(err(offset, &["shallower expression"], "expression nested too deeply"));
        }
        Ok((Expr::binary(op, lhs.0, rhs.0), depth))
    }

    fn left_assoc(
        &mut self,
        ops: &[(&'static str, BinaryOp)],
        next: fn(&mut Self) -> Result<Parsed, ParseError>,
    ) -> Result<Parsed, ParseError> {
        let mut lhs = next(self)?;
        while let Some(op) = self.peek_op(ops) {
            let offset = self.bump().offset;
            let rhs = next(self)?;
            lhs = self.combine(op, lhs, rhs, offset)?;
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Parsed, ParseError> {
        self.left_assoc(&[("||", BinaryOp::Or)], Self::and)
    }

    fn and(&mut self) -> Result<Parsed, ParseError> {
        self.left_assoc(&[("&&", BinaryOp::And)], Self::cmp)
    }

    fn cmp(&mut self) -> Result<Parsed, ParseError> {
        const CMP: &[(&str, BinaryOp)] = &[
            ("==", BinaryOp::Eq),
            ("!=", BinaryOp::Ne),
            ("<", BinaryOp::Lt),
            ("<=", BinaryOp::Le),
            (">", BinaryOp::Gt),
            (">=", BinaryOp::Ge),
        ];
        let lhs = self.add()?;
        match self.peek_op(CMP) {
            Some(op) => {
                let offset = self.bump().offset;
                let rhs = self.add()?;
                self.combine(op, lhs, rhs, offset)
            }
            None => Ok(lhs),
        }
    }

    fn add(&mut self) -> Result<Parsed, ParseError> {
        self.left_assoc(&[("+", BinaryOp::Add), ("-", BinaryOp::Sub)], Self::mul)
    }

    fn mul(&mut self) -> Result<Parsed, ParseError> {
        self.left_assoc(
            &[("*", BinaryOp::Mul), ("/", BinaryOp::Div), ("%", BinaryOp::Rem)],
            Self::unary,
        )
    }

    fn unary(&mut self) -> Result<Parsed, ParseError> {
        let op = match self.peek().tok {
            Tok::Op("!") => UnaryOp::Not,
            Tok::Op("-") => UnaryOp::Negate,
            _ => return self.primary(),
        };
        let offset = self.bump().offset;
        let (operand, depth) = self.unary()?;
        if depth + 1 > MAX_DEPTH {
            return Err(err(offset, &["shallower expression"], "expression nested too deeply"));
        }
        Ok((Expr::unary(op, operand), depth + 1))
    }

    fn primary(&mut self) -> Result<Parsed, ParseError> {
        let Token { tok, offset } = self.bump();
        let offset = *offset;
        let tok = tok.clone();
        // Grouping adds no tree depth, so bound parenthesis nesting separately.
        self.nesting += 1;
        if self.nesting > MAX_DEPTH {
            return Err(err(offset, &["shallower expression"], "expression nested too deeply"));
        }
        let result = self.primary_inner(tok, offset);
        self.nesting -= 1;
        result
    }

    fn primary_inner(&mut self, tok: Tok, offset: usize) -> Result<Parsed, ParseError> {
        let leaf = |v: Value| Ok((Expr::Literal(v), 1));
        match tok {
            Tok::Number(n) => leaf(Value::Number(n)),
            Tok::Str(s) => leaf(Value::String(s)),
            Tok::True => leaf(Value::Bool(true)),
            Tok::False => leaf(Value::Bool(false)),
            Tok::Null => leaf(Value::Null),
            Tok::Ident(name) => {
                if self.peek().tok != Tok::LParen {
                    return Ok((Expr::Var(name), 1));
                }
                let func = Builtin::from_name(&name).ok_or_else(|| {
                    err(
                        offset,
                        &["`num`", "`lower`", "`len`", "`contains`"],
                        format!("unknown function `{name}`"),
                    )
                })?;
                self.bump();
                let mut args = Vec::new();
                let mut depth = 0;
                if self.peek().tok != Tok::RParen {
                    loop {
                        let (arg, d) = self.or()?;
                        depth = depth.max(d);
                        args.push(arg);
                        if self.peek().tok == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect_rparen(&["`,`", "`)`"])?;
                if args.len() != func.arity() {
                    return Err(err(
                        offset,
                        &[&format!("{} argument(s) to `{}`", func.arity(), func.name())],
                        format!("{} argument(s)", args.len()),
                    ));
                }
                if depth + 1 > MAX_DEPTH {
                    return Err(err(offset, &["shallower expression"], "expression nested too deeply"));
                }
                Ok((Expr::Call { func, args }, depth + 1))
            }
            Tok::LParen => {
                let inner = self.or()?;
                self.expect_rparen(&["`)`"])?;
                Ok(inner)
            }
            other => Err(err(offset, PRIMARY_START, other)),
        }
    }

    fn expect_rparen(&mut self, expected: &[&str]) -> Result<(), ParseError> {
        let t = self.peek();
        if t.tok == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            Err(err(t.offset, expected, &t.tok))
        }
    }
}

/// Parses rule source into an expression tree.
pub fn parse_rule(source: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        nesting: 0,
    };
    let (expr, _) = parser.or()?;
    let t = parser.peek();
    if t.tok != Tok::Eof {
        let expected: &[&str] = match t.tok {
            Tok::Op("==" | "!=" | "<" | "<=" | ">" | ">=") => &["`&&`", "`||`", "end of input"],
            _ => &["operator", "end of input"],
        };
        return Err(err(t.offset, expected, &t.tok));
    }
    Ok(expr)
}
