//! Coefficient expressions of scalar equations: sums of products of real
//! numbers, the imaginary unit `i` and built-in lattice operators.
//!
//! ```text
//! expr   := ['-'] term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := number | 'i' | operator | '(' expr ')'
//! ```
//!
//! Operators: `identity`, `zero`, `laplacian` (compact stencil), `p2`
//! (`-ħ² Σ D²`), `d_x`, `d_y`, `d_z` (central differences).

use relwave::lattice::{central_difference, laplacian_op, momentum_squared_op, Grid, LatticeOperator};
use relwave::C64;

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Open,
    Close,
}

fn tokenize(s: &str) -> Result<Vec<Token>, String> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        let single = match ch {
            '+' => Some(Token::Plus),
            '-' => Some(Token::Minus),
            '*' => Some(Token::Star),
            '(' => Some(Token::Open),
            ')' => Some(Token::Close),
            _ => None,
        };
        if let Some(t) = single {
            out.push(t);
            i += 1;
            continue;
        }
        match ch {
            ' ' | '\t' => i += 1,
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    i += 1;
                    if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                        i += 1;
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                out.push(Token::Num(text.parse().map_err(|_| format!("bad number `{text}`"))?));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token::Ident(chars[start..i].iter().collect()));
            }
            other => return Err(format!("unexpected character `{other}`")),
        }
    }
    Ok(out)
}

/// A scalar times an optional operator.
#[derive(Clone)]
enum Value {
    Scalar(C64),
    Op(LatticeOperator),
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    grid: &'a Grid,
    hbar: f64,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Value, String> {
        let mut acc = if self.peek() == Some(&Token::Minus) {
            self.pos += 1;
            scale(self.term()?, C64::new(-1.0, 0.0))
        } else {
            self.term()?
        };
        while let Some(t) = self.peek() {
            let sign = match t {
                Token::Plus => 1.0,
                Token::Minus => -1.0,
                _ => break,
            };
            self.pos += 1;
            let rhs = scale(self.term()?, C64::new(sign, 0.0));
            acc = add(acc, rhs, self.grid)?;
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Value, String> {
        let mut acc = self.factor()?;
        while self.peek() == Some(&Token::Star) {
            self.pos += 1;
            let rhs = self.factor()?;
            acc = mul(acc, rhs)?;
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Value, String> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Value::Scalar(C64::new(v, 0.0))),
            Some(Token::Open) => {
                let v = self.expr()?;
                match self.next() {
                    Some(Token::Close) => Ok(v),
                    _ => Err("missing `)`".into()),
                }
            }
            Some(Token::Ident(name)) => self.operator(&name),
            Some(t) => Err(format!("unexpected {t:?}")),
            None => Err("unexpected end of expression".into()),
        }
    }

    fn operator(&self, name: &str) -> Result<Value, String> {
        let g = self.grid;
        let op = match name {
            "i" => return Ok(Value::Scalar(C64::new(0.0, 1.0))),
            "identity" => LatticeOperator::identity(g, 1),
            "zero" => LatticeOperator::zero(g, 1),
            "laplacian" => laplacian_op(g).map_err(|e| e.to_string())?,
            "p2" => momentum_squared_op(g, self.hbar).map_err(|e| e.to_string())?,
            "d_x" | "d_y" | "d_z" => {
                let axis = (name.as_bytes()[2] - b'x') as usize;
                central_difference(g, axis).map_err(|e| e.to_string())?
            }
            other => return Err(format!("unknown operator `{other}`")),
        };
        Ok(Value::Op(op))
    }
}

fn scale(v: Value, a: C64) -> Value {
    match v {
        Value::Scalar(s) => Value::Scalar(s * a),
        Value::Op(o) => Value::Op(o.scale(a)),
    }
}

fn to_op(v: Value, grid: &Grid) -> LatticeOperator {
    match v {
        Value::Scalar(s) => LatticeOperator::identity(grid, 1).scale(s),
        Value::Op(o) => o,
    }
}

fn add(a: Value, b: Value, grid: &Grid) -> Result<Value, String> {
    match (a, b) {
        (Value::Scalar(x), Value::Scalar(y)) => Ok(Value::Scalar(x + y)),
        (a, b) => to_op(a, grid).add(&to_op(b, grid)).map(Value::Op).map_err(|e| e.to_string()),
    }
}

fn mul(a: Value, b: Value) -> Result<Value, String> {
    match (a, b) {
        (Value::Scalar(x), Value::Scalar(y)) => Ok(Value::Scalar(x * y)),
        (Value::Scalar(x), Value::Op(o)) | (Value::Op(o), Value::Scalar(x)) => Ok(Value::Op(o.scale(x))),
        (Value::Op(x), Value::Op(y)) => x.compose(&y).map(Value::Op).map_err(|e| e.to_string()),
    }
}

/// Evaluates `text` to a single-component operator on `grid`.
pub fn parse_coefficient(text: &str, grid: &Grid, hbar: f64) -> Result<LatticeOperator, String> {
    let mut p = Parser { tokens: tokenize(text)?, pos: 0, grid, hbar };
    if p.tokens.is_empty() {
        return Err("empty expression".into());
    }
    let v = p.expr()?;
    if p.pos != p.tokens.len() {
        return Err(format!("unexpected {:?}", p.tokens[p.pos]));
    }
    Ok(to_op(v, grid))
}
