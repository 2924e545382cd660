//! A small arithmetic expression language in the variables `t` and `omega`.
//!
//! ```text
//! expr  := term (("+"|"-") term)*
//! term  := unary (("*"|"/") unary)*
//! unary := "-" unary | power
//! power := atom ("^" unary)?
//! atom  := number | "t" | "omega" | "pi" | ident "(" expr ")" | "(" expr ")"
//! ```

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        offset: usize,
        expected: Vec<&'static str>,
        found: String,
    },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },

    #[error("evaluation error at byte {offset}: {message}")]
    Eval { offset: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Sign,
    Sinh,
    Cosh,
    Tanh,
    Sech,
    Arccosh,
}

const FUNCS: [(&str, Func); 13] = [
    ("sin", Func::Sin),
    ("cos", Func::Cos),
    ("tan", Func::Tan),
    ("exp", Func::Exp),
    ("log", Func::Log),
    ("sqrt", Func::Sqrt),
    ("abs", Func::Abs),
    ("sign", Func::Sign),
    ("sinh", Func::Sinh),
    ("cosh", Func::Cosh),
    ("tanh", Func::Tanh),
    ("sech", Func::Sech),
    ("arccosh", Func::Arccosh),
];

impl Func {
    pub fn name(self) -> &'static str {
        FUNCS.iter().find(|(_, f)| *f == self).unwrap().0
    }

    fn lookup(name: &str) -> Option<Func> {
        FUNCS.iter().find(|(n, _)| *n == name).map(|(_, f)| *f)
    }
}

#[derive(Debug, Clone)]
pub enum ExprKind {
    Num(f64),
    T,
    Omega,
    Pi,
    Neg(Box<ExprAst>),
    Bin(BinOp, Box<ExprAst>, Box<ExprAst>),
    Call(Func, Box<ExprAst>),
}

/// Expression tree; every node remembers the byte offset it was parsed from.
#[derive(Debug, Clone)]
pub struct ExprAst {
    pub kind: ExprKind,
    pub offset: usize,
}

// Trees compare structurally; source offsets are ignored.
impl PartialEq for ExprAst {
    fn eq(&self, other: &Self) -> bool {
        match (&self.kind, &other.kind) {
            (ExprKind::Num(a), ExprKind::Num(b)) => a.to_bits() == b.to_bits(),
            (ExprKind::T, ExprKind::T)
            | (ExprKind::Omega, ExprKind::Omega)
            | (ExprKind::Pi, ExprKind::Pi) => true,
            (ExprKind::Neg(a), ExprKind::Neg(b)) => a == b,
            (ExprKind::Bin(o1, a1, b1), ExprKind::Bin(o2, a2, b2)) => {
                o1 == o2 && a1 == a2 && b1 == b2
            }
            (ExprKind::Call(f1, a1), ExprKind::Call(f2, a2)) => f1 == f2 && a1 == a2,
            _ => false,
        }
    }
}

impl ExprAst {
    pub fn uses_omega(&self) -> bool {
        match &self.kind {
            ExprKind::Omega => true,
            ExprKind::Num(_) | ExprKind::T | ExprKind::Pi => false,
            ExprKind::Neg(a) | ExprKind::Call(_, a) => a.uses_omega(),
            ExprKind::Bin(_, a, b) => a.uses_omega() || b.uses_omega(),
        }
    }

    pub fn uses_t(&self) -> bool {
        match &self.kind {
            ExprKind::T => true,
            ExprKind::Num(_) | ExprKind::Omega | ExprKind::Pi => false,
            ExprKind::Neg(a) | ExprKind::Call(_, a) => a.uses_t(),
            ExprKind::Bin(_, a, b) => a.uses_t() || b.uses_t(),
        }
    }
}

/// Fully parenthesized form; parsing it gives back the same tree.
impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Num(v) => write!(f, "{v:?}"),
            ExprKind::T => f.write_str("t"),
            ExprKind::Omega => f.write_str("omega"),
            ExprKind::Pi => f.write_str("pi"),
            ExprKind::Neg(a) => write!(f, "(-{a})"),
            ExprKind::Bin(op, a, b) => write!(f, "({a}{}{b})", op.symbol()),
            ExprKind::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Sym(c) => format!("`{c}`"),
            Tok::End => "end of input".into(),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == b'.' {
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
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            match text.parse::<f64>() {
                Ok(v) if v.is_finite() => out.push((Tok::Num(v), start)),
                _ => {
                    return Err(ExprError::Syntax {
                        offset: start,
                        expected: vec!["number"],
                        found: format!("`{text}`"),
                    })
                }
            }
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else if b"+-*/^()".contains(&c) {
            out.push((Tok::Sym(c as char), i));
            i += 1;
        } else {
            let ch = src[i..].chars().next().unwrap();
            return Err(ExprError::Syntax {
                offset: i,
                expected: vec!["number", "identifier", "operator"],
                found: format!("`{ch}`"),
            });
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: Vec<&'static str>) -> ExprError {
        ExprError::Syntax {
            offset: self.offset(),
            expected,
            found: self.peek().describe(),
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(vec![if c == ')' { "`)`" } else { "`(`" }]))
        }
    }

    fn expr(&mut self) -> Result<ExprAst, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let (_, offset) = self.bump();
            let rhs = self.term()?;
            lhs = ExprAst {
                kind: ExprKind::Bin(op, Box::new(lhs), Box::new(rhs)),
                offset,
            };
        }
    }

    fn term(&mut self) -> Result<ExprAst, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            let (_, offset) = self.bump();
            let rhs = self.unary()?;
            lhs = ExprAst {
                kind: ExprKind::Bin(op, Box::new(lhs), Box::new(rhs)),
                offset,
            };
        }
    }

    fn unary(&mut self) -> Result<ExprAst, ExprError> {
        if *self.peek() == Tok::Sym('-') {
            let (_, offset) = self.bump();
            let inner = self.unary()?;
            return Ok(ExprAst {
                kind: ExprKind::Neg(Box::new(inner)),
                offset,
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<ExprAst, ExprError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Sym('^') {
            let (_, offset) = self.bump();
            let exp = self.unary()?;
            return Ok(ExprAst {
                kind: ExprKind::Bin(BinOp::Pow, Box::new(base), Box::new(exp)),
                offset,
            });
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<ExprAst, ExprError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(ExprAst {
                    kind: ExprKind::Num(v),
                    offset,
                })
            }
            Tok::Sym('(') => {
                self.bump();
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                let kind = match name.as_str() {
                    "t" => ExprKind::T,
                    "omega" => ExprKind::Omega,
                    "pi" => ExprKind::Pi,
                    _ => {
                        let func = Func::lookup(&name)
                            .ok_or(ExprError::UnknownIdentifier { offset, name })?;
                        self.expect('(')?;
                        let arg = self.expr()?;
                        self.expect(')')?;
                        ExprKind::Call(func, Box::new(arg))
                    }
                };
                Ok(ExprAst { kind, offset })
            }
            _ => Err(self.error(vec!["number", "`t`", "`omega`", "`pi`", "function", "`(`"])),
        }
    }
}

pub fn parse_expr(src: &str) -> Result<ExprAst, ExprError> {
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
    };
    let ast = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.error(vec!["operator", "end of input"]));
    }
    Ok(ast)
}

fn domain_err(node: &ExprAst, message: String) -> ExprError {
    ExprError::Eval {
        offset: node.offset,
        message,
    }
}

/// Evaluates the tree, left operand first. A non-finite value produced from
/// finite operands is reported as an error at the producing node.
pub fn eval_expr(ast: &ExprAst, t: f64, omega: f64) -> Result<f64, ExprError> {
    let v = match &ast.kind {
        ExprKind::Num(v) => *v,
        ExprKind::T => t,
        ExprKind::Omega => omega,
        ExprKind::Pi => std::f64::consts::PI,
        ExprKind::Neg(a) => -eval_expr(a, t, omega)?,
        ExprKind::Bin(op, a, b) => {
            let x = eval_expr(a, t, omega)?;
            let y = eval_expr(b, t, omega)?;
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y == 0.0 {
                        return Err(domain_err(ast, "division by zero".into()));
                    }
                    x / y
                }
                BinOp::Pow => {
                    // integer exponents keep exact products for small powers
                    if y.fract() == 0.0 && y.abs() <= 64.0 {
                        if x == 0.0 && y < 0.0 {
                            return Err(domain_err(ast, "zero to a negative power".into()));
                        }
                        x.powi(y as i32)
                    } else {
                        x.powf(y)
                    }
                }
            }
        }
        ExprKind::Call(func, a) => {
            let x = eval_expr(a, t, omega)?;
            match func {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Tan => x.tan(),
                Func::Exp => x.exp(),
                Func::Log => {
                    if x <= 0.0 {
                        return Err(domain_err(ast, format!("log of non-positive value {x}")));
                    }
                    x.ln()
                }
                Func::Sqrt => {
                    if x < 0.0 {
                        return Err(domain_err(ast, format!("sqrt of negative value {x}")));
                    }
                    x.sqrt()
                }
                Func::Abs => x.abs(),
                Func::Sign => {
                    if x > 0.0 {
                        1.0
                    } else if x < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                }
                Func::Sinh => x.sinh(),
                Func::Cosh => x.cosh(),
                Func::Tanh => x.tanh(),
                Func::Sech => 1.0 / x.cosh(),
                Func::Arccosh => {
                    if x < 1.0 {
                        return Err(domain_err(ast, format!("arccosh of {x} < 1")));
                    }
                    x.acosh()
                }
            }
        }
    };
    if !v.is_finite() && t.is_finite() && omega.is_finite() {
        return Err(domain_err(ast, "non-finite result".into()));
    }
    Ok(v)
}
