//! Arithmetic expressions over `x` and `y`.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('+' | '-') unary | power
//! power := atom ('^' unary)?
//! atom  := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Names are the variables `x`, `y`, `r` (distance to the origin) and the
//! constants `pi`, `e`. The Unicode minus sign is accepted as `-`.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq)]
pub struct ExprError {
    /// Character offset into the source.
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at character {}", self.message, self.offset + 1)
    }
}

impl std::error::Error for ExprError {}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Token {
    Num(f64),
    Ident(usize, usize),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    X,
    Y,
    R,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Tanh,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "tanh" => Func::Tanh,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn apply(self, args: &[f64]) -> f64 {
        let a = args[0];
        match self {
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Tan => a.tan(),
            Func::Exp => a.exp(),
            Func::Log => a.ln(),
            Func::Sqrt => a.sqrt(),
            Func::Abs => a.abs(),
            Func::Tanh => a.tanh(),
            Func::Min => a.min(args[1]),
            Func::Max => a.max(args[1]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::Var(Var::X) => x,
            Node::Var(Var::Y) => y,
            Node::Var(Var::R) => x.hypot(y),
            Node::Neg(a) => -a.eval(x, y),
            Node::Bin(op, a, b) => {
                let (a, b) = (a.eval(x, y), b.eval(x, y));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => pow(a, b),
                }
            }
            Node::Call(f, args) => {
                let vals: Vec<f64> = args.iter().map(|a| a.eval(x, y)).collect();
                f.apply(&vals)
            }
        }
    }

    fn uses(&self, v: Var) -> bool {
        match self {
            Node::Num(_) => false,
            Node::Var(w) => *w == v || (*w == Var::R && v != Var::R),
            Node::Neg(a) => a.uses(v),
            Node::Bin(_, a, b) => a.uses(v) || b.uses(v),
            Node::Call(_, args) => args.iter().any(|a| a.uses(v)),
        }
    }
}

fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

/// A parsed expression; cheap to clone and evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl Expr {
    pub fn parse(source: &str) -> Result<Expr, ExprError> {
        let chars: Vec<char> = source.chars().collect();
        let tokens = tokenize(&chars)?;
        let mut p = Parser {
            chars: &chars,
            tokens: &tokens,
            pos: 0,
        };
        let root = p.expr()?;
        if let Some(&(off, _)) = p.tokens.get(p.pos) {
            return Err(ExprError {
                offset: off,
                message: "unexpected trailing input".into(),
            });
        }
        Ok(Expr {
            source: source.trim().to_string(),
            root,
        })
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.root.eval(x, y)
    }

    pub fn eval_at(&self, p: [f64; 2]) -> f64 {
        self.root.eval(p[0], p[1])
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// True when the expression does not depend on `y`.
    pub fn is_one_dimensional(&self) -> bool {
        !self.root.uses(Var::Y)
    }

    /// `Some(c)` when the expression has no variables.
    pub fn as_constant(&self) -> Option<f64> {
        if self.root.uses(Var::X) || self.root.uses(Var::Y) {
            None
        } else {
            Some(self.root.eval(0.0, 0.0))
        }
    }
}

impl FromStr for Expr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

fn tokenize(chars: &[char]) -> Result<Vec<(usize, Token)>, ExprError> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        let tok = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '+' => Token::Plus,
            '-' | '\u{2212}' => Token::Minus,
            '*' => Token::Star,
            '/' => Token::Slash,
            '^' => Token::Caret,
            '(' => Token::LParen,
            ')' => Token::RParen,
            ',' => Token::Comma,
            c if c.is_ascii_digit() || c == '.' => {
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && matches!(chars[j], '+' | '-' | '\u{2212}') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text: String = chars[start..i]
                    .iter()
                    .map(|&c| if c == '\u{2212}' { '-' } else { c })
                    .collect();
                let v = text.parse::<f64>().map_err(|_| ExprError {
                    offset: start,
                    message: format!("malformed number '{text}'"),
                })?;
                out.push((start, Token::Num(v)));
                continue;
            }
            c if c.is_alphabetic() || c == '_' => {
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((start, Token::Ident(start, i)));
                continue;
            }
            other => {
                return Err(ExprError {
                    offset: start,
                    message: format!("unexpected character '{other}'"),
                })
            }
        };
        out.push((start, tok));
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    chars: &'a [char],
    tokens: &'a [(usize, Token)],
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<Token> {
        self.tokens.get(self.pos).map(|t| t.1)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|t| t.0)
            .unwrap_or(self.chars.len())
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Token, what: &str) -> Result<(), ExprError> {
        if self.peek() == Some(tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Token::Plus) => BinOp::Add,
                Some(Token::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Token::Star) => BinOp::Mul,
                Some(Token::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some(Token::Minus) => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(Token::Plus) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some(Token::Caret) {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(Token::RParen, "')'")?;
                Ok(e)
            }
            Some(Token::Ident(s, e)) => {
                let name: String = self.chars[s..e].iter().collect();
                let at = self.offset();
                self.pos += 1;
                if self.peek() == Some(Token::LParen) {
                    let Some(func) = Func::lookup(&name) else {
                        return Err(ExprError {
                            offset: at,
                            message: format!("unknown function '{name}'"),
                        });
                    };
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while self.peek() == Some(Token::Comma) {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(Token::RParen, "')'")?;
                    if args.len() != func.arity() {
                        return Err(ExprError {
                            offset: at,
                            message: format!(
                                "'{name}' takes {} argument(s), got {}",
                                func.arity(),
                                args.len()
                            ),
                        });
                    }
                    return Ok(Node::Call(func, args));
                }
                match name.as_str() {
                    "x" => Ok(Node::Var(Var::X)),
                    "y" => Ok(Node::Var(Var::Y)),
                    "r" => Ok(Node::Var(Var::R)),
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    "e" => Ok(Node::Num(std::f64::consts::E)),
                    _ => Err(ExprError {
                        offset: at,
                        message: format!("unknown name '{name}'"),
                    }),
                }
            }
            Some(_) => self.error("expected a number, name or '('"),
            None => self.error("unexpected end of expression"),
        }
    }
}
