//! Arithmetic expressions over `x1..x8`.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'pi' | 'e' | xN | func '(' expr ')' | '(' expr ')'
//! func  := sin | cos | exp | log | sqrt | abs | sgn
//! ```
//!
//! `-x^2` parses as `-(x^2)` and `^` associates to the right.

use std::fmt;

pub const MAX_VARS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct ParseError {
    /// Byte offset into the source text.
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at byte {}", self.message, self.offset)
    }
}

impl std::error::Error for ParseError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Sgn,
}

impl Func {
    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sgn" => Func::Sgn,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression. Variables beyond the slice passed to `eval` read
/// as zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
    arity: usize,
}

/// Value and gradient carried together through the tree.
#[derive(Clone, Copy, Debug)]
struct Dual<const N: usize> {
    v: f64,
    d: [f64; N],
}

impl<const N: usize> Dual<N> {
    fn constant(v: f64) -> Self {
        Self { v, d: [0.0; N] }
    }

    fn chain(self, v: f64, dv: f64) -> Self {
        Self {
            v,
            d: self.d.map(|x| x * dv),
        }
    }

    fn zip(a: Self, b: Self, v: f64, da: f64, db: f64) -> Self {
        let mut d = [0.0; N];
        for (k, dk) in d.iter_mut().enumerate() {
            *dk = a.d[k] * da + b.d[k] * db;
        }
        Self { v, d }
    }
}

impl Expr {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut p = Parser { src: text, pos: 0 };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < text.len() {
            return Err(p.error("unexpected input"));
        }
        let mut arity = 0;
        root.visit(&mut |n| {
            if let Node::Var(i) = n {
                arity = arity.max(i + 1);
            }
        });
        Ok(Self {
            root,
            source: text.to_string(),
            arity,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// One more than the largest variable index used.
    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Whether the variable with zero-based index `i` occurs.
    pub fn uses(&self, i: usize) -> bool {
        let mut found = false;
        self.root.visit(&mut |n| found |= *n == Node::Var(i));
        found
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.root.eval(x)
    }

    /// Value and the partial derivatives with respect to `x1..x8`.
    pub fn eval_grad(&self, x: &[f64]) -> (f64, [f64; MAX_VARS]) {
        let r = self.root.dual::<MAX_VARS>(x);
        (r.v, r.d)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

fn apply(f: Func, v: f64) -> f64 {
    match f {
        Func::Sin => v.sin(),
        Func::Cos => v.cos(),
        Func::Exp => v.exp(),
        Func::Log => v.ln(),
        Func::Sqrt => v.sqrt(),
        Func::Abs => v.abs(),
        Func::Sgn => {
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
    }
}

fn derivative(f: Func, v: f64) -> f64 {
    match f {
        Func::Sin => v.cos(),
        Func::Cos => -v.sin(),
        Func::Exp => v.exp(),
        Func::Log => 1.0 / v,
        Func::Sqrt => 0.5 / v.sqrt(),
        Func::Abs => apply(Func::Sgn, v),
        Func::Sgn => 0.0,
    }
}

impl Node {
    fn visit(&self, f: &mut impl FnMut(&Node)) {
        f(self);
        match self {
            Node::Num(_) | Node::Var(_) => {}
            Node::Neg(a) | Node::Call(_, a) => a.visit(f),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::Var(i) => x.get(*i).copied().unwrap_or(0.0),
            Node::Neg(a) => -a.eval(x),
            Node::Add(a, b) => a.eval(x) + b.eval(x),
            Node::Sub(a, b) => a.eval(x) - b.eval(x),
            Node::Mul(a, b) => a.eval(x) * b.eval(x),
            Node::Div(a, b) => a.eval(x) / b.eval(x),
            Node::Pow(a, b) => pow(a.eval(x), b, x),
            Node::Call(f, a) => apply(*f, a.eval(x)),
        }
    }

    fn dual<const N: usize>(&self, x: &[f64]) -> Dual<N> {
        match self {
            Node::Num(v) => Dual::constant(*v),
            Node::Var(i) => {
                let mut d = Dual::constant(x.get(*i).copied().unwrap_or(0.0));
                if *i < N {
                    d.d[*i] = 1.0;
                }
                d
            }
            Node::Neg(a) => {
                let a = a.dual(x);
                a.chain(-a.v, -1.0)
            }
            Node::Add(a, b) => {
                let (a, b) = (a.dual(x), b.dual(x));
                Dual::zip(a, b, a.v + b.v, 1.0, 1.0)
            }
            Node::Sub(a, b) => {
                let (a, b) = (a.dual(x), b.dual(x));
                Dual::zip(a, b, a.v - b.v, 1.0, -1.0)
            }
            Node::Mul(a, b) => {
                let (a, b) = (a.dual(x), b.dual(x));
                Dual::zip(a, b, a.v * b.v, b.v, a.v)
            }
            Node::Div(a, b) => {
                let (a, b) = (a.dual(x), b.dual(x));
                Dual::zip(a, b, a.v / b.v, 1.0 / b.v, -a.v / (b.v * b.v))
            }
            Node::Pow(a, b) => {
                let ad = a.dual::<N>(x);
                if let Node::Num(n) = **b {
                    let v = ad.v.powf(n);
                    let dv = if n == 0.0 { 0.0 } else { n * ad.v.powf(n - 1.0) };
                    return ad.chain(v, dv);
                }
                let bd = b.dual::<N>(x);
                let v = ad.v.powf(bd.v);
                let da = if bd.v == 0.0 { 0.0 } else { bd.v * ad.v.powf(bd.v - 1.0) };
                let db = if v == 0.0 { 0.0 } else { v * ad.v.ln() };
                Dual::zip(ad, bd, v, da, db)
            }
            Node::Call(f, a) => {
                let a = a.dual(x);
                a.chain(apply(*f, a.v), derivative(*f, a.v))
            }
        }
    }
}

/// Integer exponents use repeated multiplication so that `(-2)^3` is `-8`.
fn pow(base: f64, exp: &Node, x: &[f64]) -> f64 {
    if let Node::Num(n) = exp {
        if n.fract() == 0.0 && n.abs() <= 64.0 {
            return base.powi(*n as i32);
        }
        return base.powf(*n);
    }
    base.powf(exp.eval(x))
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, msg: impl Into<String>) -> ParseError {
        ParseError {
            offset: self.pos,
            message: msg.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let t = self.rest();
        self.pos += t.len() - t.trim_start().len();
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.rest().starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Node::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let t = self.rest();
        let Some(c) = t.chars().next() else {
            return Err(self.error("unexpected end of input"));
        };
        if c == '(' {
            self.pos += 1;
            let e = self.expr()?;
            if !self.eat(')') {
                return Err(self.error("expected ')'"));
            }
            return Ok(e);
        }
        if c.is_ascii_digit() || c == '.' {
            let len = number_len(t);
            let lit = &t[..len];
            self.pos += len;
            return lit.parse::<f64>().map(Node::Num).map_err(|_| ParseError {
                offset: start,
                message: format!("malformed number '{lit}'"),
            });
        }
        if c.is_ascii_alphabetic() {
            let len = t.find(|ch: char| !ch.is_ascii_alphanumeric()).unwrap_or(t.len());
            let name = &t[..len];
            self.pos += len;
            if let Some(f) = Func::from_name(name) {
                if !self.eat('(') {
                    return Err(self.error(format!("expected '(' after {name}")));
                }
                let arg = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected ')'"));
                }
                return Ok(Node::Call(f, Box::new(arg)));
            }
            return match name {
                "pi" => Ok(Node::Num(std::f64::consts::PI)),
                "e" => Ok(Node::Num(std::f64::consts::E)),
                _ => match name.strip_prefix('x').and_then(|k| k.parse::<usize>().ok()) {
                    Some(k) if (1..=MAX_VARS).contains(&k) && !name[1..].starts_with('0') => Ok(Node::Var(k - 1)),
                    _ => Err(ParseError {
                        offset: start,
                        message: format!("unknown identifier '{name}'"),
                    }),
                },
            };
        }
        Err(self.error(format!("unexpected character '{c}'")))
    }
}

/// Length of the longest prefix that looks like a decimal literal with an
/// optional exponent.
fn number_len(t: &str) -> usize {
    let b = t.as_bytes();
    let mut i = 0;
    while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
        i += 1;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        if j < b.len() && b[j].is_ascii_digit() {
            while j < b.len() && b[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    i
}
