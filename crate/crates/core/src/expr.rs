//! Scalar expressions of a boundary point, used for boundary data in configs.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, numbers, the variables
//! `x y r theta pi e`, and one-argument functions
//! `sin cos tan sinh cosh tanh exp log ln sqrt abs j0 j1`.

use std::fmt;
use std::sync::Arc;

use crate::cdiff::C64;
use crate::error::{Error, Result};
use crate::representations::bessel_j;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Var {
    X,
    Y,
    R,
    Theta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Abs,
    J0,
    J1,
}

/// A parsed expression in `x`, `y` (and derived `r`, `theta`).
#[derive(Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = lex(src)?;
        let mut p = Parser { tokens, pos: 0, src };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Expr {
            source: src.trim().to_string(),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, z: C64) -> f64 {
        eval(&self.root, z)
    }

    /// Constant value when the expression does not depend on the point.
    pub fn as_constant(&self) -> Option<f64> {
        fn pure(n: &Node) -> bool {
            match n {
                Node::Num(_) => true,
                Node::Var(_) => false,
                Node::Neg(a) | Node::Call(_, a) => pure(a),
                Node::Bin(_, a, b) => pure(a) && pure(b),
            }
        }
        pure(&self.root).then(|| eval(&self.root, C64::new(0.0, 0.0)))
    }
}

fn eval(n: &Node, z: C64) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Var(Var::X) => z.re,
        Node::Var(Var::Y) => z.im,
        Node::Var(Var::R) => z.norm(),
        Node::Var(Var::Theta) => z.arg(),
        Node::Neg(a) => -eval(a, z),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, z), eval(b, z));
            match op {
                Op::Add => a + b,
                Op::Sub => a - b,
                Op::Mul => a * b,
                Op::Div => a / b,
                Op::Pow => {
                    if b.fract() == 0.0 && b.abs() < 64.0 {
                        a.powi(b as i32)
                    } else {
                        a.powf(b)
                    }
                }
            }
        }
        Node::Call(f, a) => {
            let a = eval(a, z);
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Tan => a.tan(),
                Func::Sinh => a.sinh(),
                Func::Cosh => a.cosh(),
                Func::Tanh => a.tanh(),
                Func::Exp => a.exp(),
                Func::Log => a.ln(),
                Func::Sqrt => a.sqrt(),
                Func::Abs => a.abs(),
                Func::J0 => bessel_j(0, a.abs()).unwrap_or(f64::NAN),
                Func::J1 => bessel_j(1, a.abs()).map(|v| v * a.signum()).unwrap_or(f64::NAN),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse()
                .map_err(|_| Error::Contract(format!("bad number `{text}` in expression `{src}`")))?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), start));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Sym(c), i));
            i += 1;
        } else {
            return Err(Error::Contract(format!("unexpected `{c}` at {i} in expression `{src}`")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn error(&self, what: &str) -> Error {
        let at = self.tokens.get(self.pos).map_or(self.src.len(), |t| t.1);
        Error::Contract(format!("{what} at {at} in expression `{}`", self.src))
    }

    fn peek_sym(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some((Tok::Sym(c), _)) => Some(*c),
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_sym() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == '+' { Op::Add } else { Op::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_sym() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == '*' { Op::Mul } else { Op::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek_sym() {
            Some('-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    // right associative; binds tighter than unary minus on its left
    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek_sym() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let Some((tok, _)) = self.tokens.get(self.pos).cloned() else {
            return Err(self.error("unexpected end"));
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Sym('(') => {
                let inner = self.expr()?;
                if self.peek_sym() != Some(')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "x" => return Ok(Node::Var(Var::X)),
                    "y" => return Ok(Node::Var(Var::Y)),
                    "r" => return Ok(Node::Var(Var::R)),
                    "theta" => return Ok(Node::Var(Var::Theta)),
                    "pi" => return Ok(Node::Num(std::f64::consts::PI)),
                    "e" => return Ok(Node::Num(std::f64::consts::E)),
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "tan" => Func::Tan,
                    "sinh" => Func::Sinh,
                    "cosh" => Func::Cosh,
                    "tanh" => Func::Tanh,
                    "exp" => Func::Exp,
                    "log" | "ln" => Func::Log,
                    "sqrt" => Func::Sqrt,
                    "abs" => Func::Abs,
                    "j0" => Func::J0,
                    "j1" => Func::J1,
                    _ => {
                        self.pos -= 1;
                        return Err(self.error(&format!("unknown name `{name}`")));
                    }
                };
                if self.peek_sym() != Some('(') {
                    return Err(self.error(&format!("`{name}` needs a parenthesized argument")));
                }
                self.pos += 1;
                let arg = self.expr()?;
                if self.peek_sym() != Some(')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(Node::Call(func, Box::new(arg)))
            }
            Tok::Sym(_) => {
                self.pos -= 1;
                Err(self.error("unexpected symbol"))
            }
        }
    }
}

/// Boundary data function: parsed expression or native closure.
#[derive(Clone)]
pub enum ScalarFn {
    Expr(Expr),
    Native {
        label: String,
        f: Arc<dyn Fn(C64) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarFn({})", self.label())
    }
}

impl ScalarFn {
    pub fn constant(v: f64) -> ScalarFn {
        ScalarFn::Expr(Expr {
            source: format!("{v}"),
            root: Node::Num(v),
        })
    }

    pub fn native(label: &str, f: impl Fn(C64) -> f64 + Send + Sync + 'static) -> ScalarFn {
        ScalarFn::Native {
            label: label.to_string(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, z: C64) -> f64 {
        match self {
            ScalarFn::Expr(e) => e.eval(z),
            ScalarFn::Native { f, .. } => f(z),
        }
    }

    pub fn label(&self) -> &str {
        match self {
            ScalarFn::Expr(e) => e.source(),
            ScalarFn::Native { label, .. } => label,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: f64, y: f64) -> f64 {
        Expr::parse(s).unwrap().eval(C64::new(x, y))
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(ev("2 ^ 3 ^ 2", 0.0, 0.0), 512.0);
        assert_eq!(ev("-2 ^ 2", 0.0, 0.0), -4.0);
        assert_eq!(ev("(1 - 2) - 3", 0.0, 0.0), -4.0);
        assert_eq!(ev("8 / 4 / 2", 0.0, 0.0), 1.0);
        assert_eq!(ev("2e-1 * 10", 0.0, 0.0), 2.0);
    }

    #[test]
    fn variables_and_functions() {
        assert!((ev("x^3 - 3*x*y^2", 0.5, 0.25) - (0.125 - 3.0 * 0.5 * 0.0625)).abs() < 1e-15);
        assert_eq!(ev("r", 3.0, 4.0), 5.0);
        assert!((ev("theta", 0.0, 1.0) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((ev("sin(pi/2) + exp(0) + log(e)", 0.0, 0.0) - 3.0).abs() < 1e-15);
        assert!(ev("j0(2.404825557695773)", 0.0, 0.0).abs() < 1e-14);
    }

    #[test]
    fn errors_are_reported() {
        for bad in ["", "1 +", "foo(1)", "sin 1", "(1", "1 $ 2", "z"] {
            assert!(Expr::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn constants_detected() {
        assert_eq!(Expr::parse("2 * pi").unwrap().as_constant(), Some(2.0 * std::f64::consts::PI));
        assert_eq!(Expr::parse("x + 1").unwrap().as_constant(), None);
    }
}
