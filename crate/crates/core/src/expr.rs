//! Closed-form expressions in `x` and `y`.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, `|e|` for absolute value,
//! functions `sin cos exp tanh abs sqrt log`, constants `pi` and `e`, and
//! decimal literals with optional exponent. `^` binds tighter than unary
//! minus and is right associative, so `-x^2 = -(x^2)`. The middle dot `·` is
//! accepted as multiplication.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Tanh,
    Abs,
    Sqrt,
    Log,
    Sign,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "tanh" => Func::Tanh,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "log" | "ln" => Func::Log,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Tanh => "tanh",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Log => "log",
            Func::Sign => "sign",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Tanh => v.tanh(),
            Func::Abs => v.abs(),
            Func::Sqrt => v.sqrt(),
            Func::Log => v.ln(),
            Func::Sign => {
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
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Y,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at offset {}", self.message, self.position)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self, ParseError> {
        let mut p = Parser {
            chars: src.char_indices().collect(),
            pos: 0,
            len: src.len(),
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::X => x,
            Expr::Y => y,
            Expr::Neg(a) => -a.eval(x, y),
            Expr::Add(a, b) => a.eval(x, y) + b.eval(x, y),
            Expr::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
            Expr::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            Expr::Div(a, b) => a.eval(x, y) / b.eval(x, y),
            Expr::Pow(a, b) => {
                let base = a.eval(x, y);
                match b.as_ref() {
                    Expr::Num(n) if n.fract() == 0.0 && n.abs() < 64.0 => base.powi(*n as i32),
                    _ => base.powf(b.eval(x, y)),
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(x, y)),
        }
    }

    fn is_const(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            _ => None,
        }
    }

    /// Symbolic partial derivative.
    pub fn derivative(&self, var: Var) -> Expr {
        use Expr::*;
        match self {
            Num(_) => Num(0.0),
            X => Num(if var == Var::X { 1.0 } else { 0.0 }),
            Y => Num(if var == Var::Y { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.derivative(var)),
            Add(a, b) => add(a.derivative(var), b.derivative(var)),
            Sub(a, b) => sub(a.derivative(var), b.derivative(var)),
            Mul(a, b) => add(
                mul(a.derivative(var), (**b).clone()),
                mul((**a).clone(), b.derivative(var)),
            ),
            Div(a, b) => div(
                sub(
                    mul(a.derivative(var), (**b).clone()),
                    mul((**a).clone(), b.derivative(var)),
                ),
                pow((**b).clone(), Num(2.0)),
            ),
            Pow(a, b) => {
                if let Some(n) = b.is_const() {
                    mul(
                        mul(Num(n), pow((**a).clone(), Num(n - 1.0))),
                        a.derivative(var),
                    )
                } else {
                    // d(a^b) = a^b (b' ln a + b a'/a)
                    mul(
                        self.clone(),
                        add(
                            mul(b.derivative(var), Call(Func::Log, a.clone())),
                            div(mul((**b).clone(), a.derivative(var)), (**a).clone()),
                        ),
                    )
                }
            }
            Call(f, a) => {
                let inner = a.derivative(var);
                let outer = match f {
                    Func::Sin => Call(Func::Cos, a.clone()),
                    Func::Cos => neg(Call(Func::Sin, a.clone())),
                    Func::Exp => self.clone(),
                    Func::Tanh => sub(Num(1.0), pow(self.clone(), Num(2.0))),
                    Func::Abs => Call(Func::Sign, a.clone()),
                    Func::Sqrt => div(Num(0.5), self.clone()),
                    Func::Log => div(Num(1.0), (**a).clone()),
                    Func::Sign => Num(0.0),
                };
                mul(outer, inner)
            }
        }
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        a => Expr::Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a.is_const(), b.is_const()) {
        (Some(p), Some(q)) => Expr::Num(p + q),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a.is_const(), b.is_const()) {
        (Some(p), Some(q)) => Expr::Num(p - q),
        (_, Some(0.0)) => a,
        (Some(0.0), _) => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a.is_const(), b.is_const()) {
        (Some(p), Some(q)) => Expr::Num(p * q),
        (Some(0.0), _) | (_, Some(0.0)) => Expr::Num(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a.is_const(), b.is_const()) {
        (Some(0.0), _) => Expr::Num(0.0),
        (_, Some(1.0)) => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match b.is_const() {
        Some(0.0) => Expr::Num(1.0),
        Some(1.0) => a,
        _ => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

impl FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::X => write!(f, "x"),
            Expr::Y => write!(f, "y"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

struct Parser {
    chars: Vec<(usize, char)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn offset(&self) -> usize {
        self.chars.get(self.pos).map_or(self.len, |c| c.0)
    }

    fn error(&self, msg: &str) -> ParseError {
        ParseError {
            position: self.offset(),
            message: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self
            .chars
            .get(self.pos)
            .is_some_and(|c| c.1.is_whitespace())
        {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        self.pos += 1;
        c
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-' | '−')) = self.peek() {
            self.bump();
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/' | '·')) = self.peek() {
            self.bump();
            let rhs = self.unary()?;
            lhs = if op == '/' {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some('-' | '−') => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.error("unexpected end of expression")),
            Some('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some('|') => {
                self.bump();
                let e = self.expr()?;
                self.expect('|')?;
                Ok(Expr::Call(Func::Abs, Box::new(e)))
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_alphabetic() => self.ident(),
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    fn expect(&mut self, want: char) -> Result<(), ParseError> {
        if self.peek() == Some(want) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&format!("expected `{want}`")))
        }
    }

    fn raw(&self, k: usize) -> Option<char> {
        self.chars.get(k).map(|c| c.1)
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let mut end = self.pos;
        while self
            .raw(end)
            .is_some_and(|c| c.is_ascii_digit() || c == '.')
        {
            end += 1;
        }
        // An exponent only if `e` is followed by a digit or a signed digit.
        if matches!(self.raw(end), Some('e' | 'E')) {
            let mut k = end + 1;
            if matches!(self.raw(k), Some('+' | '-')) {
                k += 1;
            }
            if self.raw(k).is_some_and(|c| c.is_ascii_digit()) {
                end = k;
                while self.raw(end).is_some_and(|c| c.is_ascii_digit()) {
                    end += 1;
                }
            }
        }
        let text: String = self.chars[start..end].iter().map(|c| c.1).collect();
        self.pos = end;
        text.parse::<f64>().map(Expr::Num).map_err(|_| ParseError {
            position: self.chars[start].0,
            message: format!("invalid number `{text}`"),
        })
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let mut end = self.pos;
        while self
            .raw(end)
            .is_some_and(|c| c.is_alphanumeric() || c == '_')
        {
            end += 1;
        }
        let name: String = self.chars[start..end].iter().map(|c| c.1).collect();
        self.pos = end;
        match name.as_str() {
            "x" => Ok(Expr::X),
            "y" => Ok(Expr::Y),
            "pi" => Ok(Expr::Num(std::f64::consts::PI)),
            "e" => Ok(Expr::Num(std::f64::consts::E)),
            _ => {
                let func = Func::from_name(&name).ok_or_else(|| ParseError {
                    position: self.chars[start].0,
                    message: format!("unknown identifier `{name}`"),
                })?;
                self.expect('(')?;
                let arg = self.expr()?;
                self.expect(')')?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(s: &str, x: f64, y: f64) -> f64 {
        Expr::parse(s).unwrap().eval(x, y)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(ev("-x^2", 3.0, 0.0), -9.0);
        assert_eq!(ev("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(ev("8 / 4 / 2", 0.0, 0.0), 1.0);
        assert_eq!(ev("2·x", 4.0, 0.0), 8.0);
        assert_eq!(ev("1e-3 * 2E2", 0.0, 0.0), 0.2);
    }

    #[test]
    fn constants_functions_and_bars() {
        assert!((ev("e", 0.0, 0.0) - std::f64::consts::E).abs() < 1e-15);
        assert!((ev("2*e*x", 1.0, 0.0) - 2.0 * std::f64::consts::E).abs() < 1e-15);
        assert_eq!(ev("|x - y|", 1.0, 3.0), 2.0);
        assert_eq!(ev("||x| - 2|", -1.0, 0.0), 1.0);
        assert_eq!(ev("abs(y) * |x|", -2.0, -3.0), 6.0);
        assert!((ev("sin(pi/2) + cos(0) + exp(0) + tanh(0)", 0.0, 0.0) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn reports_errors_with_position() {
        let e = Expr::parse("1 + foo(x)").unwrap_err();
        assert_eq!(e.position, 4);
        assert!(Expr::parse("(x + 1").is_err());
        assert!(Expr::parse("x +").is_err());
        assert!(Expr::parse("x y").is_err());
        assert!(Expr::parse("3 $ 4").is_err());
    }

    #[test]
    fn derivative_matches_hand_computation() {
        let e = Expr::parse("x^2 * sin(y) + exp(2*x) / (1 + y^2)").unwrap();
        let (x, y) = (0.3, -0.8);
        let dx = e.derivative(Var::X).eval(x, y);
        let dy = e.derivative(Var::Y).eval(x, y);
        let want_dx = 2.0 * x * y.sin() + 2.0 * (2.0 * x).exp() / (1.0 + y * y);
        let want_dy = x * x * y.cos() - (2.0 * x).exp() * 2.0 * y / (1.0 + y * y).powi(2);
        assert!((dx - want_dx).abs() < 1e-13);
        assert!((dy - want_dy).abs() < 1e-13);
    }

    proptest! {
        // Symbolic derivatives agree with central differences.
        #[test]
        fn derivative_matches_finite_difference(x in 0.1f64..0.9, y in 0.1f64..0.9) {
            let sources = [
                "tanh(3*(x - 0.5)) * cos(y)",
                "sqrt(1 + x*y) - log(2 + y)",
                "x^y + |x - 0.45|",
                "1 - 0.5*exp(-((x-0.5)^2 + (y-0.5)^2)/0.04)",
            ];
            for src in sources {
                let e = Expr::parse(src).unwrap();
                let h = 1e-6;
                let fd = (e.eval(x + h, y) - e.eval(x - h, y)) / (2.0 * h);
                let sym = e.derivative(Var::X).eval(x, y);
                if (x - 0.45).abs() > 1e-3 {
                    prop_assert!((fd - sym).abs() < 1e-6 * (1.0 + sym.abs()), "{src}: {fd} vs {sym}");
                }
                let fd = (e.eval(x, y + h) - e.eval(x, y - h)) / (2.0 * h);
                let sym = e.derivative(Var::Y).eval(x, y);
                prop_assert!((fd - sym).abs() < 1e-6 * (1.0 + sym.abs()), "{src}: {fd} vs {sym}");
            }
        }
    }
}
