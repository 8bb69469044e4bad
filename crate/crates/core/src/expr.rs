//! Small arithmetic expressions over the variables `t`, `x`, `y`, `u`.
//!
//! Supports `+ - * / ^`, unary minus, parentheses, the constants `pi` and `e`,
//! and the functions `sin cos exp log sqrt abs sign`. Expressions can be
//! differentiated symbolically, which is how user-defined flux coefficients get
//! their state derivative and spatial gradient.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("unexpected character '{found}' at column {column}")]
    UnexpectedChar { found: char, column: usize },
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("unexpected token '{found}' at column {column}")]
    UnexpectedToken { found: String, column: usize },
    #[error("unknown identifier '{name}' at column {column}")]
    UnknownIdentifier { name: String, column: usize },
    #[error("malformed number '{text}' at column {column}")]
    BadNumber { text: String, column: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    T,
    X,
    Y,
    U,
}

impl Var {
    fn slot(self) -> usize {
        match self {
            Var::T => 0,
            Var::X => 1,
            Var::Y => 2,
            Var::U => 3,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::X => "x",
            Var::Y => "y",
            Var::U => "u",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Sign,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sign" | "sgn" => Func::Sign,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
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

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Variable values in the order `t, x, y, u`.
pub type Env = [f64; 4];

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let tokens = lex(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        match p.tokens.get(p.pos) {
            None => Ok(e),
            Some((tok, col)) => Err(ExprError::UnexpectedToken { found: tok.to_string(), column: *col }),
        }
    }

    pub fn eval(&self, env: &Env) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(v) => env[v.slot()],
            Expr::Neg(a) => -a.eval(env),
            Expr::Add(a, b) => a.eval(env) + b.eval(env),
            Expr::Sub(a, b) => a.eval(env) - b.eval(env),
            Expr::Mul(a, b) => a.eval(env) * b.eval(env),
            Expr::Div(a, b) => a.eval(env) / b.eval(env),
            Expr::Pow(a, b) => {
                let base = a.eval(env);
                match **b {
                    Expr::Num(n) if n.fract() == 0.0 && n.abs() < 64.0 => base.powi(n as i32),
                    _ => base.powf(b.eval(env)),
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(env)),
        }
    }

    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(var),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => a.depends_on(var) || b.depends_on(var),
        }
    }

    /// Symbolic partial derivative. `abs` and `sign` are differentiated away
    /// from their kinks (`d|f| = sign(f) f'`, `d sign(f) = 0`).
    pub fn derivative(&self, var: Var) -> Expr {
        use Expr::*;
        match self {
            Num(_) => Num(0.0),
            Var(v) => Num(if *v == var { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.derivative(var)),
            Add(a, b) => add(a.derivative(var), b.derivative(var)),
            Sub(a, b) => sub(a.derivative(var), b.derivative(var)),
            Mul(a, b) => add(mul(a.derivative(var), (**b).clone()), mul((**a).clone(), b.derivative(var))),
            Div(a, b) => div(sub(mul(a.derivative(var), (**b).clone()), mul((**a).clone(), b.derivative(var))), pow((**b).clone(), Num(2.0))),
            Pow(a, b) => {
                if !b.depends_on(var) {
                    // a^b with constant exponent
                    mul(mul((**b).clone(), pow((**a).clone(), sub((**b).clone(), Num(1.0)))), a.derivative(var))
                } else {
                    // a^b = exp(b log a)
                    let inner = add(mul(b.derivative(var), Call(Func::Log, a.clone())), mul((**b).clone(), div(a.derivative(var), (**a).clone())));
                    mul(self.clone(), inner)
                }
            }
            Call(f, a) => {
                let da = a.derivative(var);
                let a = (**a).clone();
                let outer = match f {
                    Func::Sin => Call(Func::Cos, Box::new(a)),
                    Func::Cos => neg(Call(Func::Sin, Box::new(a))),
                    Func::Exp => Call(Func::Exp, Box::new(a)),
                    Func::Log => div(Num(1.0), a),
                    Func::Sqrt => div(Num(0.5), Call(Func::Sqrt, Box::new(a))),
                    Func::Abs => Call(Func::Sign, Box::new(a)),
                    Func::Sign => Num(0.0),
                };
                mul(outer, da)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
        _ if a.is_zero() => b,
        _ if b.is_zero() => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
        _ if b.is_zero() => a,
        _ if a.is_zero() => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
        _ if a.is_zero() || b.is_zero() => Expr::Num(0.0),
        (Expr::Num(x), _) if *x == 1.0 => b,
        (_, Expr::Num(y)) if *y == 1.0 => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        _ if a.is_zero() => Expr::Num(0.0),
        (_, Expr::Num(y)) if *y == 1.0 => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (_, Expr::Num(y)) if *y == 1.0 => a,
        (_, Expr::Num(y)) if *y == 0.0 => Expr::Num(1.0),
        _ => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(v) => f.write_str(v.name()),
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

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(v) => write!(f, "{v}"),
            Token::Ident(s) => f.write_str(s),
            Token::Op(c) => write!(f, "{c}"),
            Token::LParen => f.write_str("("),
            Token::RParen => f.write_str(")"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Token, usize)>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
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
            let v = text.parse::<f64>().map_err(|_| ExprError::BadNumber { text: text.clone(), column })?;
            out.push((Token::Num(v), column));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Token::Ident(chars[start..i].iter().collect()), column));
        } else if "+-*/^".contains(c) {
            if c == '*' && chars.get(i + 1) == Some(&'*') {
                out.push((Token::Op('^'), column));
                i += 2;
            } else {
                out.push((Token::Op(c), column));
                i += 1;
            }
        } else if c == '(' {
            out.push((Token::LParen, column));
            i += 1;
        } else if c == ')' {
            out.push((Token::RParen, column));
            i += 1;
        } else {
            return Err(ExprError::UnexpectedChar { found: c, column });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn next(&mut self) -> Result<(Token, usize), ExprError> {
        let t = self.tokens.get(self.pos).cloned().ok_or(ExprError::UnexpectedEnd)?;
        self.pos += 1;
        Ok(t)
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == '+' { Expr::Add(Box::new(lhs), Box::new(rhs)) } else { Expr::Sub(Box::new(lhs), Box::new(rhs)) };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == '*' { Expr::Mul(Box::new(lhs), Box::new(rhs)) } else { Expr::Div(Box::new(lhs), Box::new(rhs)) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Token::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    // right associative; binds tighter than unary minus on its left: -x^2 = -(x^2)
    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let (tok, column) = self.next()?;
        match tok {
            Token::Num(v) => Ok(Expr::Num(v)),
            Token::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Token::Ident(name) => {
                if let Some(f) = Func::from_name(&name) {
                    match self.next()? {
                        (Token::LParen, _) => {}
                        (other, col) => return Err(ExprError::UnexpectedToken { found: other.to_string(), column: col }),
                    }
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                match name.as_str() {
                    "t" => Ok(Expr::Var(Var::T)),
                    "x" => Ok(Expr::Var(Var::X)),
                    "y" => Ok(Expr::Var(Var::Y)),
                    "u" => Ok(Expr::Var(Var::U)),
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    "e" => Ok(Expr::Num(std::f64::consts::E)),
                    _ => Err(ExprError::UnknownIdentifier { name, column }),
                }
            }
            other => Err(ExprError::UnexpectedToken { found: other.to_string(), column }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        match self.next()? {
            (Token::RParen, _) => Ok(()),
            (other, column) => Err(ExprError::UnexpectedToken { found: other.to_string(), column }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, env: Env) -> f64 {
        Expr::parse(s).unwrap().eval(&env)
    }

    #[test]
    fn precedence_and_associativity() {
        let z = [0.0; 4];
        assert_eq!(ev("1 + 2 * 3", z), 7.0);
        assert_eq!(ev("(1 + 2) * 3", z), 9.0);
        assert_eq!(ev("2 ^ 3 ^ 2", z), 512.0);
        assert_eq!(ev("-2 ^ 2", z), -4.0);
        assert_eq!(ev("8 / 4 / 2", z), 1.0);
        assert_eq!(ev("2 ** 3", z), 8.0);
        assert_eq!(ev("1.5e2 + 2E-1", z), 150.2);
    }

    #[test]
    fn variables_and_functions() {
        let env = [0.5, 2.0, -1.0, 3.0];
        assert_eq!(ev("t + x + y + u", env), 4.5);
        assert!((ev("sin(pi * t)", env) - 1.0).abs() < 1e-15);
        assert_eq!(ev("abs(y) * sign(y)", env), -1.0);
        assert_eq!(ev("sign(0)", env), 0.0);
        assert!((ev("exp(log(x))", env) - 2.0).abs() < 1e-15);
        assert_eq!(ev("sqrt(u*u)", env), 3.0);
    }

    #[test]
    fn parse_errors_carry_columns() {
        assert!(matches!(Expr::parse("1 + $"), Err(ExprError::UnexpectedChar { found: '$', column: 5 })));
        assert!(matches!(Expr::parse("1 +"), Err(ExprError::UnexpectedEnd)));
        assert!(matches!(Expr::parse("foo(1)"), Err(ExprError::UnknownIdentifier { .. })));
        assert!(matches!(Expr::parse("(1 + 2"), Err(ExprError::UnexpectedEnd)));
        assert!(matches!(Expr::parse("1 2"), Err(ExprError::UnexpectedToken { .. })));
    }

    #[test]
    fn symbolic_derivatives_match_finite_differences() {
        let cases =
            ["u^2/2", "(2 + sin(x - t)) * u", "exp(-u*u) * cos(3*x)", "u^3 - x*u + t", "sqrt(1 + u^2) / (2 + x)", "x ^ u", "abs(u - 0.3) * x"];
        let env = [0.4, 1.3, 0.0, 0.7];
        for src in cases {
            let e = Expr::parse(src).unwrap();
            for (var, slot) in [(Var::T, 0), (Var::X, 1), (Var::U, 3)] {
                let d = e.derivative(var);
                let h = 1e-6;
                let mut plus = env;
                let mut minus = env;
                plus[slot] += h;
                minus[slot] -= h;
                let fd = (e.eval(&plus) - e.eval(&minus)) / (2.0 * h);
                let exact = d.eval(&env);
                assert!((fd - exact).abs() < 1e-7 * (1.0 + exact.abs()), "{src} d/{var:?}: {fd} vs {exact}");
            }
        }
    }

    #[test]
    fn derivative_simplifies_constants() {
        let e = Expr::parse("3*x + 2").unwrap();
        assert!(e.derivative(Var::U).is_zero());
        let du = Expr::parse("(2 + sin(x - t)) * u").unwrap().derivative(Var::U);
        assert!(!du.depends_on(Var::U));
        assert!(du.derivative(Var::U).is_zero());
    }
}
