//! Closed-form expressions in `x`, `y` and `t` for user-defined problems.
//!
//! Grammar: numbers, the variables `x y t`, the constants `pi e`, the binary
//! operators `+ - * / ^` (with `^` right associative), unary minus,
//! parentheses and one-argument functions
//! `sin cos tan asin acos atan sinh cosh tanh exp ln log10 sqrt abs`.

use std::fmt;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{message} at column {column} of `{source_text}`")]
pub struct ExprError {
    pub column: usize,
    pub message: String,
    pub source_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Asin,
    Acos,
    Atan,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Ln,
    Log10,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "asin" => Func::Asin,
            "acos" => Func::Acos,
            "atan" => Func::Atan,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "log10" => Func::Log10,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Asin => v.asin(),
            Func::Acos => v.acos(),
            Func::Atan => v.atan(),
            Func::Sinh => v.sinh(),
            Func::Cosh => v.cosh(),
            Func::Tanh => v.tanh(),
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
            Func::Log10 => v.log10(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Call(Func, Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
}

impl Node {
    fn eval(&self, vars: &[f64; 3]) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::Var(i) => vars[*i],
            Node::Neg(a) => -a.eval(vars),
            Node::Call(f, a) => f.apply(a.eval(vars)),
            Node::Bin(op, a, b) => {
                let (a, b) = (a.eval(vars), b.eval(vars));
                match op {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    '/' => a / b,
                    _ => a.powf(b),
                }
            }
        }
    }

    fn uses(&self, var: usize) -> bool {
        match self {
            Node::Num(_) => false,
            Node::Var(i) => *i == var,
            Node::Neg(a) | Node::Call(_, a) => a.uses(var),
            Node::Bin(_, a, b) => a.uses(var) || b.uses(var),
        }
    }
}

/// A parsed expression `g(x, y, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    text: String,
    root: Node,
}

impl Expr {
    pub fn parse(text: &str) -> Result<Self, ExprError> {
        let mut p = Parser {
            text,
            chars: text.char_indices().collect(),
            pos: 0,
        };
        let root = p.sum()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.error("unexpected input"));
        }
        Ok(Expr { text: text.to_string(), root })
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        self.root.eval(&[x, y, t])
    }

    pub fn depends_on_t(&self) -> bool {
        self.root.uses(2)
    }

    pub fn depends_on_space(&self) -> bool {
        self.root.uses(0) || self.root.uses(1)
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

struct Parser<'a> {
    text: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ExprError {
        ExprError {
            column: self.pos + 1,
            message: message.to_string(),
            source_text: self.text.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].1.is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn sum(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.product()?;
        while let Some(op @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.product()?));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek() {
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
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

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let Some(c) = self.peek() else {
            return Err(self.error("unexpected end of expression"));
        };
        if c == '(' {
            self.pos += 1;
            let inner = self.sum()?;
            if self.peek() != Some(')') {
                return Err(self.error("expected `)`"));
            }
            self.pos += 1;
            return Ok(inner);
        }
        if c.is_ascii_digit() || c == '.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() {
            let start = self.pos;
            while self.pos < self.chars.len() && (self.chars[self.pos].1.is_ascii_alphanumeric() || self.chars[self.pos].1 == '_') {
                self.pos += 1;
            }
            let name: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
            return match name.as_str() {
                "x" => Ok(Node::Var(0)),
                "y" => Ok(Node::Var(1)),
                "t" => Ok(Node::Var(2)),
                "pi" => Ok(Node::Num(std::f64::consts::PI)),
                "e" => Ok(Node::Num(std::f64::consts::E)),
                _ => {
                    let Some(f) = Func::from_name(&name) else {
                        self.pos = start;
                        return Err(self.error(&format!("unknown name `{name}`")));
                    };
                    if self.peek() != Some('(') {
                        return Err(self.error(&format!("expected `(` after `{name}`")));
                    }
                    Ok(Node::Call(f, Box::new(self.atom()?)))
                }
            };
        }
        Err(self.error(&format!("unexpected `{c}`")))
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let n = self.chars.len();
        let digits = |p: &mut Self| {
            while p.pos < n && p.chars[p.pos].1.is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.pos < n && self.chars[self.pos].1 == '.' {
            self.pos += 1;
            digits(self);
        }
        if self.pos < n && matches!(self.chars[self.pos].1, 'e' | 'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < n && matches!(self.chars[self.pos].1, '+' | '-') {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(self);
            if self.pos == exp_start {
                self.pos = save;
            }
        }
        let lo = self.chars[start].0;
        let hi = self.chars.get(self.pos).map_or(self.text.len(), |c| c.0);
        self.text[lo..hi].parse().map(Node::Num).map_err(|_| {
            self.pos = start;
            self.error("malformed number")
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(s: &str) -> f64 {
        Expr::parse(s).unwrap().eval(0.5, 2.0, 3.0)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2 * 3"), 7.0);
        assert_eq!(eval("2 ^ 3 ^ 2"), 512.0);
        assert_eq!(eval("-2 ^ 2"), -4.0);
        assert_eq!(eval("(1 + 2) * 3 - 4 / 8"), 8.5);
        assert_eq!(eval("8 / 4 / 2"), 1.0);
        assert_eq!(eval("1.5e1 + .5"), 15.5);
    }

    #[test]
    fn variables_constants_and_functions() {
        assert_eq!(eval("x * y + t"), 4.0);
        assert!((eval("sin(pi * x)") - 1.0).abs() < 1e-15);
        assert!((eval("ln(e ^ 2)") - 2.0).abs() < 1e-15);
        assert_eq!(eval("sqrt(abs(-16))"), 4.0);
        assert!(!Expr::parse("sin(pi*x)*y").unwrap().depends_on_t());
        assert!(Expr::parse("cos(20*t)").unwrap().depends_on_t());
    }

    #[test]
    fn errors_point_at_the_problem() {
        for (s, col) in [("1 +", 4), ("foo(x)", 1), ("(x", 3), ("x y", 3), ("sin x", 5)] {
            let e = Expr::parse(s).unwrap_err();
            assert_eq!(e.column, col, "{s}: {e}");
        }
    }
}
