//! Closed-form boundary data: a recursive-descent parser over a fixed
//! whitelist of names. Nothing outside the whitelist can be evaluated.
//!
//! Grammar:
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | primary
//! primary := number | constant | variable | function '(' expr ')' | '(' expr ')'
//! ```
//! Functions: `sin cos ln exp abs`. Constants: `pi e`. Variables: `x y z`
//! (embedding coordinates) and `dist` (geodesic distance from the center).

use anyhow::{bail, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Ln,
    Exp,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Var {
    X,
    Y,
    Z,
    Dist,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub source: String,
    root: Node,
}

/// Values of the whitelisted variables at one point.
#[derive(Debug, Clone, Copy, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub dist: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(s: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = s.chars().collect();
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
            // Exponent only when a digit (after an optional sign) follows.
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
            let v: f64 = text.parse().map_err(|_| anyhow::anyhow!("bad number `{text}`"))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            bail!("unexpected character `{c}`");
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat_op(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_op('+') {
                lhs = Node::Bin('+', Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_op('-') {
                lhs = Node::Bin('-', Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_op('*') {
                lhs = Node::Bin('*', Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_op('/') {
                lhs = Node::Bin('/', Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat_op('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat_op('+') {
            return self.unary();
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Node> {
        let tok = self.peek().cloned();
        self.pos += 1;
        match tok {
            Some(Tok::Num(v)) => Ok(Node::Num(v)),
            Some(Tok::Op('(')) => {
                let inner = self.expr()?;
                if !self.eat_op(')') {
                    bail!("missing `)`");
                }
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                let func = match name.as_str() {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "ln" => Some(Func::Ln),
                    "exp" => Some(Func::Exp),
                    "abs" => Some(Func::Abs),
                    _ => None,
                };
                if let Some(f) = func {
                    if !self.eat_op('(') {
                        bail!("`{name}` must be followed by `(`");
                    }
                    let arg = self.expr()?;
                    if !self.eat_op(')') {
                        bail!("missing `)` after the argument of `{name}`");
                    }
                    return Ok(Node::Call(f, Box::new(arg)));
                }
                match name.as_str() {
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    "e" => Ok(Node::Num(std::f64::consts::E)),
                    "x" => Ok(Node::Var(Var::X)),
                    "y" => Ok(Node::Var(Var::Y)),
                    "z" => Ok(Node::Var(Var::Z)),
                    "dist" => Ok(Node::Var(Var::Dist)),
                    _ => bail!("`{name}` is not an allowed name"),
                }
            }
            Some(Tok::Op(c)) => bail!("unexpected `{c}`"),
            None => bail!("unexpected end of expression"),
        }
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let toks = tokenize(source).map_err(|e| anyhow::anyhow!("in `{source}`: {e}"))?;
        let mut p = Parser { toks, pos: 0 };
        let root = p.expr().map_err(|e| anyhow::anyhow!("in `{source}`: {e}"))?;
        if p.pos != p.toks.len() {
            bail!("in `{source}`: trailing input");
        }
        Ok(Self {
            source: source.to_string(),
            root,
        })
    }

    pub fn eval(&self, at: &Point) -> f64 {
        eval(&self.root, at)
    }

    /// The value when the expression uses no variables.
    pub fn constant(&self) -> Option<f64> {
        fn uses_var(n: &Node) -> bool {
            match n {
                Node::Num(_) => false,
                Node::Var(_) => true,
                Node::Neg(a) | Node::Call(_, a) => uses_var(a),
                Node::Bin(_, a, b) => uses_var(a) || uses_var(b),
            }
        }
        (!uses_var(&self.root)).then(|| self.eval(&Point::default()))
    }
}

fn eval(n: &Node, at: &Point) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Var(Var::X) => at.x,
        Node::Var(Var::Y) => at.y,
        Node::Var(Var::Z) => at.z,
        Node::Var(Var::Dist) => at.dist,
        Node::Neg(a) => -eval(a, at),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, at), eval(b, at));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                _ => a / b,
            }
        }
        Node::Call(f, a) => {
            let a = eval(a, at);
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Ln => a.ln(),
                Func::Exp => a.exp(),
                Func::Abs => a.abs(),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn at_x(x: f64) -> Point {
        Point {
            x,
            ..Point::default()
        }
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = Expr::parse("-2*3 + 4/2 - -1").unwrap();
        assert_eq!(e.constant(), Some(-3.0));
        let e = Expr::parse("1e-3 * 2E+2").unwrap();
        assert!((e.constant().unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn grim_reaper_data() {
        let e = Expr::parse("-ln(cos(x))").unwrap();
        assert!((e.eval(&at_x(1.0)) + 1f64.cos().ln()).abs() < 1e-15);
        assert_eq!(e.constant(), None);
        let e = Expr::parse("exp(e) + abs(-pi)").unwrap();
        assert!((e.constant().unwrap() - (std::f64::consts::E.exp() + std::f64::consts::PI)).abs() < 1e-12);
    }

    #[test]
    fn names_outside_the_whitelist_are_refused() {
        for bad in ["sqrt(2)", "x^2", "system(1)", "sin x", "(1", "1 2", "", "cos()"] {
            assert!(Expr::parse(bad).is_err(), "{bad}");
        }
    }

    /// Random well-formed expressions with their values at `x`.
    fn arb_expr() -> impl Strategy<Value = (String, f64)> {
        let leaf = prop_oneof![
            (0.0..10.0f64).prop_map(|v| (format!("{v}"), v)),
            Just(("x".to_string(), 0.7)),
            Just(("pi".to_string(), std::f64::consts::PI)),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone(), prop::sample::select(vec!['+', '-', '*']))
                    .prop_map(|((a, x), (b, y), op)| {
                        let v = match op {
                            '+' => x + y,
                            '-' => x - y,
                            _ => x * y,
                        };
                        (format!("({a} {op} {b})"), v)
                    }),
                inner.clone().prop_map(|(a, x)| (format!("-{a}"), -x)),
                inner.clone().prop_map(|(a, x)| (format!("sin({a})"), x.sin())),
                inner.prop_map(|(a, x)| (format!("abs({a})"), x.abs())),
            ]
        })
    }

    proptest! {
        #[test]
        fn generated_expressions_evaluate_like_rust((src, want) in arb_expr()) {
            let got = Expr::parse(&src).unwrap().eval(&at_x(0.7));
            prop_assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()), "{} gave {} not {}", src, got, want);
        }

        #[test]
        fn arbitrary_text_never_panics(src in "\\PC{0,40}") {
            let _ = Expr::parse(&src);
        }

        #[test]
        fn identifiers_outside_the_whitelist_are_refused(name in "[a-z_]{1,8}") {
            let allowed = ["sin", "cos", "ln", "exp", "abs", "pi", "e", "x", "y", "z", "dist"];
            prop_assume!(!allowed.contains(&name.as_str()));
            prop_assert!(Expr::parse(&name).is_err());
            let call = format!("{name}(1)");
            prop_assert!(Expr::parse(&call).is_err());
        }
    }
}
