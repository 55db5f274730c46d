//! Expression trees, their text forms and scalar evaluation.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnaryOp {
    Neg,
    Inv,
    Sqrt,
    Square,
    Sin,
    Cos,
    Tan,
    Arctan,
    Exp,
    Log,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 4] = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div];

    pub fn name(self) -> &'static str {
        match self {
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
            BinaryOp::Div => "div",
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }

    pub fn is_commutative(self) -> bool {
        matches!(self, BinaryOp::Add | BinaryOp::Mul)
    }

    /// Result, or NaN when out of domain.
    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        let v = match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => {
                if b == 0.0 {
                    return f64::NAN;
                }
                a / b
            }
        };
        if v.is_finite() {
            v
        } else {
            f64::NAN
        }
    }
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 10] = [
        UnaryOp::Neg,
        UnaryOp::Inv,
        UnaryOp::Sqrt,
        UnaryOp::Square,
        UnaryOp::Sin,
        UnaryOp::Cos,
        UnaryOp::Tan,
        UnaryOp::Arctan,
        UnaryOp::Exp,
        UnaryOp::Log,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "neg",
            UnaryOp::Inv => "inv",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Square => "square",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tan => "tan",
            UnaryOp::Arctan => "arctan",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
        }
    }

    /// Result, or NaN when out of domain.
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        let v = match self {
            UnaryOp::Neg => -x,
            UnaryOp::Inv => {
                if x == 0.0 {
                    return f64::NAN;
                }
                1.0 / x
            }
            UnaryOp::Sqrt => {
                if x <= 0.0 {
                    return f64::NAN;
                }
                x.sqrt()
            }
            UnaryOp::Square => x * x,
            UnaryOp::Sin => x.sin(),
            UnaryOp::Cos => x.cos(),
            UnaryOp::Tan => x.tan(),
            UnaryOp::Arctan => x.atan(),
            UnaryOp::Exp => x.exp(),
            UnaryOp::Log => {
                if x <= 0.0 {
                    return f64::NAN;
                }
                x.ln()
            }
        };
        if v.is_finite() {
            v
        } else {
            f64::NAN
        }
    }
}

/// An immutable expression tree.
///
/// `Param` is a placeholder constant in a skeleton; fitting replaces each
/// one with a `Const`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var(Arc<str>),
    Const(f64),
    Param,
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(Arc::from(name))
    }

    pub fn constant(value: f64) -> Expr {
        Expr::Const(value)
    }

    pub fn unary(op: UnaryOp, a: Expr) -> Expr {
        Expr::Unary(op, Box::new(a))
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Var(_) | Expr::Const(_) | Expr::Param => 1,
            Expr::Unary(_, a) => 1 + a.node_count(),
            Expr::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Expr::Param => 1,
            Expr::Var(_) | Expr::Const(_) => 0,
            Expr::Unary(_, a) => a.param_count(),
            Expr::Binary(_, a, b) => a.param_count() + b.param_count(),
        }
    }

    /// True if any variable leaf occurs in the tree.
    pub fn has_var(&self) -> bool {
        match self {
            Expr::Var(_) => true,
            Expr::Const(_) | Expr::Param => false,
            Expr::Unary(_, a) => a.has_var(),
            Expr::Binary(_, a, b) => a.has_var() || b.has_var(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Expr::Var(_) | Expr::Const(_) | Expr::Param)
    }

    /// Calls `f` on every node in pre-order.
    pub fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Unary(_, a) => a.visit(f),
            Expr::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    /// Replaces placeholders, in pre-order, with the given values.
    pub fn with_params(&self, values: &[f64]) -> Expr {
        let mut it = values.iter().copied();
        let out = self.substitute(&mut it);
        debug_assert!(it.next().is_none(), "more values than placeholders");
        out
    }

    fn substitute(&self, values: &mut impl Iterator<Item = f64>) -> Expr {
        match self {
            Expr::Param => Expr::Const(values.next().expect("a value for each placeholder")),
            Expr::Var(_) | Expr::Const(_) => self.clone(),
            Expr::Unary(op, a) => Expr::unary(*op, a.substitute(values)),
            Expr::Binary(op, a, b) => {
                let a = a.substitute(values);
                Expr::binary(*op, a, b.substitute(values))
            }
        }
    }

    /// Prefix serialisation with commutative operands in text order.
    pub fn canonical_form(&self) -> String {
        match self {
            Expr::Var(name) => format!("(var {name})"),
            Expr::Const(c) => format!("(const {})", format_sig9(*c)),
            Expr::Param => "(const ?)".to_string(),
            Expr::Unary(op, a) => format!("({} {})", op.name(), a.canonical_form()),
            Expr::Binary(op, a, b) => {
                let (mut x, mut y) = (a.canonical_form(), b.canonical_form());
                if op.is_commutative() && y < x {
                    std::mem::swap(&mut x, &mut y);
                }
                format!("({} {x} {y})", op.name())
            }
        }
    }

    /// Human-readable infix text with explicit parentheses.
    pub fn infix(&self) -> String {
        match self {
            Expr::Var(name) => name.to_string(),
            Expr::Const(c) => format_sig9(*c),
            Expr::Param => "?".to_string(),
            Expr::Unary(op, a) => match op {
                UnaryOp::Neg => format!("(-{})", a.infix()),
                UnaryOp::Inv => format!("(1 / {})", a.infix()),
                UnaryOp::Square => format!("({})^2", a.infix()),
                _ => format!("{}({})", op.name(), a.infix()),
            },
            Expr::Binary(op, a, b) => format!("({} {} {})", a.infix(), op.symbol(), b.infix()),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.infix())
    }
}

/// Formats a real with 9 significant digits, in plain notation for
/// exponents in `[-5, 9)` and scientific notation otherwise. Trailing zeros
/// are dropped.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.8e}", x.abs());
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let sign = if x < 0.0 { "-" } else { "" };
    if !(-5..9).contains(&exp) {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{sign}{m}e{exp}");
    }
    let (int_part, frac_part) = if exp >= 0 {
        let split = (exp + 1) as usize;
        (digits[..split].to_string(), digits[split..].to_string())
    } else {
        ("0".to_string(), "0".repeat((-exp - 1) as usize) + &digits)
    };
    let frac = frac_part.trim_end_matches('0');
    if frac.is_empty() {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac}")
    }
}

/// Outcome of evaluating an expression on one row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Number(f64),
    /// Division by zero, log or sqrt of a non-positive number, or overflow.
    OutOfDomain,
}

impl Value {
    fn from_raw(v: f64) -> Value {
        if v.is_nan() {
            Value::OutOfDomain
        } else {
            Value::Number(v)
        }
    }

    pub fn number(self) -> Option<f64> {
        match self {
            Value::Number(v) => Some(v),
            Value::OutOfDomain => None,
        }
    }
}

fn eval_raw(expr: &Expr, row: &HashMap<&str, f64>) -> Result<f64> {
    Ok(match expr {
        Expr::Var(name) => {
            *row.get(name.as_ref()).ok_or_else(|| Error::Evaluation(format!("variable {name:?} is not bound")))?
        }
        Expr::Const(c) => *c,
        Expr::Param => return Err(Error::Evaluation("unfitted placeholder constant".into())),
        Expr::Unary(op, a) => op.apply(eval_raw(a, row)?),
        Expr::Binary(op, a, b) => {
            let x = eval_raw(a, row)?;
            let y = eval_raw(b, row)?;
            op.apply(x, y)
        }
    })
}

/// Evaluates an expression on one row of named values.
pub fn eval_expression(expr: &Expr, row: &HashMap<&str, f64>) -> Result<Value> {
    eval_raw(expr, row).map(Value::from_raw)
}

/// Algebraic clean-up after fitting: folds constant subtrees and removes
/// exact identities such as `1 * x`, `x + 0` and double negation.
pub fn simplify(expr: &Expr) -> Expr {
    match expr {
        Expr::Var(_) | Expr::Const(_) | Expr::Param => expr.clone(),
        Expr::Unary(op, a) => {
            let a = simplify(a);
            match (op, &a) {
                (_, Expr::Const(c)) if !op.apply(*c).is_nan() => Expr::Const(op.apply(*c)),
                (UnaryOp::Neg, Expr::Unary(UnaryOp::Neg, inner)) => (**inner).clone(),
                (UnaryOp::Inv, Expr::Unary(UnaryOp::Inv, inner)) => (**inner).clone(),
                _ => Expr::unary(*op, a),
            }
        }
        Expr::Binary(op, a, b) => {
            let a = simplify(a);
            let b = simplify(b);
            match (op, &a, &b) {
                (_, Expr::Const(x), Expr::Const(y)) if !op.apply(*x, *y).is_nan() => Expr::Const(op.apply(*x, *y)),
                (BinaryOp::Add, Expr::Const(z), other) | (BinaryOp::Add, other, Expr::Const(z)) if *z == 0.0 => {
                    other.clone()
                }
                (BinaryOp::Sub, other, Expr::Const(z)) if *z == 0.0 => other.clone(),
                (BinaryOp::Sub, Expr::Const(z), other) if *z == 0.0 => Expr::unary(UnaryOp::Neg, other.clone()),
                (BinaryOp::Mul, Expr::Const(z), _) | (BinaryOp::Mul, _, Expr::Const(z)) if *z == 0.0 => {
                    Expr::Const(0.0)
                }
                (BinaryOp::Mul, Expr::Const(one), other) | (BinaryOp::Mul, other, Expr::Const(one)) if *one == 1.0 => {
                    other.clone()
                }
                (BinaryOp::Div, other, Expr::Const(one)) if *one == 1.0 => other.clone(),
                _ => Expr::binary(*op, a, b),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn table_3a() -> Expr {
        Expr::binary(BinaryOp::Mul, Expr::constant(0.1095), Expr::unary(UnaryOp::Sin, Expr::var("M")))
    }

    #[test]
    fn evaluation_examples() {
        let row = HashMap::from([("M", FRAC_PI_2), ("x", 0.0)]);
        assert_eq!(eval_expression(&Expr::constant(2.5), &row).unwrap(), Value::Number(2.5));
        assert_eq!(eval_expression(&table_3a(), &row).unwrap(), Value::Number(0.1095));
        let recip = Expr::binary(BinaryOp::Div, Expr::constant(1.0), Expr::var("x"));
        assert_eq!(eval_expression(&recip, &row).unwrap(), Value::OutOfDomain);
        assert!(eval_expression(&Expr::var("y"), &row).is_err());
        assert!(eval_expression(&Expr::Param, &row).is_err());
        let log0 = Expr::unary(UnaryOp::Log, Expr::var("x"));
        assert_eq!(eval_expression(&log0, &row).unwrap(), Value::OutOfDomain);
        let big = Expr::unary(UnaryOp::Exp, Expr::constant(1e6));
        assert_eq!(eval_expression(&big, &row).unwrap(), Value::OutOfDomain);
    }

    #[test]
    fn canonical_forms() {
        let swapped = Expr::binary(BinaryOp::Mul, Expr::unary(UnaryOp::Sin, Expr::var("M")), Expr::constant(0.1095));
        assert_eq!(swapped.canonical_form(), table_3a().canonical_form());
        assert_eq!(table_3a().canonical_form(), "(mul (const 0.1095) (sin (var M)))");
        assert_eq!(Expr::var("M").canonical_form(), "(var M)");
        let sub_a = Expr::binary(BinaryOp::Sub, Expr::var("a"), Expr::var("b"));
        let sub_b = Expr::binary(BinaryOp::Sub, Expr::var("b"), Expr::var("a"));
        assert_ne!(sub_a.canonical_form(), sub_b.canonical_form());
    }

    #[test]
    fn table_3d_is_stable() {
        // 0.52524 sin(M) (sqrt(sqrt(sin(M) + 2)) + 1)
        let sin = || Expr::unary(UnaryOp::Sin, Expr::var("M"));
        let inner = Expr::binary(BinaryOp::Add, sin(), Expr::constant(2.0));
        let root = Expr::unary(UnaryOp::Sqrt, Expr::unary(UnaryOp::Sqrt, inner));
        let e = Expr::binary(
            BinaryOp::Mul,
            Expr::binary(BinaryOp::Mul, Expr::constant(0.52524), sin()),
            Expr::binary(BinaryOp::Add, root, Expr::constant(1.0)),
        );
        let first = e.canonical_form();
        assert_eq!(first, e.clone().canonical_form());
        assert_eq!(
            first,
            "(mul (add (const 1) (sqrt (sqrt (add (const 2) (sin (var M)))))) (mul (const 0.52524) (sin (var M))))"
        );
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig9(0.1095), "0.1095");
        assert_eq!(format_sig9(0.114_285_714_285), "0.114285714");
        assert_eq!(format_sig9(-2.0), "-2");
        assert_eq!(format_sig9(123_456_789.4), "123456789");
        assert_eq!(format_sig9(1.5e12), "1.5e12");
        assert_eq!(format_sig9(2.5e-7), "2.5e-7");
        assert_eq!(format_sig9(0.000_012_345), "0.000012345");
        assert_eq!(format_sig9(9.999_999_999), "10");
    }

    #[test]
    fn infix_text() {
        assert_eq!(table_3a().infix(), "(0.1095 * sin(M))");
        let e = Expr::unary(UnaryOp::Neg, Expr::unary(UnaryOp::Arctan, Expr::var("M")));
        assert_eq!(e.infix(), "(-arctan(M))");
    }

    #[test]
    fn simplification() {
        let e = Expr::binary(BinaryOp::Mul, Expr::constant(1.0), Expr::var("M"));
        assert_eq!(simplify(&e), Expr::var("M"));
        let z = Expr::binary(BinaryOp::Mul, Expr::constant(0.0), Expr::unary(UnaryOp::Sin, Expr::var("M")));
        assert_eq!(simplify(&z), Expr::constant(0.0));
        let nn = Expr::unary(UnaryOp::Neg, Expr::unary(UnaryOp::Neg, Expr::var("M")));
        assert_eq!(simplify(&nn), Expr::var("M"));
        let folded = Expr::binary(BinaryOp::Add, Expr::constant(1.0), Expr::unary(UnaryOp::Neg, Expr::constant(3.0)));
        assert_eq!(simplify(&folded), Expr::constant(-2.0));
    }

    #[test]
    fn placeholders() {
        let sk = Expr::binary(BinaryOp::Add, Expr::Param, Expr::binary(BinaryOp::Mul, Expr::Param, Expr::var("M")));
        assert_eq!(sk.param_count(), 2);
        let fitted = sk.with_params(&[1.0, 2.0]);
        assert_eq!(fitted.canonical_form(), "(add (const 1) (mul (const 2) (var M)))");
        assert_eq!(sk.canonical_form(), "(add (const ?) (mul (const ?) (var M)))");
    }
}
