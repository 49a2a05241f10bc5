use std::fmt;

use super::{ArithOp, Expr, LogicOp};

const OR: u8 = 1;
const AND: u8 = 2;
const CMP: u8 = 3;
const SUM: u8 = 4;
const PRODUCT: u8 = 5;
const UNARY: u8 = 6;
const ATOM: u8 = 7;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Logic(LogicOp::Or, ..) => OR,
        Expr::Logic(LogicOp::And, ..) => AND,
        Expr::Compare(..) => CMP,
        Expr::Arith(ArithOp::Add | ArithOp::Sub, ..) => SUM,
        Expr::Arith(ArithOp::Mul | ArithOp::Div, ..) => PRODUCT,
        Expr::Neg(_) | Expr::Not(_) => UNARY,
        // A negative literal prints as `(-x)`.
        Expr::Number(x) if x.is_sign_negative() => UNARY,
        _ => ATOM,
    }
}

struct Child<'a>(&'a Expr, bool);

impl fmt::Display for Child<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Canonical text: binary operators spaced, parentheses only where the tree needs them.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = precedence(self);
        // Left operands need parentheses when they bind looser; right operands
        // also at equal precedence so the left-associative parse is reproduced.
        fn left(e: &Expr, p: u8) -> Child<'_> {
            Child(e, precedence(e) < p)
        }
        fn right(e: &Expr, p: u8) -> Child<'_> {
            Child(e, precedence(e) <= p)
        }
        match self {
            Expr::Number(x) if x.is_sign_negative() => write!(f, "({x})"),
            Expr::Number(x) => write!(f, "{x}"),
            Expr::Str(s) if s.contains('\'') => write!(f, "\"{s}\""),
            Expr::Str(s) => write!(f, "'{s}'"),
            Expr::Bool(true) => f.write_str("TRUE"),
            Expr::Bool(false) => f.write_str("FALSE"),
            Expr::Var(name) => f.write_str(name),
            Expr::Neg(e) => write!(f, "-{}", left(e, p)),
            Expr::Not(e) => write!(f, "!{}", left(e, p)),
            Expr::Arith(op, l, r) => {
                let sym = match op {
                    ArithOp::Add => "+",
                    ArithOp::Sub => "-",
                    ArithOp::Mul => "*",
                    ArithOp::Div => "/",
                };
                write!(f, "{} {sym} {}", left(l, p), right(r, p))
            }
            // Comparisons do not associate, so both sides are parenthesized at equal precedence.
            Expr::Compare(op, l, r) => write!(f, "{} {} {}", right(l, p), op.symbol(), right(r, p)),
            Expr::Logic(op, l, r) => {
                let sym = if *op == LogicOp::And { "&" } else { "|" };
                write!(f, "{} {sym} {}", left(l, p), right(r, p))
            }
        }
    }
}

/// Canonical text of an expression.
pub fn print(expr: &Expr) -> String {
    expr.to_string()
}
