//! Subgroup-definition expressions.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! or      -> and ( "|" and )*
//! and     -> cmp ( "&" cmp )*
//! cmp     -> sum ( ( ">" | ">=" | "<" | "<=" | "==" | "!=" ) sum )?
//! sum     -> product ( ( "+" | "-" ) product )*
//! product -> unary ( ( "*" | "/" ) unary )*
//! unary   -> ( "!" | "-" ) unary | primary
//! primary -> NUMBER | STRING | TRUE | FALSE | IDENT | "(" or ")"
//! ```
//!
//! Comparisons do not chain. Strings are single- or double-quoted. Anything
//! outside this grammar (function calls, `%in%`, indexing) is rejected.
//!
//! Evaluation uses Kleene three-valued logic: missing covariates make
//! comparisons and arithmetic `Unknown`, `Unknown & false` is `Out` and
//! `Unknown | true` is `In`. At the membership boundary `Unknown` counts as
//! not-in-subgroup.

mod eval;
mod lexer;
mod parser;
mod print;

use std::collections::BTreeSet;

pub use eval::{evaluate, jaccard_distance, membership, BoundExpr, MembershipVector, Tri};
pub use parser::parse;
pub use print::print;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Gt,
    Ge,
    Lt,
    Le,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn is_order(self) -> bool {
        !matches!(self, CmpOp::Eq | CmpOp::Ne)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LogicOp {
    And,
    Or,
}

/// Parsed subgroup expression. Parentheses are not represented.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Str(String),
    Bool(bool),
    Var(String),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    Compare(CmpOp, Box<Expr>, Box<Expr>),
    Logic(LogicOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn num(x: f64) -> Expr {
        Expr::Number(x)
    }

    pub fn string(s: &str) -> Expr {
        Expr::Str(s.to_string())
    }

    pub fn cmp(op: CmpOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Compare(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn arith(op: ArithOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Arith(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn and(lhs: Expr, rhs: Expr) -> Expr {
        Expr::Logic(LogicOp::And, Box::new(lhs), Box::new(rhs))
    }

    pub fn or(lhs: Expr, rhs: Expr) -> Expr {
        Expr::Logic(LogicOp::Or, Box::new(lhs), Box::new(rhs))
    }

    pub fn not(inner: Expr) -> Expr {
        Expr::Not(Box::new(inner))
    }

    pub fn neg(inner: Expr) -> Expr {
        Expr::Neg(Box::new(inner))
    }

    /// Distinct covariate names referenced anywhere in the expression.
    pub fn variables_used(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(name) => {
                out.insert(name.clone());
            }
            Expr::Number(_) | Expr::Str(_) | Expr::Bool(_) => {}
            Expr::Neg(e) | Expr::Not(e) => e.collect_vars(out),
            Expr::Arith(_, l, r) | Expr::Compare(_, l, r) | Expr::Logic(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    fn has_comparison(&self) -> bool {
        match self {
            Expr::Compare(..) => true,
            Expr::Number(_) | Expr::Str(_) | Expr::Bool(_) | Expr::Var(_) => false,
            Expr::Neg(e) | Expr::Not(e) => e.has_comparison(),
            Expr::Arith(_, l, r) | Expr::Logic(_, l, r) => l.has_comparison() || r.has_comparison(),
        }
    }
}

pub fn variables_used(expr: &Expr) -> BTreeSet<String> {
    expr.variables_used()
}

const KEYWORDS: [&str; 4] = ["TRUE", "FALSE", "true", "false"];

/// Covariate identifier grammar: `[A-Za-z_][A-Za-z0-9_.]*`, keywords excluded.
pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        && !KEYWORDS.contains(&name)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown token `{token}` at position {position}")]
    UnknownToken { position: usize, token: String },
    #[error("expression is not boolean-valued")]
    NotBoolean,
    #[error("expression references no covariate and makes no comparison")]
    Constant,
    #[error("type error: {0}")]
    Type(String),
    #[error("unknown covariate `{0}`")]
    UnknownCovariate(String),
    #[error("`{0}` is not a declared level of `{1}`")]
    UndeclaredLevel(String, String),
    #[error("strings cannot be compared with `{0}`")]
    StringOrder(&'static str),
    #[error("membership vectors cover different subjects")]
    SubjectMismatch,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identifiers() {
        assert!(is_identifier("CRPSI"));
        assert!(is_identifier("tnf_naive.v2"));
        assert!(!is_identifier("2AGE"));
        assert!(!is_identifier(""));
        assert!(!is_identifier("TRUE"));
        assert!(!is_identifier("A-B"));
    }

    #[test]
    fn variables_in_worked_example() {
        let e = parse("CRP > 2.5 & AGE < 40").unwrap();
        let vars: Vec<_> = e.variables_used().into_iter().collect();
        assert_eq!(vars, ["AGE", "CRP"]);
    }

    #[test]
    fn variables_dedup_and_empty() {
        assert_eq!(parse("AGE > 40 | AGE < 20").unwrap().variables_used().len(), 1);
        assert!(parse("1 < 2").unwrap().variables_used().is_empty());
    }
}
