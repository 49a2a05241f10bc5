use serde::Serialize;

use super::{ArithOp, CmpOp, Expr, ExprError, LogicOp};
use crate::trial_data::{CovariateKind, CovariateSchema, CovariateValue, SubjectRecord, TrialDataset};

/// Three-valued evaluation result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tri {
    In,
    Out,
    Unknown,
}

impl Tri {
    fn from_bool(b: bool) -> Tri {
        if b {
            Tri::In
        } else {
            Tri::Out
        }
    }

    pub fn and(self, other: Tri) -> Tri {
        match (self, other) {
            (Tri::Out, _) | (_, Tri::Out) => Tri::Out,
            (Tri::In, Tri::In) => Tri::In,
            _ => Tri::Unknown,
        }
    }

    pub fn or(self, other: Tri) -> Tri {
        match (self, other) {
            (Tri::In, _) | (_, Tri::In) => Tri::In,
            (Tri::Out, Tri::Out) => Tri::Out,
            _ => Tri::Unknown,
        }
    }

    pub fn not(self) -> Tri {
        match self {
            Tri::In => Tri::Out,
            Tri::Out => Tri::In,
            Tri::Unknown => Tri::Unknown,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Num,
    Str,
    Bool,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Str(String),
    Bool(bool),
    Var(usize),
    Neg(Box<Node>),
    Not(Box<Node>),
    Arith(ArithOp, Box<Node>, Box<Node>),
    /// Numeric comparison; boolean operands are coerced to 1/0.
    CmpNum(CmpOp, Box<Node>, Box<Node>),
    /// Equality on booleans or category labels.
    CmpEq(bool, Box<Node>, Box<Node>),
    Logic(LogicOp, Box<Node>, Box<Node>),
}

/// An expression resolved and type-checked against a covariate schema.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundExpr {
    root: Node,
}

fn yes_no(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "yes" | "true" => Some(true),
        "no" | "false" => Some(false),
        _ => None,
    }
}

fn bind_node(e: &Expr, schema: &CovariateSchema) -> Result<(Node, Ty), ExprError> {
    let numeric = |n: &Expr| -> Result<Node, ExprError> {
        match bind_node(n, schema)? {
            (node, Ty::Num | Ty::Bool) => Ok(node),
            (_, Ty::Str) => Err(ExprError::Type(format!("categorical operand `{n}` used in arithmetic"))),
        }
    };
    let logical = |n: &Expr| -> Result<Node, ExprError> {
        match bind_node(n, schema)? {
            (node, Ty::Bool) => Ok(node),
            _ => Err(ExprError::Type(format!("`{n}` is not boolean"))),
        }
    };
    Ok(match e {
        Expr::Number(x) => (Node::Num(*x), Ty::Num),
        Expr::Str(s) => (Node::Str(s.clone()), Ty::Str),
        Expr::Bool(b) => (Node::Bool(*b), Ty::Bool),
        Expr::Var(name) => {
            let j = schema.index_of(name).ok_or_else(|| ExprError::UnknownCovariate(name.clone()))?;
            let ty = match schema.covariates()[j].kind {
                CovariateKind::Numeric => Ty::Num,
                CovariateKind::Boolean => Ty::Bool,
                CovariateKind::Categorical => Ty::Str,
            };
            (Node::Var(j), ty)
        }
        Expr::Neg(inner) => (Node::Neg(Box::new(numeric(inner)?)), Ty::Num),
        Expr::Not(inner) => (Node::Not(Box::new(logical(inner)?)), Ty::Bool),
        Expr::Arith(op, l, r) => (Node::Arith(*op, Box::new(numeric(l)?), Box::new(numeric(r)?)), Ty::Num),
        Expr::Logic(op, l, r) => (Node::Logic(*op, Box::new(logical(l)?), Box::new(logical(r)?)), Ty::Bool),
        Expr::Compare(op, l, r) => {
            let (ln, lt) = bind_node(l, schema)?;
            let (rn, rt) = bind_node(r, schema)?;
            let node = match (lt, rt) {
                (Ty::Str, Ty::Str) => {
                    if op.is_order() {
                        return Err(ExprError::StringOrder(op.symbol()));
                    }
                    check_level(&ln, &rn, schema)?;
                    check_level(&rn, &ln, schema)?;
                    Node::CmpEq(*op == CmpOp::Eq, Box::new(ln), Box::new(rn))
                }
                (Ty::Bool, Ty::Str) | (Ty::Str, Ty::Bool) => {
                    let (bool_side, str_side) = if lt == Ty::Bool { (ln, rn) } else { (rn, ln) };
                    let Node::Str(label) = &str_side else {
                        return Err(ExprError::Type(format!("boolean compared with categorical in `{e}`")));
                    };
                    let value = yes_no(label)
                        .ok_or_else(|| ExprError::Type(format!("'{label}' is not a boolean label (use 'Yes'/'No')")))?;
                    if op.is_order() {
                        return Err(ExprError::StringOrder(op.symbol()));
                    }
                    Node::CmpEq(*op == CmpOp::Eq, Box::new(bool_side), Box::new(Node::Bool(value)))
                }
                (Ty::Str, _) | (_, Ty::Str) => {
                    return Err(ExprError::Type(format!("categorical compared with a number in `{e}`")))
                }
                (Ty::Bool, Ty::Bool) if !op.is_order() => Node::CmpEq(*op == CmpOp::Eq, Box::new(ln), Box::new(rn)),
                _ => Node::CmpNum(*op, Box::new(ln), Box::new(rn)),
            };
            (node, Ty::Bool)
        }
    })
}

fn check_level(var: &Node, literal: &Node, schema: &CovariateSchema) -> Result<(), ExprError> {
    if let (Node::Var(j), Node::Str(label)) = (var, literal) {
        let def = &schema.covariates()[*j];
        if !def.has_level(label) {
            return Err(ExprError::UndeclaredLevel(label.clone(), def.name.clone()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
enum Value<'a> {
    Num(f64),
    Str(&'a str),
    Bool(bool),
    Unknown,
}

impl Value<'_> {
    fn as_num(self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(x),
            Value::Bool(b) => Some(if b { 1.0 } else { 0.0 }),
            _ => None,
        }
    }

    fn as_tri(self) -> Tri {
        match self {
            Value::Bool(b) => Tri::from_bool(b),
            _ => Tri::Unknown,
        }
    }
}

impl From<Tri> for Value<'_> {
    fn from(t: Tri) -> Self {
        match t {
            Tri::In => Value::Bool(true),
            Tri::Out => Value::Bool(false),
            Tri::Unknown => Value::Unknown,
        }
    }
}

fn eval_node<'a>(node: &'a Node, s: &'a SubjectRecord) -> Value<'a> {
    match node {
        Node::Num(x) => Value::Num(*x),
        Node::Str(v) => Value::Str(v),
        Node::Bool(b) => Value::Bool(*b),
        Node::Var(j) => match &s.covariates[*j] {
            CovariateValue::Numeric(x) => Value::Num(*x),
            CovariateValue::Categorical(l) => Value::Str(l),
            CovariateValue::Boolean(b) => Value::Bool(*b),
            CovariateValue::Missing => Value::Unknown,
        },
        Node::Neg(inner) => eval_node(inner, s).as_num().map_or(Value::Unknown, |x| Value::Num(-x)),
        Node::Not(inner) => eval_node(inner, s).as_tri().not().into(),
        Node::Arith(op, l, r) => {
            let (Some(a), Some(b)) = (eval_node(l, s).as_num(), eval_node(r, s).as_num()) else {
                return Value::Unknown;
            };
            let x = match op {
                ArithOp::Add => a + b,
                ArithOp::Sub => a - b,
                ArithOp::Mul => a * b,
                ArithOp::Div if b == 0.0 => return Value::Unknown,
                ArithOp::Div => a / b,
            };
            if x.is_finite() {
                Value::Num(x)
            } else {
                Value::Unknown
            }
        }
        Node::CmpNum(op, l, r) => {
            let (Some(a), Some(b)) = (eval_node(l, s).as_num(), eval_node(r, s).as_num()) else {
                return Value::Unknown;
            };
            Value::Bool(match op {
                CmpOp::Gt => a > b,
                CmpOp::Ge => a >= b,
                CmpOp::Lt => a < b,
                CmpOp::Le => a <= b,
                CmpOp::Eq => a == b,
                CmpOp::Ne => a != b,
            })
        }
        Node::CmpEq(eq, l, r) => {
            let same = match (eval_node(l, s), eval_node(r, s)) {
                (Value::Str(a), Value::Str(b)) => a == b,
                (Value::Bool(a), Value::Bool(b)) => a == b,
                _ => return Value::Unknown,
            };
            Value::Bool(same == *eq)
        }
        Node::Logic(op, l, r) => {
            let a = eval_node(l, s).as_tri();
            let b = eval_node(r, s).as_tri();
            match op {
                LogicOp::And => a.and(b),
                LogicOp::Or => a.or(b),
            }
            .into()
        }
    }
}

impl BoundExpr {
    /// Resolves covariate references and checks operand types against the schema.
    pub fn bind(expr: &Expr, schema: &CovariateSchema) -> Result<BoundExpr, ExprError> {
        match bind_node(expr, schema)? {
            (root, Ty::Bool) => Ok(BoundExpr { root }),
            _ => Err(ExprError::NotBoolean),
        }
    }

    pub fn evaluate(&self, subject: &SubjectRecord) -> Tri {
        eval_node(&self.root, subject).as_tri()
    }
}

/// Evaluates one subject; the subject's covariates must follow `schema`.
pub fn evaluate(expr: &Expr, schema: &CovariateSchema, subject: &SubjectRecord) -> Result<Tri, ExprError> {
    Ok(BoundExpr::bind(expr, schema)?.evaluate(subject))
}

/// Per-subject subgroup indicator over a dataset, in dataset order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MembershipVector {
    pub subject_ids: Vec<String>,
    pub flags: Vec<bool>,
    /// Subjects whose evaluation was `Unknown`; their flag is `false`.
    pub unknown_count: usize,
}

impl MembershipVector {
    pub fn size(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    /// Builds a vector from explicit flags, mostly for tests and simulations.
    pub fn from_flags(subject_ids: Vec<String>, flags: Vec<bool>) -> Self {
        assert_eq!(subject_ids.len(), flags.len(), "one flag per subject");
        Self { subject_ids, flags, unknown_count: 0 }
    }

    pub fn complement(&self) -> Self {
        Self {
            subject_ids: self.subject_ids.clone(),
            flags: self.flags.iter().map(|f| !f).collect(),
            unknown_count: self.unknown_count,
        }
    }
}

pub fn membership(expr: &Expr, ds: &TrialDataset) -> Result<MembershipVector, ExprError> {
    let bound = BoundExpr::bind(expr, ds.schema())?;
    let mut unknown_count = 0;
    let flags = ds
        .subjects()
        .iter()
        .map(|s| match bound.evaluate(s) {
            Tri::In => true,
            Tri::Out => false,
            Tri::Unknown => {
                unknown_count += 1;
                false
            }
        })
        .collect();
    Ok(MembershipVector { subject_ids: ds.subject_ids(), flags, unknown_count })
}

/// `1 - |A ∩ B| / |A ∪ B|`, zero when both sets are empty.
pub fn jaccard_distance(a: &MembershipVector, b: &MembershipVector) -> Result<f64, ExprError> {
    if a.subject_ids != b.subject_ids {
        return Err(ExprError::SubjectMismatch);
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.flags.iter().zip(&b.flags) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    if union == 0 {
        return Ok(0.0);
    }
    Ok(1.0 - inter as f64 / union as f64)
}
