use super::lexer::{tokenize, Spanned, Token};
use super::{ArithOp, CmpOp, Expr, ExprError, LogicOp};

/// Static type of a subexpression; covariate references are untyped until bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Num,
    Str,
    Bool,
    Any,
}

/// Parses an expression, rejecting syntax errors and non-boolean roots.
pub fn parse(text: &str) -> Result<Expr, ExprError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0, end: text.chars().count() };
    let (expr, ty) = p.or()?;
    if let Some((position, tok)) = p.tokens.get(p.pos) {
        let message = if *tok == Token::LParen && matches!(p.tokens.get(p.pos.wrapping_sub(1)), Some((_, Token::Ident(_)))) {
            "function calls are not supported".to_string()
        } else {
            format!("unexpected {}", tok.describe())
        };
        return Err(ExprError::Syntax { position: *position, message });
    }
    if !matches!(ty, Ty::Bool | Ty::Any) {
        return Err(ExprError::NotBoolean);
    }
    if expr.variables_used().is_empty() && !expr.has_comparison() {
        return Err(ExprError::Constant);
    }
    Ok(expr)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|t| &t.1)
    }

    fn position(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |t| t.0)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax { position: self.position(), message: message.into() })
    }

    fn or(&mut self) -> Result<(Expr, Ty), ExprError> {
        let (mut lhs, mut ty) = self.and()?;
        while self.peek() == Some(&Token::Pipe) {
            self.pos += 1;
            let (rhs, rty) = self.and()?;
            logical_operand(ty, "|")?;
            logical_operand(rty, "|")?;
            lhs = Expr::Logic(LogicOp::Or, Box::new(lhs), Box::new(rhs));
            ty = Ty::Bool;
        }
        Ok((lhs, ty))
    }

    fn and(&mut self) -> Result<(Expr, Ty), ExprError> {
        let (mut lhs, mut ty) = self.comparison()?;
        while self.peek() == Some(&Token::Amp) {
            self.pos += 1;
            let (rhs, rty) = self.comparison()?;
            logical_operand(ty, "&")?;
            logical_operand(rty, "&")?;
            lhs = Expr::Logic(LogicOp::And, Box::new(lhs), Box::new(rhs));
            ty = Ty::Bool;
        }
        Ok((lhs, ty))
    }

    fn comparison_op(&self) -> Option<CmpOp> {
        Some(match self.peek()? {
            Token::Gt => CmpOp::Gt,
            Token::Ge => CmpOp::Ge,
            Token::Lt => CmpOp::Lt,
            Token::Le => CmpOp::Le,
            Token::EqEq => CmpOp::Eq,
            Token::Ne => CmpOp::Ne,
            _ => return None,
        })
    }

    fn comparison(&mut self) -> Result<(Expr, Ty), ExprError> {
        let (lhs, lty) = self.sum()?;
        let Some(op) = self.comparison_op() else {
            return Ok((lhs, lty));
        };
        self.pos += 1;
        let (rhs, rty) = self.sum()?;
        if self.comparison_op().is_some() {
            return self.error("comparison operators cannot be chained");
        }
        match (lty, rty) {
            (Ty::Str, Ty::Num) | (Ty::Num, Ty::Str) => {
                return Err(ExprError::Type(format!("cannot compare a string with a number using `{}`", op.symbol())))
            }
            (Ty::Str, Ty::Str) if op.is_order() => return Err(ExprError::StringOrder(op.symbol())),
            _ => {}
        }
        Ok((Expr::Compare(op, Box::new(lhs), Box::new(rhs)), Ty::Bool))
    }

    fn sum(&mut self) -> Result<(Expr, Ty), ExprError> {
        let (mut lhs, mut ty) = self.product()?;
        loop {
            let op = match self.peek() {
                Some(Token::Plus) => ArithOp::Add,
                Some(Token::Minus) => ArithOp::Sub,
                _ => return Ok((lhs, ty)),
            };
            self.pos += 1;
            let (rhs, rty) = self.product()?;
            numeric_operand(ty)?;
            numeric_operand(rty)?;
            lhs = Expr::Arith(op, Box::new(lhs), Box::new(rhs));
            ty = Ty::Num;
        }
    }

    fn product(&mut self) -> Result<(Expr, Ty), ExprError> {
        let (mut lhs, mut ty) = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Token::Star) => ArithOp::Mul,
                Some(Token::Slash) => ArithOp::Div,
                _ => return Ok((lhs, ty)),
            };
            self.pos += 1;
            let (rhs, rty) = self.unary()?;
            numeric_operand(ty)?;
            numeric_operand(rty)?;
            lhs = Expr::Arith(op, Box::new(lhs), Box::new(rhs));
            ty = Ty::Num;
        }
    }

    fn unary(&mut self) -> Result<(Expr, Ty), ExprError> {
        match self.peek() {
            Some(Token::Bang) => {
                self.pos += 1;
                let (inner, ty) = self.unary()?;
                logical_operand(ty, "!")?;
                Ok((Expr::Not(Box::new(inner)), Ty::Bool))
            }
            Some(Token::Minus) => {
                self.pos += 1;
                let (inner, ty) = self.unary()?;
                numeric_operand(ty)?;
                Ok((Expr::Neg(Box::new(inner)), Ty::Num))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<(Expr, Ty), ExprError> {
        let Some((_, tok)) = self.tokens.get(self.pos).cloned() else {
            return self.error("unexpected end of expression");
        };
        let out = match tok {
            Token::Number(x) => (Expr::Number(x), Ty::Num),
            Token::Str(s) => (Expr::Str(s), Ty::Str),
            Token::Bool(b) => (Expr::Bool(b), Ty::Bool),
            Token::Ident(name) => (Expr::Var(name), Ty::Any),
            Token::LParen => {
                self.pos += 1;
                let inner = self.or()?;
                if self.peek() != Some(&Token::RParen) {
                    return self.error("expected `)`");
                }
                inner
            }
            other => return self.error(format!("unexpected {}", other.describe())),
        };
        self.pos += 1;
        Ok(out)
    }
}

fn numeric_operand(ty: Ty) -> Result<(), ExprError> {
    if ty == Ty::Str {
        return Err(ExprError::Type("string used in arithmetic".into()));
    }
    Ok(())
}

fn logical_operand(ty: Ty, op: &str) -> Result<(), ExprError> {
    match ty {
        Ty::Bool | Ty::Any => Ok(()),
        Ty::Num => Err(ExprError::Type(format!("numeric operand of `{op}`"))),
        Ty::Str => Err(ExprError::Type(format!("string operand of `{op}`"))),
    }
}
