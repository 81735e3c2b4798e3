use std::collections::BTreeMap;

use thiserror::Error;

use super::ast::{BinaryOp, Builtin, Expr, UnaryOp};
use super::value::Value;

pub const ANSWER: &str = "_answer_";
pub const NOW: &str = "_now_";
pub const FETCHED: &str = "_fetched_";

/// Names the engine binds itself; schema rules may read but never define them.
pub const RESERVED: [&str; 3] = [ANSWER, NOW, FETCHED];

/// Variable bindings a rule is evaluated against.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalContext {
    bindings: BTreeMap<String, Value>,
}

impl EvalContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_answer(mut self, answer: Value) -> Self {
        self.set(ANSWER, answer);
        self
    }

    pub fn with_now(mut self, epoch_seconds: i64) -> Self {
        self.set(NOW, Value::Number(epoch_seconds as f64));
        self
    }

    pub fn with_fetched(mut self, fetched: Value) -> Self {
        self.set(FETCHED, fetched);
        self
    }

    pub fn set(&mut self, name: impl Into<String>, value: Value) {
        self.bindings.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.bindings.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.bindings.contains_key(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalErrorKind {
    UnboundVariable(String),
    TypeMismatch(String),
    DivisionByZero,
    Conversion(String),
}

/// Evaluation failure; `expr` is the offending sub-expression, printed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}", describe(.kind, .expr))]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub expr: String,
}

fn describe(kind: &EvalErrorKind, expr: &str) -> String {
    match kind {
        EvalErrorKind::UnboundVariable(name) => format!("unbound variable `{name}`"),
        EvalErrorKind::TypeMismatch(detail) => format!("type mismatch in `{expr}`: {detail}"),
        EvalErrorKind::DivisionByZero => format!("division by zero in `{expr}`"),
        EvalErrorKind::Conversion(detail) => format!("conversion failed in `{expr}`: {detail}"),
    }
}

fn fail(kind: EvalErrorKind, at: &Expr) -> EvalError {
    EvalError {
        kind,
        expr: at.to_string(),
    }
}

/// Evaluates `expr` strictly, except that `&&` and `||` short-circuit.
///
/// Operands of `&&`, `||` and `!` must be booleans. Ordering comparisons need
/// two numbers or two strings; `==`/`!=` need matching types unless one side
/// is `null`.
pub fn evaluate(expr: &Expr, ctx: &EvalContext) -> Result<Value, EvalError> {
    match expr {
        Expr::Literal(v) => Ok(v.clone()),
        Expr::Var(name) => ctx
            .get(name)
            .cloned()
            .ok_or_else(|| fail(EvalErrorKind::UnboundVariable(name.clone()), expr)),
        Expr::Unary { op, operand } => {
            let v = evaluate(operand, ctx)?;
            match (op, v) {
                (UnaryOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                (UnaryOp::Negate, Value::Number(n)) => Ok(Value::Number(-n)),
                (UnaryOp::Not, v) => Err(fail(
                    EvalErrorKind::TypeMismatch(format!("`!` needs a boolean, got {}", v.type_name())),
                    expr,
                )),
                (UnaryOp::Negate, v) => Err(fail(
                    EvalErrorKind::TypeMismatch(format!("`-` needs a number, got {}", v.type_name())),
                    expr,
                )),
            }
        }
        Expr::Binary { op, lhs, rhs } => match op {
            BinaryOp::And | BinaryOp::Or => {
                let l = expect_bool(evaluate(lhs, ctx)?, *op, expr)?;
                // short-circuit
                if (*op == BinaryOp::And && !l) || (*op == BinaryOp::Or && l) {
                    return Ok(Value::Bool(l));
                }
                let r = expect_bool(evaluate(rhs, ctx)?, *op, expr)?;
                Ok(Value::Bool(r))
            }
            _ => {
                let l = evaluate(lhs, ctx)?;
                let r = evaluate(rhs, ctx)?;
                binary(*op, l, r, expr)
            }
        },
        Expr::Call { func, args } => {
            let vals = args
                .iter()
                .map(|a| evaluate(a, ctx))
                .collect::<Result<Vec<_>, _>>()?;
            call(*func, vals, expr)
        }
    }
}

fn expect_bool(v: Value, op: BinaryOp, at: &Expr) -> Result<bool, EvalError> {
    v.as_bool().ok_or_else(|| {
        fail(
            EvalErrorKind::TypeMismatch(format!("`{}` needs booleans, got {}", op.symbol(), v.type_name())),
            at,
        )
    })
}

fn binary(op: BinaryOp, l: Value, r: Value, at: &Expr) -> Result<Value, EvalError> {
    use Value::*;
    let mismatch = |l: &Value, r: &Value| {
        fail(
            EvalErrorKind::TypeMismatch(format!(
                "`{}` not defined for {} and {}",
                op.symbol(),
                l.type_name(),
                r.type_name()
            )),
            at,
        )
    };
    match op {
        BinaryOp::Eq | BinaryOp::Ne => {
            let equal = match (&l, &r) {
                (Null, _) | (_, Null) => l == r,
                (Number(_), Number(_)) | (String(_), String(_)) | (Bool(_), Bool(_)) => l == r,
                _ => return Err(mismatch(&l, &r)),
            };
            Ok(Bool(equal == (op == BinaryOp::Eq)))
        }
        BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
            let ord = match (&l, &r) {
                (Number(a), Number(b)) => a.partial_cmp(b),
                // byte order of UTF-8 equals code point order
                (String(a), String(b)) => Some(a.as_bytes().cmp(b.as_bytes())),
                _ => return Err(mismatch(&l, &r)),
            };
            let Some(ord) = ord else {
                return Ok(Bool(false));
            };
            Ok(Bool(match op {
                BinaryOp::Lt => ord.is_lt(),
                BinaryOp::Le => ord.is_le(),
                BinaryOp::Gt => ord.is_gt(),
                _ => ord.is_ge(),
            }))
        }
        BinaryOp::Add => match (l, r) {
            (Number(a), Number(b)) => Ok(Number(a + b)),
            (String(a), String(b)) => Ok(String(a + &b)),
            (l, r) => Err(mismatch(&l, &r)),
        },
        BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem => {
            let (Number(a), Number(b)) = (&l, &r) else {
                return Err(mismatch(&l, &r));
            };
            let (a, b) = (*a, *b);
            match op {
                BinaryOp::Sub => Ok(Number(a - b)),
                BinaryOp::Mul => Ok(Number(a * b)),
                _ if b == 0.0 => Err(fail(EvalErrorKind::DivisionByZero, at)),
                BinaryOp::Div => Ok(Number(a / b)),
                _ => Ok(Number(a % b)),
            }
        }
        BinaryOp::And | BinaryOp::Or => unreachable!("handled with short-circuit"),
    }
}

fn call(func: Builtin, mut args: Vec<Value>, at: &Expr) -> Result<Value, EvalError> {
    let bad_arg = |v: &Value| {
        fail(
            EvalErrorKind::TypeMismatch(format!("`{}` not defined for {}", func.name(), v.type_name())),
            at,
        )
    };
    match func {
        Builtin::Num => match args.pop().expect("arity checked at parse time") {
            Value::Number(n) => Ok(Value::Number(n)),
            Value::String(s) => s
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|n| n.is_finite())
                .map(Value::Number)
                .ok_or_else(|| fail(EvalErrorKind::Conversion(format!("{s:?} is not a number")), at)),
            v => Err(bad_arg(&v)),
        },
        Builtin::Lower => match args.pop().expect("arity checked at parse time") {
            Value::String(s) => Ok(Value::String(s.to_lowercase())),
            v => Err(bad_arg(&v)),
        },
        Builtin::Len => match args.pop().expect("arity checked at parse time") {
            Value::String(s) => Ok(Value::Number(s.chars().count() as f64)),
            v => Err(bad_arg(&v)),
        },
        Builtin::Contains => {
            let needle = args.pop().expect("arity checked at parse time");
            let haystack = args.pop().expect("arity checked at parse time");
            match (&haystack, &needle) {
                (Value::String(h), Value::String(n)) => Ok(Value::Bool(h.contains(n.as_str()))),
                (Value::String(_), v) | (v, _) => Err(bad_arg(v)),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rule::parse_rule;

    fn eval_src(src: &str, ctx: &EvalContext) -> Result<Value, EvalError> {
        evaluate(&parse_rule(src).unwrap(), ctx)
    }

    #[test]
    fn answer_comparison() {
        let ctx = EvalContext::new().with_answer(Value::Number(3.0));
        assert_eq!(eval_src("_answer_ <= 2", &ctx).unwrap(), Value::Bool(false));
    }

    #[test]
    fn lower_then_compare() {
        let ctx = EvalContext::new().with_answer("YES".into());
        assert_eq!(eval_src(r#"lower(_answer_) == "yes""#, &ctx).unwrap(), Value::Bool(true));
    }

    #[test]
    fn missing_fetched_is_unbound() {
        let e = eval_src("_fetched_ > 30", &EvalContext::new()).unwrap_err();
        assert_eq!(e.kind, EvalErrorKind::UnboundVariable("_fetched_".into()));
        assert!(e.to_string().contains("_fetched_"));
    }

    #[test]
    fn type_mismatch_names_subexpression() {
        let ctx = EvalContext::new().with_answer("abc".into());
        let e = eval_src("true && _answer_ < 3", &ctx).unwrap_err();
        assert!(matches!(e.kind, EvalErrorKind::TypeMismatch(_)));
        assert_eq!(e.expr, "(_answer_ < 3)");
    }

    #[test]
    fn division_and_modulo_by_zero() {
        let ctx = EvalContext::new();
        assert_eq!(eval_src("1 / 0", &ctx).unwrap_err().kind, EvalErrorKind::DivisionByZero);
        assert_eq!(eval_src("1 % (2 - 2)", &ctx).unwrap_err().expr, "(1 % (2 - 2))");
    }

    #[test]
    fn short_circuit_guards_type_errors() {
        let ctx = EvalContext::new().with_answer("".into());
        assert_eq!(
            eval_src("len(_answer_) > 0 && num(_answer_) < 5", &ctx).unwrap(),
            Value::Bool(false)
        );
        assert_eq!(eval_src("true || 1 / 0 > 1", &ctx).unwrap(), Value::Bool(true));
        assert!(eval_src("false || 1", &ctx).is_err());
    }

    #[test]
    fn strings_order_by_code_point() {
        let ctx = EvalContext::new();
        assert_eq!(eval_src(r#""Z" < "a""#, &ctx).unwrap(), Value::Bool(true));
        assert_eq!(eval_src(r#""ab" < "abc""#, &ctx).unwrap(), Value::Bool(true));
    }

    #[test]
    fn null_equality_and_cross_type_errors() {
        let ctx = EvalContext::new().with_fetched(Value::Null);
        assert_eq!(eval_src("_fetched_ == null", &ctx).unwrap(), Value::Bool(true));
        assert_eq!(eval_src("1 != null", &ctx).unwrap(), Value::Bool(true));
        assert!(eval_src(r#"1 == "1""#, &ctx).is_err());
    }

    #[test]
    fn builtins() {
        let ctx = EvalContext::new().with_answer(" 12 ".into());
        assert_eq!(eval_src("num(_answer_) + 1", &ctx).unwrap(), Value::Number(13.0));
        assert_eq!(eval_src(r#"len("héllo")"#, &ctx).unwrap(), Value::Number(5.0));
        assert_eq!(eval_src(r#"contains("walking", "walk")"#, &ctx).unwrap(), Value::Bool(true));
        assert!(matches!(
            eval_src(r#"num("twelve")"#, &ctx).unwrap_err().kind,
            EvalErrorKind::Conversion(_)
        ));
        assert!(eval_src("lower(1)", &ctx).is_err());
        assert!(eval_src(r#"contains(1, "a")"#, &ctx).is_err());
    }
}
