//! Random integer-leaf expressions with a brute-force evaluator.

use ema_core::rule::Value;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

const OPS: [Op; 13] = [
    Op::Or,
    Op::And,
    Op::Eq,
    Op::Ne,
    Op::Lt,
    Op::Le,
    Op::Gt,
    Op::Ge,
    Op::Add,
    Op::Sub,
    Op::Mul,
    Op::Div,
    Op::Rem,
];

impl Op {
    fn text(self) -> &'static str {
        match self {
            Op::Or => "||",
            Op::And => "&&",
            Op::Eq => "==",
            Op::Ne => "!=",
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Ge => ">=",
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Div => "/",
            Op::Rem => "%",
        }
    }

    fn level(self) -> u8 {
        match self {
            Op::Or => 1,
            Op::And => 2,
            Op::Eq | Op::Ne | Op::Lt | Op::Le | Op::Gt | Op::Ge => 3,
            Op::Add | Op::Sub => 4,
            Op::Mul | Op::Div | Op::Rem => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gen {
    Int(i64),
    Neg(Box<Gen>),
    Not(Box<Gen>),
    Bin(Op, Box<Gen>, Box<Gen>),
}

/// Random tree of depth at most `max_depth` (a lone leaf has depth 1).
pub fn random_expr<R: Rng>(rng: &mut R, max_depth: u32) -> Gen {
    if max_depth <= 1 || rng.random_bool(0.25) {
        return Gen::Int(rng.random_range(0..10));
    }
    match rng.random_range(0..10) {
        0 => Gen::Neg(Box::new(random_expr(rng, max_depth - 1))),
        1 => Gen::Not(Box::new(random_expr(rng, max_depth - 1))),
        _ => {
            let op = OPS[rng.random_range(0..OPS.len())];
            Gen::Bin(
                op,
                Box::new(random_expr(rng, max_depth - 1)),
                Box::new(random_expr(rng, max_depth - 1)),
            )
        }
    }
}

fn level(g: &Gen) -> u8 {
    match g {
        Gen::Int(_) => 7,
        Gen::Neg(_) | Gen::Not(_) => 6,
        Gen::Bin(op, _, _) => op.level(),
    }
}

/// Source text with only the parentheses precedence requires.
pub fn render_minimal(g: &Gen) -> String {
    match g {
        Gen::Int(n) => n.to_string(),
        Gen::Neg(x) | Gen::Not(x) => {
            let sym = if matches!(g, Gen::Neg(_)) { "-" } else { "!" };
            if level(x) < 6 {
                format!("{sym}({})", render_minimal(x))
            } else {
                format!("{sym}{}", render_minimal(x))
            }
        }
        Gen::Bin(op, l, r) => {
            let p = op.level();
            let left_parens = level(l) < p || (p == 3 && level(l) == 3);
            let right_parens = level(r) <= p;
            let wrap = |s: String, yes: bool| if yes { format!("({s})") } else { s };
            format!(
                "{} {} {}",
                wrap(render_minimal(l), left_parens),
                op.text(),
                wrap(render_minimal(r), right_parens)
            )
        }
    }
}

/// Source text with every operator application parenthesized.
pub fn render_full(g: &Gen) -> String {
    match g {
        Gen::Int(n) => n.to_string(),
        Gen::Neg(x) => format!("(-{})", render_full(x)),
        Gen::Not(x) => format!("(!{})", render_full(x)),
        Gen::Bin(op, l, r) => format!("({} {} {})", render_full(l), op.text(), render_full(r)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Out {
    Num(f64),
    Bool(bool),
}

/// Brute-force evaluation straight off the generated tree.
///
/// `Err(())` for any type error or division/modulo by zero. `&&`/`||`
/// short-circuit; equality needs equal types; ordering needs numbers.
#[allow(clippy::result_unit_err)]
pub fn oracle_eval(g: &Gen) -> Result<Out, ()> {
    use Out::*;
    Ok(match g {
        Gen::Int(n) => Num(*n as f64),
        Gen::Neg(x) => match oracle_eval(x)? {
            Num(n) => Num(-n),
            Bool(_) => return Err(()),
        },
        Gen::Not(x) => match oracle_eval(x)? {
            Bool(b) => Bool(!b),
            Num(_) => return Err(()),
        },
        Gen::Bin(Op::And, l, r) => match oracle_eval(l)? {
            Bool(false) => Bool(false),
            Bool(true) => match oracle_eval(r)? {
                Bool(b) => Bool(b),
                Num(_) => return Err(()),
            },
            Num(_) => return Err(()),
        },
        Gen::Bin(Op::Or, l, r) => match oracle_eval(l)? {
            Bool(true) => Bool(true),
            Bool(false) => match oracle_eval(r)? {
                Bool(b) => Bool(b),
                Num(_) => return Err(()),
            },
            Num(_) => return Err(()),
        },
        Gen::Bin(op, l, r) => {
            let (a, b) = (oracle_eval(l)?, oracle_eval(r)?);
            match (op, a, b) {
                (Op::Eq, Num(x), Num(y)) => Bool(x == y),
                (Op::Eq, Bool(x), Bool(y)) => Bool(x == y),
                (Op::Ne, Num(x), Num(y)) => Bool(x != y),
                (Op::Ne, Bool(x), Bool(y)) => Bool(x != y),
                (Op::Lt, Num(x), Num(y)) => Bool(x < y),
                (Op::Le, Num(x), Num(y)) => Bool(x <= y),
                (Op::Gt, Num(x), Num(y)) => Bool(x > y),
                (Op::Ge, Num(x), Num(y)) => Bool(x >= y),
                (Op::Add, Num(x), Num(y)) => Num(x + y),
                (Op::Sub, Num(x), Num(y)) => Num(x - y),
                (Op::Mul, Num(x), Num(y)) => Num(x * y),
                (Op::Div | Op::Rem, Num(_), Num(0.0)) => return Err(()),
                (Op::Div, Num(x), Num(y)) => Num(x / y),
                (Op::Rem, Num(x), Num(y)) => Num(x % y),
                _ => return Err(()),
            }
        }
    })
}

/// Whether an engine result agrees with the oracle's.
pub fn agrees<E>(engine: &Result<Value, E>, oracle: &Result<Out, ()>) -> bool {
    match (engine, oracle) {
        (Ok(Value::Number(a)), Ok(Out::Num(b))) => a == b || (a.is_nan() && b.is_nan()),
        (Ok(Value::Bool(a)), Ok(Out::Bool(b))) => a == b,
        (Err(_), Err(())) => true,
        _ => false,
    }
}
