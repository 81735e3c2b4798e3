use std::time::{Duration, Instant};

use ema_core::rule::{evaluate, parse_rule, BinaryOp, Builtin, EvalContext, Expr, UnaryOp, Value};
use ema_testkit::exprs::{agrees, oracle_eval, random_expr, render_full, render_minimal};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const BINARY_OPS: [BinaryOp; 13] = [
    BinaryOp::Or,
    BinaryOp::And,
    BinaryOp::Eq,
    BinaryOp::Ne,
    BinaryOp::Lt,
    BinaryOp::Le,
    BinaryOp::Gt,
    BinaryOp::Ge,
    BinaryOp::Add,
    BinaryOp::Sub,
    BinaryOp::Mul,
    BinaryOp::Div,
    BinaryOp::Rem,
];

fn literal() -> impl Strategy<Value = Value> {
    prop_oneof![
        (0u32..1000).prop_map(|n| Value::Number(n as f64)),
        (0u32..400).prop_map(|n| Value::Number(n as f64 / 8.0)),
        "[a-z\"\\\\ é😀]{0,6}".prop_map(Value::String),
        any::<bool>().prop_map(Value::Bool),
        Just(Value::Null),
    ]
}

/// Any tree the grammar can produce, minus negative literals (which only
/// arise through unary minus).
fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        3 => literal().prop_map(Expr::Literal),
        1 => prop::sample::select(vec!["_answer_", "_now_", "_fetched_", "x", "y_1"])
            .prop_map(|v| Expr::Var(v.to_owned())),
    ];
    leaf.prop_recursive(6, 64, 3, |inner| {
        prop_oneof![
            (prop::sample::select(vec![UnaryOp::Not, UnaryOp::Negate]), inner.clone())
                .prop_map(|(op, e)| Expr::unary(op, e)),
            (prop::sample::select(BINARY_OPS.to_vec()), inner.clone(), inner.clone())
                .prop_map(|(op, l, r)| Expr::binary(op, l, r)),
            (
                prop::sample::select(vec![Builtin::Num, Builtin::Lower, Builtin::Len, Builtin::Contains]),
                prop::collection::vec(inner, 2)
            )
                .prop_map(|(func, mut args)| {
                    args.truncate(func.arity());
                    Expr::Call { func, args }
                }),
        ]
    })
}

fn context() -> impl Strategy<Value = EvalContext> {
    (literal(), any::<bool>(), literal()).prop_map(|(answer, with_x, x)| {
        let mut ctx = EvalContext::new().with_answer(answer).with_now(1_700_000_000);
        if with_x {
            ctx.set("x", x);
        }
        ctx
    })
}

#[test]
fn agrees_with_brute_force_evaluator() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let ctx = EvalContext::new();
    let (mut ok, mut err) = (0, 0);
    for _ in 0..10_000 {
        let g = random_expr(&mut rng, 6);
        let minimal = render_minimal(&g);
        let full = render_full(&g);
        let ast = parse_rule(&minimal).unwrap_or_else(|e| panic!("{minimal}: {e}"));
        assert_eq!(parse_rule(&full).unwrap(), ast, "{minimal} vs {full}");
        let got = evaluate(&ast, &ctx);
        let want = oracle_eval(&g);
        assert!(agrees(&got, &want), "{minimal}: engine {got:?}, oracle {want:?}");
        if want.is_ok() {
            ok += 1;
        } else {
            err += 1;
        }
    }
    // both outcomes must be well represented for the comparison to mean much
    assert!(ok > 2_000 && err > 2_000, "ok {ok} err {err}");
}

#[test]
fn free_variables_cover_calls_and_operators() {
    let ast = parse_rule(r#"contains(lower(_answer_), "a") && _now_ % 2 == x || !flag"#).unwrap();
    let vars: Vec<_> = ast.free_variables().into_iter().collect();
    assert_eq!(vars, ["_answer_", "_now_", "flag", "x"]);
    assert!(parse_rule("1 + 2").unwrap().free_variables().is_empty());
}

#[test]
fn precedence_examples() {
    let eval = |s: &str| evaluate(&parse_rule(s).unwrap(), &EvalContext::new()).unwrap();
    assert_eq!(eval("1 + 2 * 3"), Value::Number(7.0));
    assert_eq!(eval("10 - 4 - 3"), Value::Number(3.0));
    assert_eq!(eval("-2 * 3 + 1 < 0 && !false"), Value::Bool(true));
    assert_eq!(eval("true || 1 / 0 == 1"), Value::Bool(true));
    assert_eq!(eval("7 % 4 * 2"), Value::Number(6.0));
}

fn balanced_source(depth: u32, next: &mut u32) -> String {
    if depth == 0 {
        *next += 1;
        return (*next % 7).to_string();
    }
    let op = ["+", "-", "*"][depth as usize % 3];
    format!("({} {op} {})", balanced_source(depth - 1, next), balanced_source(depth - 1, next))
}

#[test]
fn ten_thousand_node_rule_is_fast() {
    let source = balanced_source(13, &mut 0);
    let ast = parse_rule(&source).unwrap();
    assert!(ast.node_count() >= 10_000, "{}", ast.node_count());
    let ctx = EvalContext::new();
    evaluate(&ast, &ctx).unwrap();
    let started = Instant::now();
    let v = evaluate(&ast, &ctx).unwrap();
    let took = started.elapsed();
    assert!(matches!(v, Value::Number(_)));
    assert!(took < Duration::from_millis(10), "{took:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn printed_rules_reparse_to_the_same_tree(e in expr()) {
        let printed = e.to_string();
        let back = parse_rule(&printed).map_err(|err| TestCaseError::fail(format!("{printed}: {err}")))?;
        prop_assert_eq!(&back, &e);
        prop_assert_eq!(back.to_string(), printed);
    }

    #[test]
    fn evaluation_is_total_and_pure(e in expr(), ctx in context()) {
        let before = ctx.clone();
        let first = evaluate(&e, &ctx);
        let second = evaluate(&e, &ctx);
        prop_assert_eq!(&ctx, &before);
        prop_assert_eq!(first, second);
    }

    #[test]
    fn parser_never_panics(s in "[-+*/%!<>=&|() 0-9a-z_\".]{0,40}") {
        let _ = parse_rule(&s);
    }
}
