//! The rule language: a small, total expression DSL for validation and
//! branching rules, plus declarative remote-data fetches.
//!
//! Rules can only read the [`EvalContext`] they are given and, through a
//! condition's [`FetchDescriptor`], an injected [`FetchGateway`]. There are no
//! loops, assignments or user-defined functions, so evaluation always
//! terminates.

mod ast;
mod eval;
mod fetch;
mod parser;
mod value;

pub use ast::{BinaryOp, Builtin, Expr, UnaryOp};
pub use eval::{evaluate, EvalContext, EvalError, EvalErrorKind, ANSWER, FETCHED, NOW, RESERVED};
pub use fetch::{
    extract, run_fetch, FetchDescriptor, FetchError, FetchGateway, OfflineGateway, ScriptedGateway,
    TemplateError,
};
pub use parser::{parse_rule, ParseError, MAX_DEPTH};
pub use value::Value;
