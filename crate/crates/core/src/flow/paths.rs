//! Exhaustive root-to-leaf path enumeration over finite answer domains.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rule::{evaluate, parse_rule, EvalContext, Value, FETCHED, NOW};
use crate::schema::{AnswerKind, SurveySchema, UnknownTopic, WidgetKind};

/// Slider domains larger than this are treated as symbolic.
const MAX_DOMAIN: usize = 1000;

/// Answer given at one node of a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Witness {
    /// A concrete answer that drives the conversation along the path.
    Answer(Value),
    /// The answer domain is open-ended or the branch depends on time or
    /// fetched data.
    Symbolic,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::Answer(v) => write!(f, "{v}"),
            Witness::Symbolic => f.write_str("*"),
        }
    }
}

/// `answers[i]` is answered at `nodes[i]`; `conditions[i]` leads from
/// `nodes[i]` to `nodes[i + 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumeratedPath {
    pub nodes: Vec<String>,
    pub conditions: Vec<String>,
    pub answers: Vec<Witness>,
}

impl EnumeratedPath {
    pub fn is_concrete(&self) -> bool {
        self.answers.iter().all(|w| matches!(w, Witness::Answer(_)))
    }
}

/// Candidate answers for a node before validation, or `None` when unbounded.
pub fn raw_domain(schema: &SurveySchema, node_id: &str) -> Option<Vec<Value>> {
    let node = schema.node(node_id)?;
    let spec = schema.answer_for(node)?;
    let visual = schema.visual_for(node);
    match spec.kind {
        AnswerKind::Likert | AnswerKind::Numeric => {
            let integral = spec.kind == AnswerKind::Likert;
            let keep = |n: f64| !integral || n.fract() == 0.0;
            match visual.map(|v| (v, v.widget_kind)) {
                Some((v, WidgetKind::Buttons)) => Some(
                    v.button_values()?
                        .iter()
                        .filter_map(|s| s.parse::<f64>().ok())
                        .filter(|n| keep(*n))
                        .map(Value::Number)
                        .collect(),
                ),
                Some((v, WidgetKind::Slider)) => {
                    let (min, max) = (v.number("min")?, v.number("max")?);
                    let step = v.number("step").unwrap_or(1.0);
                    if step <= 0.0 || (max - min) / step > MAX_DOMAIN as f64 {
                        return None;
                    }
                    let count = ((max - min) / step).floor() as usize + 1;
                    Some(
                        (0..count)
                            .map(|i| min + step * i as f64)
                            .filter(|n| keep(*n))
                            .map(Value::Number)
                            .collect(),
                    )
                }
                _ if integral => Some((0..=10).map(|n| Value::Number(n as f64)).collect()),
                _ => None,
            }
        }
        AnswerKind::Choice => {
            let mut out: Vec<Value> = Vec::new();
            let buttons = visual.and_then(|v| v.button_values()).unwrap_or_default();
            let canon = spec.synonym_map.iter().flat_map(|m| m.values().cloned());
            for v in buttons.into_iter().chain(canon) {
                let v = Value::String(v);
                if !out.contains(&v) {
                    out.push(v);
                }
            }
            Some(out)
        }
        AnswerKind::FreeText => None,
    }
}

fn rule_is_true(source: &str, ctx: &EvalContext) -> bool {
    parse_rule(source)
        .ok()
        .and_then(|ast| evaluate(&ast, ctx).ok())
        .is_some_and(|v| v == Value::Bool(true))
}

fn mentions(source: &str, names: &[&str]) -> bool {
    parse_rule(source)
        .map(|ast| ast.free_variables().iter().any(|v| names.contains(&v.as_str())))
        .unwrap_or(true)
}

/// Valid answers of a node, or `None` when they cannot be enumerated.
pub fn answer_domain(schema: &SurveySchema, node_id: &str) -> Option<Vec<Value>> {
    let spec = schema.node(node_id).and_then(|n| schema.answer_for(n))?;
    if mentions(&spec.validation_rule, &[NOW]) {
        return None;
    }
    let domain = raw_domain(schema, node_id)?;
    Some(
        domain
            .into_iter()
            .filter(|v| rule_is_true(&spec.validation_rule, &EvalContext::new().with_answer(v.clone())))
            .collect(),
    )
}

enum Step {
    Edge { cond: String, next: String, witness: Witness },
    End { witness: Witness },
}

fn steps(schema: &SurveySchema, node_id: &str) -> Vec<Step> {
    let outgoing = schema.outgoing(node_id);
    let context_bound = outgoing
        .iter()
        .any(|c| c.data_fetching_rule.is_some() || mentions(&c.return_rule, &[NOW, FETCHED]));
    let domain = if context_bound { None } else { answer_domain(schema, node_id) };

    let Some(domain) = domain else {
        let mut out: Vec<Step> = outgoing
            .iter()
            .map(|c| Step::Edge {
                cond: c.id.clone(),
                next: c.next_ema_question_node_id.clone(),
                witness: Witness::Symbolic,
            })
            .collect();
        if out.is_empty() {
            out.push(Step::End { witness: Witness::Symbolic });
        }
        return out;
    };

    // first answer (in domain order) selecting each edge, and one ending here
    let mut per_edge: Vec<Option<Value>> = vec![None; outgoing.len()];
    let mut ending: Option<Value> = None;
    for answer in domain {
        let ctx = EvalContext::new().with_answer(answer.clone());
        match outgoing.iter().position(|c| rule_is_true(&c.return_rule, &ctx)) {
            Some(i) => {
                per_edge[i].get_or_insert(answer);
            }
            None => {
                ending.get_or_insert(answer);
            }
        }
    }
    let mut out: Vec<Step> = outgoing
        .iter()
        .zip(per_edge)
        .filter_map(|(c, w)| {
            w.map(|w| Step::Edge {
                cond: c.id.clone(),
                next: c.next_ema_question_node_id.clone(),
                witness: Witness::Answer(w),
            })
        })
        .collect();
    if let Some(w) = ending {
        out.push(Step::End { witness: Witness::Answer(w) });
    } else if out.is_empty() {
        // no valid answer exists; the conversation can only be abandoned here
        out.push(Step::End { witness: Witness::Symbolic });
    }
    out
}

fn walk(schema: &SurveySchema, prefix: &mut EnumeratedPath, node_id: &str, out: &mut Vec<EnumeratedPath>) {
    prefix.nodes.push(node_id.to_owned());
    // a valid schema is acyclic; the bound only guards unvalidated input
    if prefix.nodes.len() > schema.nodes.len() {
        prefix.nodes.pop();
        return;
    }
    for step in steps(schema, node_id) {
        match step {
            Step::End { witness } => {
                let mut done = prefix.clone();
                done.answers.push(witness);
                out.push(done);
            }
            Step::Edge { cond, next, witness } => {
                prefix.answers.push(witness);
                prefix.conditions.push(cond);
                walk(schema, prefix, &next, out);
                prefix.conditions.pop();
                prefix.answers.pop();
            }
        }
    }
    prefix.nodes.pop();
}

/// Every root-to-leaf path of a topic, with a witness answer per node.
///
/// Answers that satisfy no outgoing condition end the path at that node.
/// Conditions consulting `_now_`, `_fetched_` or a fetch are not enumerated;
/// each of their edges is followed with a [`Witness::Symbolic`] answer.
pub fn enumerate_paths(schema: &SurveySchema, topic_id: &str) -> Result<Vec<EnumeratedPath>, UnknownTopic> {
    let topic = schema.topic(topic_id).ok_or_else(|| UnknownTopic(topic_id.to_owned()))?;
    let mut out = Vec::new();
    for root in &topic.root_question_ids {
        let mut prefix = EnumeratedPath {
            nodes: Vec::new(),
            conditions: Vec::new(),
            answers: Vec::new(),
        };
        walk(schema, &mut prefix, root, &mut out);
    }
    Ok(out)
}
