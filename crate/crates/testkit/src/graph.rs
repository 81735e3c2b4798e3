//! Reference, cycle and path oracles over schemas.

use std::collections::{BTreeSet, HashMap};

use ema_core::rule::{evaluate, parse_rule, EvalContext, Value};
use ema_core::schema::SurveySchema;
use serde_json::Value as Json;

/// `(owner id, field, missing target)` for every reference in a raw document
/// that names no entity of the target collection.
pub fn dangling_references(doc: &Json) -> Vec<(String, String, String)> {
    let ids = |collection: &str| -> BTreeSet<String> {
        doc[collection]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|e| e["id"].as_str().map(str::to_owned))
            .collect()
    };
    let refs: &[(&str, &str, &str)] = &[
        ("topics", "root_question_ids", "nodes"),
        ("nodes", "topic_id", "topics"),
        ("nodes", "audio_output_id", "audio_outputs"),
        ("nodes", "visual_output_id", "visual_outputs"),
        ("nodes", "answer_id", "answers"),
        ("nodes", "schedule_id", "schedules"),
        ("conditions", "prev_ema_question_node_id", "nodes"),
        ("conditions", "next_ema_question_node_id", "nodes"),
    ];
    let mut out = Vec::new();
    for (collection, field, target) in refs {
        let targets = ids(target);
        for entity in doc[*collection].as_array().into_iter().flatten() {
            let owner = entity["id"].as_str().unwrap_or_default().to_owned();
            let values: Vec<&str> = match &entity[*field] {
                Json::String(s) => vec![s.as_str()],
                Json::Array(items) => items.iter().filter_map(Json::as_str).collect(),
                _ => vec![],
            };
            for v in values {
                if !targets.contains(v) {
                    out.push((owner.clone(), field.to_string(), v.to_owned()));
                }
            }
        }
    }
    out
}

/// Whether any node can reach itself through condition edges.
pub fn has_cycle(schema: &SurveySchema) -> bool {
    let mut succ: HashMap<&str, Vec<&str>> = HashMap::new();
    for c in &schema.conditions {
        succ.entry(c.prev_ema_question_node_id.as_str())
            .or_default()
            .push(c.next_ema_question_node_id.as_str());
    }
    fn reaches<'a>(from: &'a str, target: &str, succ: &HashMap<&'a str, Vec<&'a str>>, seen: &mut BTreeSet<&'a str>) -> bool {
        for &n in succ.get(from).into_iter().flatten() {
            if n == target {
                return true;
            }
            if seen.insert(n) && reaches(n, target, succ, seen) {
                return true;
            }
        }
        false
    }
    schema
        .nodes
        .iter()
        .any(|n| reaches(&n.id, &n.id, &succ, &mut BTreeSet::new()))
}

/// Candidate answers for a node, read straight off its widget and answer spec.
fn candidates(schema: &SurveySchema, node_id: &str) -> Vec<Value> {
    let node = schema.nodes.iter().find(|n| n.id == node_id).expect("node");
    let answer = schema.answers.iter().find(|a| a.id == node.answer_id).expect("answer");
    let visual = node
        .visual_output_id
        .as_ref()
        .and_then(|id| schema.visual_outputs.iter().find(|v| &v.id == id));
    let kind = serde_json::to_value(answer.kind).unwrap();
    let props = visual.map(|v| v.properties.clone()).unwrap_or_default();
    let as_text = |j: &Json| match j {
        Json::String(s) => s.clone(),
        other => other.to_string(),
    };
    let buttons: Vec<String> = props
        .get("values")
        .or_else(|| props.get("labels"))
        .and_then(Json::as_array)
        .map(|a| a.iter().map(as_text).collect())
        .unwrap_or_default();
    match kind.as_str().unwrap() {
        "choice" => {
            let mut all: Vec<String> = buttons;
            for v in answer.synonym_map.iter().flat_map(|m| m.values()) {
                if !all.contains(v) {
                    all.push(v.clone());
                }
            }
            all.into_iter().map(Value::String).collect()
        }
        "likert" | "numeric" => {
            let integral = kind == "likert";
            let nums: Vec<f64> = if !buttons.is_empty() {
                buttons.iter().filter_map(|b| b.parse().ok()).collect()
            } else if let (Some(min), Some(max)) = (props.get("min"), props.get("max")) {
                let (min, max) = (min.as_f64().unwrap(), max.as_f64().unwrap());
                let step = props.get("step").and_then(Json::as_f64).unwrap_or(1.0);
                let mut v = Vec::new();
                let mut x = min;
                let mut i = 0.0;
                while x <= max {
                    v.push(x);
                    i += 1.0;
                    x = min + step * i;
                }
                v
            } else {
                assert!(integral, "unbounded numeric domain on {node_id}");
                (0..=10).map(f64::from).collect()
            };
            nums.into_iter()
                .filter(|n| !integral || n.fract() == 0.0)
                .map(Value::Number)
                .collect()
        }
        other => panic!("{other} answers on {node_id} have no finite domain"),
    }
}

fn holds(rule: &str, answer: &Value) -> bool {
    let ctx = EvalContext::new().with_answer(answer.clone()).with_now(0);
    matches!(evaluate(&parse_rule(rule).unwrap(), &ctx), Ok(Value::Bool(true)))
}

/// Every node sequence a conversation can follow, by trying every answer at
/// every node. Panics on open-ended answer domains.
pub fn naive_path_set(schema: &SurveySchema, topic_id: &str) -> BTreeSet<Vec<String>> {
    fn go(schema: &SurveySchema, node: &str, prefix: &mut Vec<String>, out: &mut BTreeSet<Vec<String>>) {
        prefix.push(node.to_owned());
        let answer = {
            let n = schema.nodes.iter().find(|n| n.id == node).unwrap();
            schema.answers.iter().find(|a| a.id == n.answer_id).unwrap()
        };
        let outgoing: Vec<_> = schema
            .conditions
            .iter()
            .filter(|c| c.prev_ema_question_node_id == node)
            .collect();
        for a in candidates(schema, node) {
            if !holds(&answer.validation_rule, &a) {
                continue;
            }
            let chosen = outgoing
                .iter()
                .filter(|c| holds(&c.return_rule, &a))
                .min_by_key(|c| c.priority);
            match chosen {
                None => {
                    out.insert(prefix.clone());
                }
                Some(c) => go(schema, &c.next_ema_question_node_id, prefix, out),
            }
        }
        prefix.pop();
    }
    let topic = schema.topics.iter().find(|t| t.id == topic_id).expect("topic");
    let mut out = BTreeSet::new();
    for root in &topic.root_question_ids {
        go(schema, root, &mut Vec::new(), &mut out);
    }
    out
}
