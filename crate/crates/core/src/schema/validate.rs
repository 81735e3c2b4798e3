//! Referential-integrity and graph-shape checks over a parsed schema.

use std::collections::{BTreeSet, HashMap, HashSet};

use super::diagnostic::{Code, Diagnostic};
use super::model::*;
use crate::rule::{parse_rule, FetchDescriptor, ANSWER, FETCHED, NOW};

struct Ids<'a> {
    topics: HashSet<&'a str>,
    nodes: HashSet<&'a str>,
    audio: HashSet<&'a str>,
    visual: HashSet<&'a str>,
    answers: HashSet<&'a str>,
    schedules: HashSet<&'a str>,
}

/// Collects ids of one collection, reporting repeats.
fn unique_ids<'a, T>(
    items: &'a [T],
    id: impl Fn(&'a T) -> &'a str,
    what: &str,
    out: &mut Vec<Diagnostic>,
) -> HashSet<&'a str> {
    let mut seen = HashSet::new();
    for item in items {
        let id = id(item);
        if !seen.insert(id) {
            out.push(Diagnostic::error(Code::DuplicateId, id, format!("{what} id `{id}` is defined more than once")));
        }
    }
    seen
}

fn check_ref(set: &HashSet<&str>, target: &str, owner: &str, field: &str, out: &mut Vec<Diagnostic>) -> bool {
    if set.contains(target) {
        true
    } else {
        out.push(Diagnostic::error(
            Code::DanglingRef,
            owner,
            format!("{field} `{target}` does not exist"),
        ));
        false
    }
}

fn check_rule(source: &str, allowed: &[&str], owner: &str, field: &str, out: &mut Vec<Diagnostic>) {
    match parse_rule(source) {
        Ok(ast) => {
            for var in ast.free_variables() {
                if !allowed.contains(&var.as_str()) {
                    out.push(Diagnostic::error(
                        Code::UnknownVariable,
                        owner,
                        format!("{field} uses `{var}`, which is never bound here (available: {})", allowed.join(", ")),
                    ));
                }
            }
        }
        Err(e) => out.push(Diagnostic::error(Code::RuleParseError, owner, format!("{field}: {e}"))),
    }
}

fn check_fetch(fetch: &FetchDescriptor, owner: &str, out: &mut Vec<Diagnostic>) {
    if fetch.method != "GET" {
        out.push(Diagnostic::error(
            Code::BadFetch,
            owner,
            format!("fetch method `{}` is not supported, only GET", fetch.method),
        ));
    }
    if fetch.timeout_s == 0 {
        out.push(Diagnostic::error(Code::BadFetch, owner, "fetch timeout_s must be positive"));
    }
    match fetch.placeholders() {
        Ok(names) => {
            for name in names {
                if name != ANSWER && name != NOW {
                    out.push(Diagnostic::error(
                        Code::UnknownVariable,
                        owner,
                        format!("url_template placeholder `{name}` is never bound (available: {ANSWER}, {NOW})"),
                    ));
                }
            }
        }
        Err(e) => out.push(Diagnostic::error(Code::BadFetch, owner, format!("url_template: {e}"))),
    }
}

fn check_visual(v: &VisualOutput, out: &mut Vec<Diagnostic>) {
    for (key, value) in &v.properties {
        let scalar = |x: &serde_json::Value| !x.is_array() && !x.is_object();
        let ok = match value {
            serde_json::Value::Array(items) => items.iter().all(scalar),
            other => scalar(other),
        };
        if !ok {
            out.push(Diagnostic::error(
                Code::BadProperty,
                &v.id,
                format!("property `{key}` must be a scalar or a list of scalars"),
            ));
        }
    }
    match v.widget_kind {
        WidgetKind::Buttons => match v.labels() {
            Some(labels) if !labels.is_empty() => {
                if let Some(values) = v.button_values() {
                    if values.len() != labels.len() {
                        out.push(Diagnostic::error(
                            Code::BadWidget,
                            &v.id,
                            format!("buttons have {} labels but {} values", labels.len(), values.len()),
                        ));
                    }
                } else {
                    out.push(Diagnostic::error(Code::BadWidget, &v.id, "`values` must be a list of scalars"));
                }
            }
            _ => out.push(Diagnostic::error(
                Code::BadWidget,
                &v.id,
                "buttons widget requires a non-empty `labels` list",
            )),
        },
        WidgetKind::Slider => {
            match (v.number("min"), v.number("max")) {
                (Some(min), Some(max)) if min < max => {}
                (Some(min), Some(max)) => out.push(Diagnostic::error(
                    Code::BadWidget,
                    &v.id,
                    format!("slider min ({min}) must be less than max ({max})"),
                )),
                _ => out.push(Diagnostic::error(
                    Code::BadWidget,
                    &v.id,
                    "slider widget requires numeric `min` and `max`",
                )),
            }
            if let Some(step) = v.properties.get("step") {
                if !step.as_f64().is_some_and(|s| s > 0.0) {
                    out.push(Diagnostic::error(Code::BadWidget, &v.id, "slider `step` must be a positive number"));
                }
            }
        }
        WidgetKind::TextPanel | WidgetKind::None => {}
    }
}

/// Checks every schema invariant and reports all violations, errors first by
/// collection in document order, then graph-shape findings.
pub fn validate_schema(schema: &SurveySchema) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if schema.schema_version != SCHEMA_VERSION {
        out.push(Diagnostic::error(
            Code::UnsupportedVersion,
            "schema_version",
            format!("schema_version `{}` is not supported (expected `{SCHEMA_VERSION}`)", schema.schema_version),
        ));
    }

    let ids = Ids {
        topics: unique_ids(&schema.topics, |t| t.id.as_str(), "topic", &mut out),
        nodes: unique_ids(&schema.nodes, |n| n.id.as_str(), "node", &mut out),
        audio: unique_ids(&schema.audio_outputs, |a| a.id.as_str(), "audio output", &mut out),
        visual: unique_ids(&schema.visual_outputs, |v| v.id.as_str(), "visual output", &mut out),
        answers: unique_ids(&schema.answers, |a| a.id.as_str(), "answer", &mut out),
        schedules: unique_ids(&schema.schedules, |s| s.id.as_str(), "schedule", &mut out),
    };
    unique_ids(&schema.conditions, |c| c.id.as_str(), "condition", &mut out);

    let node_topic: HashMap<&str, &str> = schema
        .nodes
        .iter()
        .map(|n| (n.id.as_str(), n.topic_id.as_str()))
        .collect();

    let mut roots: HashSet<&str> = HashSet::new();
    for topic in &schema.topics {
        if topic.root_question_ids.is_empty() {
            out.push(Diagnostic::error(Code::EmptyRoots, &topic.id, "topic has no root questions"));
        }
        for root in &topic.root_question_ids {
            roots.insert(root);
            if check_ref(&ids.nodes, root, &topic.id, "root question", &mut out) {
                let owner = node_topic[root.as_str()];
                if owner != topic.id {
                    out.push(Diagnostic::error(
                        Code::TopicMismatch,
                        &topic.id,
                        format!("root question `{root}` belongs to topic `{owner}`"),
                    ));
                }
            }
        }
    }

    for node in &schema.nodes {
        check_ref(&ids.topics, &node.topic_id, &node.id, "topic", &mut out);
        check_ref(&ids.audio, &node.audio_output_id, &node.id, "audio output", &mut out);
        if let Some(v) = &node.visual_output_id {
            check_ref(&ids.visual, v, &node.id, "visual output", &mut out);
        }
        let answer_ok = check_ref(&ids.answers, &node.answer_id, &node.id, "answer", &mut out);
        if let Some(s) = &node.schedule_id {
            if check_ref(&ids.schedules, s, &node.id, "schedule", &mut out) && !roots.contains(node.id.as_str()) {
                out.push(Diagnostic::warning(
                    Code::NonRootSchedule,
                    &node.id,
                    format!("schedule `{s}` is only consulted for root questions"),
                ));
            }
        }
        if answer_ok {
            let answer = schema.answer(&node.answer_id).expect("checked above");
            let has_synonyms = answer.synonym_map.as_ref().is_some_and(|m| !m.is_empty());
            let has_labels = schema
                .visual_for(node)
                .and_then(VisualOutput::labels)
                .is_some_and(|l| !l.is_empty());
            if answer.kind == AnswerKind::Choice && !has_synonyms && !has_labels {
                out.push(Diagnostic::error(
                    Code::ChoiceWithoutOptions,
                    &node.id,
                    format!("choice answer `{}` needs a synonym_map or a buttons widget with labels", answer.id),
                ));
            }
        }
    }

    for audio in &schema.audio_outputs {
        if audio.scripts.is_empty() {
            out.push(Diagnostic::error(Code::EmptyScripts, &audio.id, "audio output has no scripts"));
        } else if audio.scripts.iter().any(|s| s.trim().is_empty()) {
            out.push(Diagnostic::error(Code::EmptyScripts, &audio.id, "audio output has an empty script"));
        }
    }

    for visual in &schema.visual_outputs {
        check_visual(visual, &mut out);
    }

    for answer in &schema.answers {
        if answer.error_prompts.is_empty() || answer.error_prompts.iter().any(|p| p.trim().is_empty()) {
            out.push(Diagnostic::error(
                Code::EmptyErrorPrompts,
                &answer.id,
                "error_prompts must be a non-empty list of non-empty strings",
            ));
        }
        if answer.number_of_attempts == 0 {
            out.push(Diagnostic::error(Code::BadAttempts, &answer.id, "number_of_attempts must be at least 1"));
        }
        check_rule(&answer.validation_rule, &[ANSWER, NOW], &answer.id, "validation_rule", &mut out);
        if answer.remote_check.is_some() {
            out.push(Diagnostic::warning(
                Code::RemoteCheckUnsupported,
                &answer.id,
                "remote_check is carried but not evaluated",
            ));
        }
    }

    let mut priorities: HashMap<(&str, i64), &str> = HashMap::new();
    for cond in &schema.conditions {
        let prev = cond.prev_ema_question_node_id.as_str();
        let next = cond.next_ema_question_node_id.as_str();
        let prev_ok = check_ref(&ids.nodes, prev, &cond.id, "previous node", &mut out);
        let next_ok = check_ref(&ids.nodes, next, &cond.id, "next node", &mut out);
        if prev == next {
            out.push(Diagnostic::error(Code::SelfLoop, &cond.id, format!("condition loops on `{prev}`")));
        }
        if prev_ok && next_ok && node_topic[prev] != node_topic[next] {
            out.push(Diagnostic::error(
                Code::TopicMismatch,
                &cond.id,
                format!("condition joins topics `{}` and `{}`", node_topic[prev], node_topic[next]),
            ));
        }
        if let Some(first) = priorities.insert((prev, cond.priority), &cond.id) {
            priorities.insert((prev, cond.priority), first);
            out.push(Diagnostic::error(
                Code::DuplicatePriority,
                &cond.id,
                format!("priority {} on `{prev}` is already used by `{first}`", cond.priority),
            ));
        }
        let mut allowed = vec![ANSWER, NOW];
        if let Some(fetch) = &cond.data_fetching_rule {
            check_fetch(fetch, &cond.id, &mut out);
            allowed.push(FETCHED);
        }
        check_rule(&cond.return_rule, &allowed, &cond.id, "return_rule", &mut out);
    }

    for s in &schema.schedules {
        if s.daily_window_start >= s.daily_window_end {
            out.push(Diagnostic::error(
                Code::InvertedWindow,
                &s.id,
                format!("daily window {} - {} is empty or inverted", s.daily_window_start, s.daily_window_end),
            ));
        }
        if s.occurrence_interval == 0 {
            out.push(Diagnostic::error(Code::BadSchedule, &s.id, "occurrence_interval must be positive"));
        }
        if s.max_number_of_occurrence == 0 {
            out.push(Diagnostic::error(Code::BadSchedule, &s.id, "max_number_of_occurrence must be at least 1"));
        }
    }

    check_graph(schema, &ids.nodes, &mut out);
    out
}

/// Cycle detection over all condition edges, then reachability from roots.
fn check_graph(schema: &SurveySchema, nodes: &HashSet<&str>, out: &mut Vec<Diagnostic>) {
    let mut adj: HashMap<&str, Vec<&str>> = HashMap::new();
    for c in &schema.conditions {
        let (p, n) = (c.prev_ema_question_node_id.as_str(), c.next_ema_question_node_id.as_str());
        if p != n && nodes.contains(p) && nodes.contains(n) {
            adj.entry(p).or_default().push(n);
        }
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Fresh,
        Open,
        Done,
    }
    let mut mark: HashMap<&str, Mark> = schema.nodes.iter().map(|n| (n.id.as_str(), Mark::Fresh)).collect();
    let mut reported: HashSet<BTreeSet<&str>> = HashSet::new();
    for start in &schema.nodes {
        if mark[start.id.as_str()] != Mark::Fresh {
            continue;
        }
        // explicit stack of (node, next child index)
        let mut stack: Vec<(&str, usize)> = vec![(start.id.as_str(), 0)];
        mark.insert(start.id.as_str(), Mark::Open);
        while let Some(&mut (node, ref mut child)) = stack.last_mut() {
            let children = adj.get(node).map(Vec::as_slice).unwrap_or(&[]);
            if *child == children.len() {
                mark.insert(node, Mark::Done);
                stack.pop();
                continue;
            }
            let next = children[*child];
            *child += 1;
            match mark[next] {
                Mark::Fresh => {
                    mark.insert(next, Mark::Open);
                    stack.push((next, 0));
                }
                Mark::Open => {
                    let from = stack.iter().position(|(n, _)| *n == next).expect("open node is on stack");
                    let mut cycle: Vec<&str> = stack[from..].iter().map(|(n, _)| *n).collect();
                    if reported.insert(cycle.iter().copied().collect()) {
                        cycle.push(next);
                        out.push(Diagnostic::error(
                            Code::CycleDetected,
                            next,
                            format!("cycle {}", cycle.join(" -> ")),
                        ));
                    }
                }
                Mark::Done => {}
            }
        }
    }

    let mut reached: HashSet<&str> = HashSet::new();
    let mut frontier: Vec<&str> = schema
        .topics
        .iter()
        .flat_map(|t| t.root_question_ids.iter().map(String::as_str))
        .filter(|r| nodes.contains(r))
        .collect();
    while let Some(n) = frontier.pop() {
        if reached.insert(n) {
            frontier.extend(adj.get(n).into_iter().flatten().copied());
        }
    }
    for node in &schema.nodes {
        if !reached.contains(node.id.as_str()) {
            out.push(Diagnostic::warning(
                Code::UnreachableNode,
                &node.id,
                "node is not reachable from any root question",
            ));
        }
    }
}
