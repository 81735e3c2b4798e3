//! Turning transcribed speech or widget events into typed answers.

use serde::{Deserialize, Serialize};

use crate::rule::Value;
use crate::schema::{AnswerKind, AnswerSpec, VisualOutput};
use crate::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Utterance,
    WidgetEvent,
}

/// What the participant said (already transcribed) or tapped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantInput {
    pub kind: InputKind,
    pub value: String,
    #[serde(default)]
    pub received_at: Timestamp,
}

impl ParticipantInput {
    pub fn utterance(value: impl Into<String>, received_at: Timestamp) -> Self {
        ParticipantInput {
            kind: InputKind::Utterance,
            value: value.into(),
            received_at,
        }
    }

    pub fn widget(value: impl Into<String>, received_at: Timestamp) -> Self {
        ParticipantInput {
            kind: InputKind::WidgetEvent,
            value: value.into(),
            received_at,
        }
    }
}

const NUMBER_WORDS: [&str; 11] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
];

fn normalize(utterance: &str) -> String {
    utterance
        .trim()
        .trim_end_matches(['.', '!', '?'])
        .trim()
        .to_lowercase()
}

fn synonym<'a>(spec: &'a AnswerSpec, normalized: &str) -> Option<&'a str> {
    spec.synonym_map
        .as_ref()?
        .iter()
        .find(|(k, _)| k.to_lowercase() == normalized)
        .map(|(_, v)| v.as_str())
}

fn parse_number(text: &str, integral: bool) -> Option<Value> {
    if integral {
        text.parse::<i64>().ok().map(Value::from)
    } else {
        text.parse::<f64>()
            .ok()
            .filter(|n| n.is_finite())
            .map(Value::Number)
    }
}

fn number_word(text: &str) -> Option<Value> {
    NUMBER_WORDS
        .iter()
        .position(|w| *w == text)
        .map(|n| Value::Number(n as f64))
}

/// Parses a participant's input against an answer spec.
///
/// Likert answers are integers and numeric answers any finite number; spoken
/// forms go through synonym overrides, then the `zero`..`ten` word table,
/// then digit parsing. Choice utterances match synonym keys, button labels,
/// button values or canonical synonym values, case-insensitively. Widget
/// events skip normalization. Returns `None` when nothing matches.
pub fn parse_answer(spec: &AnswerSpec, visual: Option<&VisualOutput>, input: &ParticipantInput) -> Option<Value> {
    if input.value.trim().is_empty() {
        return None;
    }
    let widget = input.kind == InputKind::WidgetEvent;
    match spec.kind {
        AnswerKind::Likert | AnswerKind::Numeric => {
            let integral = spec.kind == AnswerKind::Likert;
            if widget {
                return parse_number(&input.value, integral);
            }
            let text = normalize(&input.value);
            if let Some(canonical) = synonym(spec, &text) {
                let canonical = canonical.trim().to_lowercase();
                return number_word(&canonical).or_else(|| parse_number(&canonical, integral));
            }
            number_word(&text).or_else(|| parse_number(&text, integral))
        }
        AnswerKind::Choice => {
            if widget {
                return Some(Value::String(input.value.clone()));
            }
            let text = normalize(&input.value);
            if let Some(canonical) = synonym(spec, &text) {
                return Some(Value::from(canonical));
            }
            if let Some(v) = visual {
                let labels = v.labels().unwrap_or_default();
                let values = v.button_values().unwrap_or_default();
                for (label, value) in labels.iter().zip(&values) {
                    if label.to_lowercase() == text || value.to_lowercase() == text {
                        return Some(Value::from(value.as_str()));
                    }
                }
            }
            spec.synonym_map
                .as_ref()
                .and_then(|m| m.values().find(|c| c.to_lowercase() == text))
                .map(|c| Value::from(c.as_str()))
        }
        AnswerKind::FreeText => Some(Value::String(input.value.clone())),
    }
}
