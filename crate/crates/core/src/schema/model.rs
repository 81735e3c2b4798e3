use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::rule::FetchDescriptor;

pub const SCHEMA_VERSION: &str = "1";
pub const SECONDS_PER_DAY: u32 = 86_400;

/// The complete survey: every entity collection, each keyed by opaque string ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveySchema {
    pub schema_version: String,
    #[serde(default)]
    pub topics: Vec<EmaTopic>,
    #[serde(default)]
    pub nodes: Vec<EmaQuestionNode>,
    #[serde(default)]
    pub audio_outputs: Vec<AudioOutput>,
    #[serde(default)]
    pub visual_outputs: Vec<VisualOutput>,
    #[serde(default)]
    pub answers: Vec<AnswerSpec>,
    #[serde(default)]
    pub conditions: Vec<QuestionCondition>,
    #[serde(default)]
    pub schedules: Vec<Schedule>,
}

impl Default for SurveySchema {
    fn default() -> Self {
        SurveySchema {
            schema_version: SCHEMA_VERSION.to_owned(),
            topics: Vec::new(),
            nodes: Vec::new(),
            audio_outputs: Vec::new(),
            visual_outputs: Vec::new(),
            answers: Vec::new(),
            conditions: Vec::new(),
            schedules: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmaTopic {
    pub id: String,
    pub name: String,
    pub root_question_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmaQuestionNode {
    pub id: String,
    pub topic_id: String,
    pub audio_output_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visual_output_id: Option<String>,
    pub answer_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule_id: Option<String>,
}

/// Paraphrases of one question; one is picked at random per prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AudioOutput {
    pub id: String,
    pub scripts: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidgetKind {
    Buttons,
    Slider,
    TextPanel,
    None,
}

/// Widget hints for devices with a screen. Required `properties` keys depend
/// on `widget_kind`: `labels` for buttons, numeric `min` < `max` for sliders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisualOutput {
    pub id: String,
    pub widget_kind: WidgetKind,
    #[serde(default)]
    pub properties: BTreeMap<String, serde_json::Value>,
}

impl VisualOutput {
    /// Button labels as strings, when `labels` is a list of scalars.
    pub fn labels(&self) -> Option<Vec<String>> {
        scalar_list(self.properties.get("labels")?)
    }

    /// Values emitted by each button; defaults to the labels.
    pub fn button_values(&self) -> Option<Vec<String>> {
        match self.properties.get("values") {
            Some(v) => scalar_list(v),
            None => self.labels(),
        }
    }

    pub fn number(&self, key: &str) -> Option<f64> {
        self.properties.get(key)?.as_f64()
    }
}

fn scalar_list(v: &serde_json::Value) -> Option<Vec<String>> {
    v.as_array()?
        .iter()
        .map(|item| match item {
            serde_json::Value::String(s) => Some(s.clone()),
            serde_json::Value::Number(n) => Some(n.to_string()),
            serde_json::Value::Bool(b) => Some(b.to_string()),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerKind {
    Likert,
    Numeric,
    Choice,
    FreeText,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerSpec {
    pub id: String,
    pub kind: AnswerKind,
    pub validation_rule: String,
    pub error_prompts: Vec<String>,
    pub number_of_attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synonym_map: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote_check: Option<FetchDescriptor>,
}

/// A decision-tree edge. Edges leaving the same node are tried in ascending
/// `priority`; the first whose `return_rule` yields `true` is taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionCondition {
    pub id: String,
    pub prev_ema_question_node_id: String,
    pub next_ema_question_node_id: String,
    pub priority: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_fetching_rule: Option<FetchDescriptor>,
    pub return_rule: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub id: String,
    pub daily_window_start: TimeOfDay,
    pub daily_window_end: TimeOfDay,
    pub occurrence_interval: u64,
    pub max_number_of_occurrence: u32,
}

/// Seconds since local midnight, written `HH:MM:SS`. `24:00:00` is allowed
/// so a window can run to the end of the day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeOfDay(pub u32);

impl TimeOfDay {
    pub fn hms(h: u32, m: u32, s: u32) -> TimeOfDay {
        TimeOfDay(h * 3600 + m * 60 + s)
    }

    pub fn seconds(self) -> u32 {
        self.0
    }
}

impl fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.0;
        write!(f, "{:02}:{:02}:{:02}", s / 3600, s / 60 % 60, s % 60)
    }
}

impl FromStr for TimeOfDay {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("invalid time of day {s:?}, expected HH:MM:SS");
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 || parts.iter().any(|p| p.len() != 2 || !p.bytes().all(|b| b.is_ascii_digit())) {
            return Err(bad());
        }
        let n = |p: &str| p.parse::<u32>().expect("two ascii digits");
        let (h, m, sec) = (n(parts[0]), n(parts[1]), n(parts[2]));
        if m > 59 || sec > 59 || h > 24 || (h == 24 && (m, sec) != (0, 0)) {
            return Err(bad());
        }
        Ok(TimeOfDay::hms(h, m, sec))
    }
}

impl Serialize for TimeOfDay {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TimeOfDay {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl SurveySchema {
    pub fn topic(&self, id: &str) -> Option<&EmaTopic> {
        self.topics.iter().find(|t| t.id == id)
    }

    pub fn node(&self, id: &str) -> Option<&EmaQuestionNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn audio_output(&self, id: &str) -> Option<&AudioOutput> {
        self.audio_outputs.iter().find(|a| a.id == id)
    }

    pub fn visual_output(&self, id: &str) -> Option<&VisualOutput> {
        self.visual_outputs.iter().find(|v| v.id == id)
    }

    pub fn answer(&self, id: &str) -> Option<&AnswerSpec> {
        self.answers.iter().find(|a| a.id == id)
    }

    pub fn schedule(&self, id: &str) -> Option<&Schedule> {
        self.schedules.iter().find(|s| s.id == id)
    }

    /// Answer spec of a node.
    pub fn answer_for(&self, node: &EmaQuestionNode) -> Option<&AnswerSpec> {
        self.answer(&node.answer_id)
    }

    pub fn visual_for(&self, node: &EmaQuestionNode) -> Option<&VisualOutput> {
        node.visual_output_id.as_deref().and_then(|id| self.visual_output(id))
    }

    pub fn schedule_for(&self, node: &EmaQuestionNode) -> Option<&Schedule> {
        node.schedule_id.as_deref().and_then(|id| self.schedule(id))
    }

    /// Conditions leaving `node_id`, ascending by priority (document order on ties).
    pub fn outgoing(&self, node_id: &str) -> Vec<&QuestionCondition> {
        let mut out: Vec<&QuestionCondition> = self
            .conditions
            .iter()
            .filter(|c| c.prev_ema_question_node_id == node_id)
            .collect();
        out.sort_by_key(|c| c.priority);
        out
    }
}
