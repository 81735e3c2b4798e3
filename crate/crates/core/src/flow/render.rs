use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::schema::{SurveySchema, VisualOutput, WidgetKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ButtonEntry {
    pub label: String,
    pub value: String,
}

/// Vendor-neutral description of what a screen device should draw.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RenderDescriptor {
    Buttons {
        title: String,
        buttons: Vec<ButtonEntry>,
    },
    Slider {
        min: serde_json::Number,
        max: serde_json::Number,
        step: serde_json::Number,
    },
    TextPanel {
        text: String,
    },
}

impl RenderDescriptor {
    /// Builds the descriptor for a visual output; `none` widgets draw nothing.
    pub fn build(visual: &VisualOutput, audio_script: &str) -> Option<RenderDescriptor> {
        let number = |key: &str| match visual.properties.get(key) {
            Some(serde_json::Value::Number(n)) => Some(n.clone()),
            _ => None,
        };
        match visual.widget_kind {
            WidgetKind::Buttons => {
                let labels = visual.labels()?;
                let values = visual.button_values()?;
                Some(RenderDescriptor::Buttons {
                    title: audio_script.to_owned(),
                    buttons: labels
                        .into_iter()
                        .zip(values)
                        .map(|(label, value)| ButtonEntry { label, value })
                        .collect(),
                })
            }
            WidgetKind::Slider => Some(RenderDescriptor::Slider {
                min: number("min")?,
                max: number("max")?,
                step: number("step").unwrap_or_else(|| 1.into()),
            }),
            WidgetKind::TextPanel => Some(RenderDescriptor::TextPanel {
                text: visual
                    .properties
                    .get("text")
                    .and_then(|t| t.as_str())
                    .unwrap_or(audio_script)
                    .to_owned(),
            }),
            WidgetKind::None => None,
        }
    }

    /// Plain-text sketch for terminals: `[1] [2] [3]`, `<0 .. 120 step 5>`.
    pub fn sketch(&self) -> String {
        match self {
            RenderDescriptor::Buttons { buttons, .. } => buttons
                .iter()
                .map(|b| format!("[{}]", b.label))
                .collect::<Vec<_>>()
                .join(" "),
            RenderDescriptor::Slider { min, max, step } => format!("<{min} .. {max} step {step}>"),
            RenderDescriptor::TextPanel { text } => format!("| {text} |"),
        }
    }
}

/// One turn of output: the words to speak and, for screen devices, what to draw.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPayload {
    pub session_id: String,
    pub node_id: String,
    pub audio_script: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visual_document: Option<RenderDescriptor>,
    pub is_error_reprompt: bool,
}

/// Renders a node's question with a uniformly drawn paraphrase.
///
/// Panics if `node_id` or its audio output is missing; callers pass nodes of
/// a validated schema.
pub fn render_prompt<R: Rng + ?Sized>(schema: &SurveySchema, session_id: &str, node_id: &str, rng: &mut R) -> PromptPayload {
    let node = schema.node(node_id).expect("node exists in validated schema");
    let audio = schema
        .audio_output(&node.audio_output_id)
        .expect("audio output exists in validated schema");
    let audio_script = audio.scripts[rng.random_range(0..audio.scripts.len())].clone();
    let visual_document = schema
        .visual_for(node)
        .and_then(|v| RenderDescriptor::build(v, &audio_script));
    PromptPayload {
        session_id: session_id.to_owned(),
        node_id: node_id.to_owned(),
        audio_script,
        visual_document,
        is_error_reprompt: false,
    }
}
