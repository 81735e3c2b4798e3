//! Survey schema: entity model, document loading, validation and the
//! per-topic decision-tree view.
//!
//! The document format is a single UTF-8 JSON object with one key per entity
//! collection (`topics`, `nodes`, `audio_outputs`, `visual_outputs`,
//! `answers`, `conditions`, `schedules`) plus `schema_version`. References
//! between entities are by string id.

mod diagnostic;
mod graph;
mod model;
mod validate;

pub use diagnostic::{has_errors, Code, Diagnostic, Severity};
pub use graph::{topic_graph, TopicGraph, UnknownTopic};
pub use model::*;
pub use validate::validate_schema;

/// The bundled sedentary-behavior and physical-activity survey.
pub const SEDENTARY_FIXTURE: &str = include_str!("../../fixtures/sedentary.survey.json");

fn line_col(text: &[u8], offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
    let col = before.iter().rev().take_while(|&&b| b != b'\n').count() + 1;
    (line, col)
}

/// Parses a document without semantic checks.
///
/// A malformed document yields exactly one `parse-error` diagnostic carrying
/// the line and column.
pub fn parse_document(bytes: &[u8]) -> Result<SurveySchema, Diagnostic> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let (line, col) = line_col(bytes, e.valid_up_to());
        Diagnostic::error(
            Code::ParseError,
            "document",
            format!("line {line} column {col}: invalid UTF-8"),
        )
    })?;
    serde_json::from_str(text).map_err(|e| {
        Diagnostic::error(
            Code::ParseError,
            "document",
            format!("line {} column {}: {e}", e.line(), e.column()),
        )
    })
}

/// Loads and validates a schema document.
///
/// Returns the schema only when validation finds no errors; otherwise every
/// diagnostic, warnings included.
pub fn load_schema(bytes: &[u8]) -> Result<SurveySchema, Vec<Diagnostic>> {
    let schema = parse_document(bytes).map_err(|d| vec![d])?;
    let diagnostics = validate_schema(&schema);
    if has_errors(&diagnostics) {
        Err(diagnostics)
    } else {
        Ok(schema)
    }
}

/// Canonical document bytes: two-space indented JSON, struct field order,
/// map keys sorted, trailing newline.
pub fn serialize_schema(schema: &SurveySchema) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(schema).expect("schema serialization is infallible");
    out.push(b'\n');
    out
}
