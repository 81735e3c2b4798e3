//! Data-driven engine for ecological momentary assessment (EMA) surveys on
//! voice-first devices.
//!
//! A survey lives entirely in a [`schema::SurveySchema`] document: topics,
//! question nodes, audio paraphrases, visual widgets, answer validation,
//! branching conditions and schedules. The [`flow`] module runs one
//! conversation over a loaded schema, [`scheduler`] decides when a root
//! question may be prompted, and [`rule`] evaluates the embedded expressions.

pub mod flow;
pub mod rule;
pub mod scheduler;
pub mod schema;

pub use rule::Value;

/// Seconds since the Unix epoch.
pub type Timestamp = i64;
