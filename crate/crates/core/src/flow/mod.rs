//! Conversation flow: one session walks a topic's decision tree, prompting,
//! validating answers with bounded retries, and branching on conditions.

mod answer;
mod engine;
mod paths;
mod render;

pub use answer::{parse_answer, InputKind, ParticipantInput};
pub use engine::{
    abandon, select_next_node, start_at_root, start_session, submit_answer, FlowError, Outcome, ResponseRecord,
    RuleWarning, Selection, Session, SessionStart, SessionState, StartOutcome, Turn,
};
pub use paths::{answer_domain, enumerate_paths, raw_domain, EnumeratedPath, Witness};
pub use render::{render_prompt, ButtonEntry, PromptPayload, RenderDescriptor};
