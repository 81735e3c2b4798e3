use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::answer::{parse_answer, ParticipantInput};
use super::render::{render_prompt, PromptPayload};
use crate::rule::{evaluate, parse_rule, run_fetch, EvalContext, FetchGateway, Value, FETCHED};
use crate::scheduler::{root_eligibility, AttemptLog, EligibilityReason, LocalInstant, MonotonicityError};
use crate::schema::{SurveySchema, UnknownTopic};
use crate::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    AwaitingAnswer,
    Completed,
    Abandoned,
}

/// State of one conversation. `current_node_id` is present exactly while
/// the session awaits an answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub participant_id: String,
    pub topic_id: String,
    pub current_node_id: Option<String>,
    pub attempts_remaining: u32,
    pub state: SessionState,
    pub rng_seed: u64,
    pub created_at: Timestamp,
    /// Inputs accepted so far; equals the number of response records written.
    pub turns: u64,
    /// Most recent prompt, so a resumed session can repeat it.
    pub last_prompt: Option<PromptPayload>,
    rng: ChaCha8Rng,
}

impl Session {
    pub fn is_awaiting(&self) -> bool {
        self.state == SessionState::AwaitingAnswer
    }
}

/// One collected answer, valid or not. `parsed` is present exactly when `valid`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub session_id: String,
    pub participant_id: String,
    pub node_id: String,
    pub raw: ParticipantInput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parsed: Option<Value>,
    pub attempt_index: u32,
    pub valid: bool,
    pub ts: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Reprompt(PromptPayload),
    Advance(PromptPayload),
    Completed,
    Abandoned,
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Reprompt(_) => "reprompt",
            Outcome::Advance(_) => "advance",
            Outcome::Completed => "completed",
            Outcome::Abandoned => "abandoned",
        }
    }

    pub fn prompt(&self) -> Option<&PromptPayload> {
        match self {
            Outcome::Reprompt(p) | Outcome::Advance(p) => Some(p),
            Outcome::Completed | Outcome::Abandoned => None,
        }
    }
}

/// A rule that errored or returned a non-boolean. Treated as false and reported.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleWarning {
    pub entity_id: String,
    pub message: String,
}

impl RuleWarning {
    fn new(entity_id: &str, message: String) -> Self {
        log::warn!("rule on `{entity_id}`: {message}");
        RuleWarning {
            entity_id: entity_id.to_owned(),
            message,
        }
    }
}

/// Result of one `submit_answer` call.
#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub outcome: Outcome,
    pub record: ResponseRecord,
    pub warnings: Vec<RuleWarning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(clippy::large_enum_variant)]
pub enum StartOutcome {
    Started { session: Session, prompt: PromptPayload },
    NoEligibleQuestion { reason: EligibilityReason },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FlowError {
    #[error(transparent)]
    UnknownTopic(#[from] UnknownTopic),
    #[error("unknown root question `{0}` for this topic")]
    UnknownRoot(String),
    #[error("session `{id}` is {state:?}, not awaiting an answer")]
    InvalidState { id: String, state: SessionState },
    #[error(transparent)]
    Monotonicity(#[from] MonotonicityError),
}

/// Parameters identifying a new session.
#[derive(Debug, Clone, Copy)]
pub struct SessionStart<'a> {
    pub session_id: &'a str,
    pub topic_id: &'a str,
    pub participant_id: &'a str,
    pub seed: u64,
}

fn attempts_of(schema: &SurveySchema, node_id: &str) -> u32 {
    schema
        .node(node_id)
        .and_then(|n| schema.answer_for(n))
        .map(|a| a.number_of_attempts)
        .expect("node and answer exist in validated schema")
}

/// Starts at the first eligible root of the topic and records the prompt.
///
/// When no root is eligible the reason reported is that of the first root.
pub fn start_session(
    schema: &SurveySchema,
    start: SessionStart<'_>,
    now: LocalInstant,
    log: &mut AttemptLog,
) -> Result<StartOutcome, FlowError> {
    let roots = root_eligibility(schema, start.topic_id, start.participant_id, now, log)?;
    let Some(root) = roots.iter().find(|(_, r)| r.eligible).map(|(id, _)| *id) else {
        let reason = roots
            .first()
            .map(|(_, r)| r.reason)
            .unwrap_or(EligibilityReason::OutsideDailyWindow);
        return Ok(StartOutcome::NoEligibleQuestion { reason });
    };
    log.record_prompt(start.participant_id, root, now.epoch)?;
    let (session, prompt) = start_at_root(schema, start, root, now.epoch)?;
    Ok(StartOutcome::Started { session, prompt })
}

/// Starts a session at a specific root without consulting schedules or the log.
pub fn start_at_root(
    schema: &SurveySchema,
    start: SessionStart<'_>,
    root_id: &str,
    created_at: Timestamp,
) -> Result<(Session, PromptPayload), FlowError> {
    let topic = schema
        .topic(start.topic_id)
        .ok_or_else(|| UnknownTopic(start.topic_id.to_owned()))?;
    if !topic.root_question_ids.iter().any(|r| r == root_id) {
        return Err(FlowError::UnknownRoot(root_id.to_owned()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(start.seed);
    let prompt = render_prompt(schema, start.session_id, root_id, &mut rng);
    let session = Session {
        id: start.session_id.to_owned(),
        participant_id: start.participant_id.to_owned(),
        topic_id: start.topic_id.to_owned(),
        current_node_id: Some(root_id.to_owned()),
        attempts_remaining: attempts_of(schema, root_id),
        state: SessionState::AwaitingAnswer,
        rng_seed: start.seed,
        created_at,
        turns: 0,
        last_prompt: Some(prompt.clone()),
        rng,
    };
    Ok((session, prompt))
}

/// The edge chosen by [`select_next_node`], if any, plus rule warnings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Selection {
    pub next: Option<(String, String)>,
    pub warnings: Vec<RuleWarning>,
}

/// Evaluates the node's outgoing conditions in ascending priority and returns
/// the first whose `return_rule` is `true`.
///
/// A condition with a fetch descriptor runs it first and binds the result to
/// `_fetched_`. Errors and non-boolean results count as not satisfied.
pub fn select_next_node(
    schema: &SurveySchema,
    node_id: &str,
    ctx: &EvalContext,
    gateway: &dyn FetchGateway,
) -> Selection {
    let mut warnings = Vec::new();
    for cond in schema.outgoing(node_id) {
        let mut local = ctx.clone();
        if let Some(fetch) = &cond.data_fetching_rule {
            local.set(FETCHED, run_fetch(fetch, ctx, gateway));
        }
        let verdict = parse_rule(&cond.return_rule)
            .map_err(|e| e.to_string())
            .and_then(|ast| evaluate(&ast, &local).map_err(|e| e.to_string()));
        match verdict {
            Ok(Value::Bool(true)) => {
                return Selection {
                    next: Some((cond.id.clone(), cond.next_ema_question_node_id.clone())),
                    warnings,
                }
            }
            Ok(Value::Bool(false)) => {}
            Ok(other) => warnings.push(RuleWarning::new(
                &cond.id,
                format!("return_rule produced {} instead of a boolean", other.type_name()),
            )),
            Err(e) => warnings.push(RuleWarning::new(&cond.id, e)),
        }
    }
    Selection { next: None, warnings }
}

/// Feeds one input to an awaiting session.
///
/// Invalid or unparseable input consumes an attempt and re-prompts with the
/// error prompt for that attempt (clamped to the last one); the final failed
/// attempt abandons the session. A valid answer is branched on via
/// [`select_next_node`]. Every call yields exactly one [`ResponseRecord`].
pub fn submit_answer(
    schema: &SurveySchema,
    session: &mut Session,
    input: &ParticipantInput,
    now: LocalInstant,
    gateway: &dyn FetchGateway,
) -> Result<Turn, FlowError> {
    let node_id = match (&session.state, &session.current_node_id) {
        (SessionState::AwaitingAnswer, Some(id)) => id.clone(),
        _ => {
            return Err(FlowError::InvalidState {
                id: session.id.clone(),
                state: session.state,
            })
        }
    };
    let node = schema.node(&node_id).expect("current node exists in pinned schema");
    let spec = schema.answer_for(node).expect("answer exists in validated schema");
    let attempt_index = spec.number_of_attempts - session.attempts_remaining + 1;
    let mut warnings = Vec::new();

    let parsed = parse_answer(spec, schema.visual_for(node), input);
    let base_ctx = EvalContext::new().with_now(now.epoch);
    let valid = parsed.as_ref().is_some_and(|answer| {
        let ctx = base_ctx.clone().with_answer(answer.clone());
        let verdict = parse_rule(&spec.validation_rule)
            .map_err(|e| e.to_string())
            .and_then(|ast| evaluate(&ast, &ctx).map_err(|e| e.to_string()));
        match verdict {
            Ok(Value::Bool(b)) => b,
            Ok(other) => {
                warnings.push(RuleWarning::new(
                    &spec.id,
                    format!("validation_rule produced {} instead of a boolean", other.type_name()),
                ));
                false
            }
            Err(e) => {
                warnings.push(RuleWarning::new(&spec.id, e));
                false
            }
        }
    });

    let record = ResponseRecord {
        session_id: session.id.clone(),
        participant_id: session.participant_id.clone(),
        node_id: node_id.clone(),
        raw: input.clone(),
        parsed: if valid { parsed.clone() } else { None },
        attempt_index,
        valid,
        ts: now.epoch,
    };
    session.turns += 1;

    if !valid {
        session.attempts_remaining -= 1;
        if session.attempts_remaining == 0 {
            finish(session, SessionState::Abandoned);
            return Ok(Turn {
                outcome: Outcome::Abandoned,
                record,
                warnings,
            });
        }
        let idx = (attempt_index as usize - 1).min(spec.error_prompts.len() - 1);
        let mut prompt = session
            .last_prompt
            .clone()
            .unwrap_or_else(|| render_prompt(schema, &session.id, &node_id, &mut session.rng));
        prompt.audio_script = spec.error_prompts[idx].clone();
        prompt.is_error_reprompt = true;
        session.last_prompt = Some(prompt.clone());
        return Ok(Turn {
            outcome: Outcome::Reprompt(prompt),
            record,
            warnings,
        });
    }

    let ctx = base_ctx.with_answer(parsed.expect("valid answers are parsed"));
    let selection = select_next_node(schema, &node_id, &ctx, gateway);
    warnings.extend(selection.warnings);
    let outcome = match selection.next {
        None => {
            finish(session, SessionState::Completed);
            Outcome::Completed
        }
        Some((_, next)) => {
            let prompt = render_prompt(schema, &session.id, &next, &mut session.rng);
            session.attempts_remaining = attempts_of(schema, &next);
            session.current_node_id = Some(next);
            session.last_prompt = Some(prompt.clone());
            Outcome::Advance(prompt)
        }
    };
    Ok(Turn {
        outcome,
        record,
        warnings,
    })
}

fn finish(session: &mut Session, state: SessionState) {
    session.state = state;
    session.current_node_id = None;
    session.attempts_remaining = 0;
    session.last_prompt = None;
}

/// Marks an awaiting session abandoned without recording an answer
/// (participant walked away).
pub fn abandon(session: &mut Session) {
    if session.is_awaiting() {
        finish(session, SessionState::Abandoned);
    }
}
