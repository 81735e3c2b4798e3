use std::io::{self, BufRead, Write};

use ema_core::flow::{
    abandon, start_session, submit_answer, Outcome, ParticipantInput, PromptPayload, SessionStart, StartOutcome,
};
use ema_core::scheduler::{AttemptLog, LocalInstant};
use ema_core::schema::SurveySchema;
use ema_core::Timestamp;
use ema_service::HttpGateway;

use crate::Failure;

pub const SESSION_ID: &str = "simulation";

pub struct Options<'a> {
    pub topic: &'a str,
    pub participant: &'a str,
    pub seed: u64,
    pub now: Timestamp,
    pub utc_offset_minutes: i32,
}

fn show(out: &mut dyn Write, prompt: &PromptPayload) -> io::Result<()> {
    let tag = if prompt.is_error_reprompt { " (retry)" } else { "" };
    writeln!(out, "[{}]{tag} {}", prompt.node_id, prompt.audio_script)?;
    if let Some(doc) = &prompt.visual_document {
        writeln!(out, "    {}", doc.sketch())?;
    }
    Ok(())
}

fn io_failure(e: io::Error) -> Failure {
    Failure::Environment(e.to_string())
}

/// Runs one conversation at a frozen clock and returns its transcript as
/// JSON Lines. Running out of input abandons the session.
pub fn run(
    schema: &SurveySchema,
    opts: &Options<'_>,
    mut inputs: Box<dyn BufRead + '_>,
    out: &mut dyn Write,
) -> Result<String, Failure> {
    let now = LocalInstant::from_utc(opts.now, opts.utc_offset_minutes);
    let start = SessionStart {
        session_id: SESSION_ID,
        topic_id: opts.topic,
        participant_id: opts.participant,
        seed: opts.seed,
    };
    let started = start_session(schema, start, now, &mut AttemptLog::new())
        .map_err(|e| Failure::Domain(e.to_string()))?;
    let (mut session, prompt) = match started {
        StartOutcome::Started { session, prompt } => (session, prompt),
        StartOutcome::NoEligibleQuestion { reason } => {
            let reason = serde_json::to_value(reason).expect("reason serializes");
            writeln!(out, "no eligible question ({})", reason.as_str().unwrap_or_default()).map_err(io_failure)?;
            return Ok(String::new());
        }
    };
    show(out, &prompt).map_err(io_failure)?;

    let gateway = HttpGateway;
    let mut transcript = String::new();
    let mut line = String::new();
    while session.is_awaiting() {
        line.clear();
        if inputs.read_line(&mut line).map_err(io_failure)? == 0 {
            abandon(&mut session);
            writeln!(out, "end of input: session abandoned").map_err(io_failure)?;
            break;
        }
        let text = line.trim_end_matches(['\n', '\r']);
        let input = match text.strip_prefix('@') {
            Some(value) => ParticipantInput::widget(value, now.epoch),
            None => ParticipantInput::utterance(text, now.epoch),
        };
        writeln!(out, "> {text}").map_err(io_failure)?;
        let turn = submit_answer(schema, &mut session, &input, now, &gateway).map_err(|e| Failure::Domain(e.to_string()))?;
        for w in &turn.warnings {
            writeln!(out, "    warning {}: {}", w.entity_id, w.message).map_err(io_failure)?;
        }
        transcript.push_str(&serde_json::to_string(&turn.record).expect("record serializes"));
        transcript.push('\n');
        match &turn.outcome {
            Outcome::Reprompt(p) => show(out, p),
            Outcome::Advance(p) => writeln!(out, "    -> {}", p.node_id).and_then(|_| show(out, p)),
            Outcome::Completed => writeln!(out, "session completed"),
            Outcome::Abandoned => writeln!(out, "session abandoned"),
        }
        .map_err(io_failure)?;
    }
    Ok(transcript)
}
