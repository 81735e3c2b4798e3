use std::collections::BTreeSet;

use ema_core::flow::{
    enumerate_paths, render_prompt, select_next_node, start_at_root, start_session, submit_answer, Outcome,
    ParticipantInput, ResponseRecord, Session, SessionStart, SessionState, StartOutcome, Witness,
};
use ema_core::rule::{evaluate, parse_rule, EvalContext, FetchError, OfflineGateway, ScriptedGateway, Value};
use ema_core::scheduler::{AttemptLog, EligibilityReason, LocalInstant};
use ema_core::schema::SurveySchema;
use ema_testkit::fixtures::{branching, sedentary, weather, weather_url, LIKERT_ACCEPTED, LIKERT_REJECTED};
use ema_testkit::graph::naive_path_set;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

// 2023-11-14T12:00:00Z
const NOON: i64 = 1_699_963_200;

fn at(epoch: i64) -> LocalInstant {
    LocalInstant::from_utc(epoch, 0)
}

fn begin(schema: &SurveySchema, topic: &str, root: &str, seed: u64) -> Session {
    let start = SessionStart {
        session_id: "s1",
        topic_id: topic,
        participant_id: "p1",
        seed,
    };
    start_at_root(schema, start, root, NOON).unwrap().0
}

fn input(probe: (bool, &str), t: i64) -> ParticipantInput {
    if probe.0 {
        ParticipantInput::widget(probe.1, t)
    } else {
        ParticipantInput::utterance(probe.1, t)
    }
}

#[test]
fn likert_probe_set() {
    let schema = sedentary();
    let spec = schema.answer("ans_likert5").unwrap();
    for probe in LIKERT_ACCEPTED {
        let mut s = begin(&schema, "sedentary", "q_sitting", 1);
        let turn = submit_answer(&schema, &mut s, &input(probe, NOON + 5), at(NOON + 5), &OfflineGateway).unwrap();
        assert!(turn.record.valid, "{probe:?} rejected");
        assert!(matches!(turn.record.parsed, Some(Value::Number(n)) if (1.0..=5.0).contains(&n)));
        assert!(!matches!(turn.outcome, Outcome::Reprompt(_) | Outcome::Abandoned), "{probe:?}");
    }
    for probe in LIKERT_REJECTED {
        let mut s = begin(&schema, "sedentary", "q_sitting", 1);
        let turn = submit_answer(&schema, &mut s, &input(probe, NOON + 5), at(NOON + 5), &OfflineGateway).unwrap();
        assert!(!turn.record.valid, "{probe:?} accepted");
        assert_eq!(turn.record.parsed, None);
        let Outcome::Reprompt(p) = &turn.outcome else {
            panic!("{probe:?}: {:?}", turn.outcome)
        };
        assert_eq!(p.audio_script, spec.error_prompts[0]);
        assert!(p.is_error_reprompt);
        assert_eq!(s.attempts_remaining, spec.number_of_attempts - 1);
    }
}

#[test]
fn exhausted_attempts_abandon_and_keep_records() {
    let schema = sedentary();
    let spec = schema.answer("ans_likert5").unwrap();
    let mut s = begin(&schema, "sedentary", "q_sitting", 1);
    let mut records = vec![];
    let mut outcomes = vec![];
    for (i, text) in ["seven", "lots", "2.5"].into_iter().enumerate() {
        let t = NOON + 10 * (i as i64 + 1);
        let turn = submit_answer(&schema, &mut s, &ParticipantInput::utterance(text, t), at(t), &OfflineGateway).unwrap();
        records.push(turn.record);
        outcomes.push(turn.outcome);
    }
    let prompts: Vec<_> = outcomes.iter().filter_map(|o| o.prompt()).map(|p| p.audio_script.as_str()).collect();
    assert_eq!(prompts, [spec.error_prompts[0].as_str(), spec.error_prompts[1].as_str()]);
    assert_eq!(outcomes[2], Outcome::Abandoned);
    assert_eq!(s.state, SessionState::Abandoned);
    assert_eq!(s.current_node_id, None);
    assert_eq!(records.iter().map(|r| r.attempt_index).collect::<Vec<_>>(), [1, 2, 3]);
    assert!(records.iter().all(|r| !r.valid && r.parsed.is_none()));
    assert_eq!(records[2].raw.value, "2.5");
    let err = submit_answer(&schema, &mut s, &ParticipantInput::utterance("3", NOON + 99), at(NOON + 99), &OfflineGateway);
    assert!(err.is_err());
}

#[test]
fn error_prompt_index_clamps_to_last() {
    let mut schema = sedentary();
    let spec = schema.answers.iter_mut().find(|a| a.id == "ans_likert5").unwrap();
    spec.number_of_attempts = 6;
    let last = spec.error_prompts.last().unwrap().clone();
    let mut s = begin(&schema, "sedentary", "q_sitting", 1);
    let mut seen = vec![];
    for i in 0..5 {
        let t = NOON + i + 1;
        let turn = submit_answer(&schema, &mut s, &ParticipantInput::utterance("nine", t), at(t), &OfflineGateway).unwrap();
        seen.push(turn.outcome.prompt().unwrap().audio_script.clone());
    }
    assert_eq!(seen[2..], [last.clone(), last.clone(), last]);
}

fn replay(schema: &SurveySchema, topic: &str, nodes: &[String], answers: &[Witness]) -> Vec<String> {
    let mut s = begin(schema, topic, &nodes[0], 9);
    let mut visited = vec![nodes[0].clone()];
    for (i, w) in answers.iter().enumerate() {
        let Witness::Answer(v) = w else { panic!("symbolic witness in {nodes:?}") };
        let t = NOON + i as i64 + 1;
        let turn = submit_answer(schema, &mut s, &ParticipantInput::utterance(v.to_answer_text(), t), at(t), &OfflineGateway)
            .unwrap();
        match turn.outcome {
            Outcome::Advance(p) => visited.push(p.node_id),
            Outcome::Completed => break,
            other => panic!("{nodes:?} answer {v}: {other:?}"),
        }
    }
    assert_eq!(s.state, SessionState::Completed, "{nodes:?}");
    visited
}

#[test]
fn enumerated_paths_match_naive_enumeration_and_replay() {
    for (schema, topic) in [(sedentary(), "sedentary"), (branching(), "t")] {
        let paths = enumerate_paths(&schema, topic).unwrap();
        let got: BTreeSet<Vec<String>> = paths.iter().map(|p| p.nodes.clone()).collect();
        assert_eq!(got.len(), paths.len(), "duplicate paths");
        assert_eq!(got, naive_path_set(&schema, topic));
        for p in &paths {
            assert!(p.is_concrete());
            assert_eq!(p.answers.len(), p.nodes.len());
            assert_eq!(p.conditions.len() + 1, p.nodes.len());
            assert_eq!(replay(&schema, topic, &p.nodes, &p.answers), p.nodes);
        }
    }
}

#[test]
fn fixture_has_five_paths() {
    let paths = enumerate_paths(&sedentary(), "sedentary").unwrap();
    let mut nodes: Vec<String> = paths.iter().map(|p| p.nodes.join(" > ")).collect();
    nodes.sort();
    assert_eq!(
        nodes,
        [
            "q_day_activity",
            "q_sitting",
            "q_sitting > q_active_minutes",
            "q_sitting > q_sitting_context",
            "q_sitting > q_sitting_context > q_break",
        ]
    );
}

#[test]
fn context_dependent_edges_are_symbolic() {
    let paths = enumerate_paths(&weather(), "t").unwrap();
    assert_eq!(paths.len(), 3);
    assert!(paths.iter().all(|p| p.answers[0] == Witness::Symbolic));
}

#[test]
fn paraphrases_are_uniform_and_seeded() {
    let schema = sedentary();
    let scripts = &schema.audio_output("a_sitting").unwrap().scripts;
    assert_eq!(scripts.len(), 3);
    let draw = |seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..3000)
            .map(|_| render_prompt(&schema, "s", "q_sitting", &mut rng).audio_script)
            .collect::<Vec<_>>()
    };
    let first = draw(42);
    for script in scripts {
        let n = first.iter().filter(|s| *s == script).count();
        assert!((800..=1200).contains(&n), "{n} for {script}");
    }
    assert_eq!(first, draw(42));
    assert_ne!(first, draw(43));
}

fn run_weather(gateway: &ScriptedGateway) -> (String, usize) {
    let schema = weather();
    let mut s = begin(&schema, "t", "Q1", 3);
    let turn = submit_answer(&schema, &mut s, &ParticipantInput::utterance("4", NOON), at(NOON), gateway).unwrap();
    let Outcome::Advance(p) = turn.outcome else { panic!("{:?}", turn.outcome) };
    (p.node_id, turn.warnings.len())
}

#[test]
fn fetched_temperature_picks_branch() {
    let url = weather_url(NOON);
    let hot = ScriptedGateway::new().respond(&url, json!({"current": {"temp_c": 35}}));
    assert_eq!(run_weather(&hot), ("q_hot".into(), 0));
    assert_eq!(hot.requests(), [url.as_str()]);

    let mild = ScriptedGateway::new().respond(&url, json!({"current": {"temp_c": 25}}));
    assert_eq!(run_weather(&mild).0, "q_mild");

    // on_error null: `null > 30` is a type error (warned), then `_fetched_ == null` holds
    for _ in 0..3 {
        let down = ScriptedGateway::new().fail(&url, FetchError::Timeout);
        assert_eq!(run_weather(&down), ("q_no_data".into(), 1));
    }
    let offline = ScriptedGateway::new();
    assert_eq!(run_weather(&offline).0, "q_no_data");
}

#[test]
fn start_session_uses_schedules_and_log() {
    let schema = sedentary();
    let mut log = AttemptLog::new();
    let start = SessionStart {
        session_id: "s1",
        topic_id: "sedentary",
        participant_id: "p1",
        seed: 5,
    };
    for k in 0..2 {
        let now = at(NOON + k * 60);
        let StartOutcome::Started { session, prompt } = start_session(&schema, start, now, &mut log).unwrap() else {
            panic!("not started")
        };
        assert_eq!(session.current_node_id.as_deref(), Some("q_sitting"));
        assert_eq!(prompt.node_id, "q_sitting");
    }
    assert_eq!(log.history("p1", "q_sitting"), [NOON, NOON + 60]);
    let third = start_session(&schema, start, at(NOON + 120), &mut log).unwrap();
    assert_eq!(
        third,
        StartOutcome::NoEligibleQuestion {
            reason: EligibilityReason::OccurrenceCapReached
        }
    );
    // 23:00 local is outside both windows
    let late = start_session(&schema, start, at(NOON + 11 * 3600), &mut log).unwrap();
    assert!(matches!(late, StartOutcome::NoEligibleQuestion { reason: EligibilityReason::OutsideDailyWindow }));
}

fn transcript(seed: u64, inputs: &[&str]) -> String {
    let schema = sedentary();
    let mut s = begin(&schema, "sedentary", "q_sitting", seed);
    let mut out = serde_json::to_string(&s.last_prompt).unwrap();
    for (i, text) in inputs.iter().enumerate() {
        if !s.is_awaiting() {
            break;
        }
        let t = NOON + i as i64;
        let turn = submit_answer(&schema, &mut s, &ParticipantInput::utterance(*text, t), at(t), &OfflineGateway).unwrap();
        out.push_str(&serde_json::to_string(&turn.record).unwrap());
        out.push_str(&serde_json::to_string(&turn.outcome).unwrap());
    }
    out
}

const POOL: [&str; 14] = [
    "1", "two", "3", "four", "5", "9", "nah", "tv", "Computer.", "other", "yeah", "nope", "30", "200",
];

fn all_scripts(schema: &SurveySchema) -> BTreeSet<String> {
    let audio = schema.audio_outputs.iter().flat_map(|a| a.scripts.iter());
    let errors = schema.answers.iter().flat_map(|a| a.error_prompts.iter());
    audio.chain(errors).cloned().collect()
}

fn brute_force_choice(schema: &SurveySchema, node: &str, answer: &Value) -> Option<String> {
    let ctx = EvalContext::new().with_answer(answer.clone()).with_now(NOON);
    schema
        .conditions
        .iter()
        .filter(|c| c.prev_ema_question_node_id == node)
        .filter(|c| evaluate(&parse_rule(&c.return_rule).unwrap(), &ctx) == Ok(Value::Bool(true)))
        .min_by_key(|c| c.priority)
        .map(|c| c.id.clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn sessions_make_progress_and_stay_closed(seed in any::<u64>(), picks in prop::collection::vec(0usize..POOL.len(), 1..30)) {
        let schema = sedentary();
        let all = all_scripts(&schema);
        let bound: u32 = schema.nodes.iter().map(|n| schema.answer_for(n).unwrap().number_of_attempts).sum();
        let root = if seed % 2 == 0 { "q_sitting" } else { "q_day_activity" };
        let mut s = begin(&schema, "sedentary", root, seed);
        prop_assert!(all.contains(&s.last_prompt.as_ref().unwrap().audio_script));
        let mut records: Vec<ResponseRecord> = vec![];
        for (i, &k) in picks.iter().enumerate() {
            if !s.is_awaiting() {
                break;
            }
            let (node, left) = (s.current_node_id.clone().unwrap(), s.attempts_remaining);
            let t = NOON + i as i64;
            let turn = submit_answer(&schema, &mut s, &ParticipantInput::utterance(POOL[k], t), at(t), &OfflineGateway).unwrap();
            records.push(turn.record.clone());
            prop_assert_eq!(turn.record.valid, turn.record.parsed.is_some());
            match &turn.outcome {
                Outcome::Reprompt(p) => {
                    prop_assert_eq!(s.current_node_id.as_deref(), Some(node.as_str()));
                    prop_assert_eq!(s.attempts_remaining, left - 1);
                    prop_assert!(all.contains(&p.audio_script));
                }
                Outcome::Advance(p) => {
                    let next = s.current_node_id.clone().unwrap();
                    let chosen = brute_force_choice(&schema, &node, turn.record.parsed.as_ref().unwrap());
                    let edge = schema.outgoing(&node).into_iter().find(|c| c.next_ema_question_node_id == next);
                    prop_assert_eq!(chosen, edge.map(|c| c.id.clone()));
                    prop_assert!(all.contains(&p.audio_script));
                }
                Outcome::Completed => {
                    let chosen = brute_force_choice(&schema, &node, turn.record.parsed.as_ref().unwrap());
                    prop_assert_eq!(chosen, None);
                }
                Outcome::Abandoned => prop_assert_eq!(left, 1),
            }
        }
        prop_assert_eq!(s.turns as usize, records.len());
        prop_assert!(records.len() as u32 <= bound);
    }

    #[test]
    fn transcripts_are_reproducible(seed in any::<u64>(), picks in prop::collection::vec(0usize..POOL.len(), 1..10)) {
        let inputs: Vec<&str> = picks.iter().map(|&k| POOL[k]).collect();
        prop_assert_eq!(transcript(seed, &inputs), transcript(seed, &inputs));
    }

    #[test]
    fn selection_is_first_true_by_priority(answer in 0u32..8) {
        let schema = sedentary();
        let v = Value::Number(answer as f64);
        let ctx = EvalContext::new().with_answer(v.clone()).with_now(NOON);
        let got = select_next_node(&schema, "q_sitting", &ctx, &OfflineGateway).next.map(|(c, _)| c);
        prop_assert_eq!(got, brute_force_choice(&schema, "q_sitting", &v));
    }
}
