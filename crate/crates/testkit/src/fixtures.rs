//! Hand-built and randomly generated schemas.

use ema_core::schema::SurveySchema;
use rand::Rng;
use serde_json::{json, Value as Json};

/// The sedentary-behavior fixture, as a raw JSON value.
pub fn sedentary_json() -> Json {
    serde_json::from_str(ema_core::schema::SEDENTARY_FIXTURE).unwrap()
}

pub fn sedentary() -> SurveySchema {
    serde_json::from_value(sedentary_json()).unwrap()
}

fn likert_parts() -> (Json, Json) {
    (
        json!({
            "id": "v_likert", "widget_kind": "buttons",
            "properties": {"labels": ["1", "2", "3", "4", "5"], "title": "How much?"}
        }),
        json!({
            "id": "ans_likert", "kind": "likert",
            "validation_rule": "_answer_ >= 1 && _answer_ <= 5",
            "error_prompts": ["Please say a number from one to five.", "One to five, please."],
            "number_of_attempts": 3
        }),
    )
}

fn plain_node(id: &str, topic: &str) -> Json {
    json!({
        "id": id, "topic_id": topic, "audio_output_id": format!("a_{id}"),
        "visual_output_id": "v_likert", "answer_id": "ans_likert"
    })
}

fn audio(id: &str, scripts: &[&str]) -> Json {
    json!({"id": format!("a_{id}"), "scripts": scripts})
}

/// Three-question topic: Q1 branches to Q2 when the answer is 1, otherwise
/// falls through a `true` condition to Q3.
pub fn branching_json() -> Json {
    let (visual, answer) = likert_parts();
    json!({
        "schema_version": "1",
        "topics": [{"id": "t", "name": "Branching", "root_question_ids": ["Q1"]}],
        "nodes": [plain_node("Q1", "t"), plain_node("Q2", "t"), plain_node("Q3", "t")],
        "audio_outputs": [
            audio("Q1", &["How stressed are you?"]),
            audio("Q2", &["What helped you relax?"]),
            audio("Q3", &["What is stressing you?"])
        ],
        "visual_outputs": [visual],
        "answers": [answer],
        "conditions": [
            {"id": "C1", "prev_ema_question_node_id": "Q1", "next_ema_question_node_id": "Q2",
             "priority": 0, "return_rule": "_answer_ == 1"},
            {"id": "C2", "prev_ema_question_node_id": "Q1", "next_ema_question_node_id": "Q3",
             "priority": 1, "return_rule": "true"}
        ],
        "schedules": []
    })
}

pub fn branching() -> SurveySchema {
    serde_json::from_value(branching_json()).unwrap()
}

pub const WEATHER_URL_PREFIX: &str = "https://weather.example/v1/current?at=";

/// URL the weather fetch resolves to at `now`.
pub fn weather_url(now: i64) -> String {
    format!("{WEATHER_URL_PREFIX}{now}")
}

/// Q1 branches on a fetched temperature: above 30 goes to `q_hot`, a failed
/// fetch (on_error `null`) to `q_no_data`, anything else to `q_mild`.
pub fn weather_json() -> Json {
    let (visual, answer) = likert_parts();
    let fetch = json!({
        "method": "GET",
        "url_template": format!("{WEATHER_URL_PREFIX}{{_now_}}"),
        "extract_path": "current.temp_c",
        "timeout_s": 2,
        "on_error": null
    });
    json!({
        "schema_version": "1",
        "topics": [{"id": "t", "name": "Weather", "root_question_ids": ["Q1"]}],
        "nodes": [
            plain_node("Q1", "t"), plain_node("q_hot", "t"),
            plain_node("q_no_data", "t"), plain_node("q_mild", "t")
        ],
        "audio_outputs": [
            audio("Q1", &["How energetic do you feel?"]),
            audio("q_hot", &["It is hot out. Did you drink water?"]),
            audio("q_no_data", &["Did you spend time outside?"]),
            audio("q_mild", &["Did you go for a walk?"])
        ],
        "visual_outputs": [visual],
        "answers": [answer],
        "conditions": [
            {"id": "c_hot", "prev_ema_question_node_id": "Q1", "next_ema_question_node_id": "q_hot",
             "priority": 0, "data_fetching_rule": fetch, "return_rule": "_fetched_ > 30"},
            {"id": "c_no_data", "prev_ema_question_node_id": "Q1", "next_ema_question_node_id": "q_no_data",
             "priority": 1, "data_fetching_rule": fetch, "return_rule": "_fetched_ == null"},
            {"id": "c_mild", "prev_ema_question_node_id": "Q1", "next_ema_question_node_id": "q_mild",
             "priority": 2, "return_rule": "true"}
        ],
        "schedules": []
    })
}

pub fn weather() -> SurveySchema {
    serde_json::from_value(weather_json()).unwrap()
}

fn pick<'a, R: Rng>(rng: &mut R, items: &[&'a str]) -> &'a str {
    items[rng.random_range(0..items.len())]
}

fn text<R: Rng>(rng: &mut R) -> String {
    const WORDS: &[&str] = &[
        "how", "are", "you", "feeling", "héllo", "\"quoted\"", "tab\there", "naïve", "😀", "back\\slash",
        "line\nbreak", "sitting", "today",
    ];
    let n = rng.random_range(1..6);
    (0..n).map(|_| pick(rng, WORDS)).collect::<Vec<_>>().join(" ")
}

fn hms(secs: u32) -> String {
    format!("{:02}:{:02}:{:02}", secs / 3600, secs / 60 % 60, secs % 60)
}

/// A random schema with no error diagnostics: topic trees grown by
/// attaching each new node to an earlier node of the same topic.
pub fn random_valid_schema<R: Rng>(rng: &mut R) -> SurveySchema {
    let mut visuals = vec![
        json!({"id": "v_buttons", "widget_kind": "buttons",
               "properties": {"labels": ["Yes", "No"], "values": ["yes", "no"], "title": text(rng)}}),
        json!({"id": "v_slider", "widget_kind": "slider",
               "properties": {"min": 0, "max": rng.random_range(1..200), "step": rng.random_range(1..10)}}),
        json!({"id": "v_text", "widget_kind": "text_panel", "properties": {"text": text(rng)}}),
        json!({"id": "v_none", "widget_kind": "none", "properties": {}}),
    ];
    if rng.random_bool(0.5) {
        visuals.push(json!({"id": "v_flags", "widget_kind": "none",
                            "properties": {"flag": true, "ratio": 0.25, "nothing": null}}));
    }
    let answers = vec![
        json!({"id": "ans_likert", "kind": "likert",
               "validation_rule": "_answer_ >= 1 && _answer_ <= 5",
               "error_prompts": [text(rng)], "number_of_attempts": rng.random_range(1..5)}),
        json!({"id": "ans_numeric", "kind": "numeric",
               "validation_rule": "_answer_ >= 0 && _answer_ < 1000",
               "error_prompts": [text(rng), text(rng)], "number_of_attempts": 2}),
        json!({"id": "ans_choice", "kind": "choice",
               "validation_rule": "_answer_ == \"yes\" || _answer_ == \"no\"",
               "error_prompts": [text(rng)], "number_of_attempts": 1,
               "synonym_map": {"yeah": "yes", "nope": "no"}}),
        json!({"id": "ans_text", "kind": "free_text", "validation_rule": "len(_answer_) > 0",
               "error_prompts": [text(rng)], "number_of_attempts": 1}),
    ];
    let n_sched = rng.random_range(0..3);
    let schedules: Vec<Json> = (0..n_sched)
        .map(|i| {
            let start = rng.random_range(0..86_000u32);
            let end = rng.random_range(start + 1..=86_400);
            json!({"id": format!("s{i}"), "daily_window_start": hms(start), "daily_window_end": hms(end),
                   "occurrence_interval": rng.random_range(1..100_000u64),
                   "max_number_of_occurrence": rng.random_range(1..10u32)})
        })
        .collect();
    let answer_ids = ["ans_likert", "ans_numeric", "ans_choice", "ans_text"];
    let rules = [
        "true",
        "_answer_ == 1",
        "_answer_ != \"no\"",
        "num(_answer_) > 3 || false",
        "_now_ % 2 == 0",
        "contains(lower(\"ABC\"), \"b\")",
    ];

    let (mut topics, mut nodes, mut audio, mut conditions) = (vec![], vec![], vec![], vec![]);
    for t in 0..rng.random_range(1..4) {
        let topic = format!("t{t}");
        let size = rng.random_range(1..8);
        let mut roots = vec![];
        let mut ids: Vec<String> = vec![];
        for k in 0..size {
            let id = format!("{topic}_n{k}");
            let parent = (k > 0 && rng.random_bool(0.8)).then(|| ids[rng.random_range(0..ids.len())].clone());
            let mut node = json!({
                "id": id, "topic_id": topic, "audio_output_id": format!("a_{id}"),
                "answer_id": pick(rng, &answer_ids)
            });
            let answer = node["answer_id"].as_str().unwrap().to_owned();
            let visual = match answer.as_str() {
                "ans_choice" => Some("v_buttons"),
                "ans_numeric" => Some(pick(rng, &["v_slider", "v_none"])),
                _ if rng.random_bool(0.3) => None,
                _ => Some(pick(rng, &["v_text", "v_none"])),
            };
            if let Some(v) = visual {
                node["visual_output_id"] = json!(v);
            }
            match &parent {
                None => {
                    roots.push(id.clone());
                    if n_sched > 0 && rng.random_bool(0.7) {
                        node["schedule_id"] = json!(format!("s{}", rng.random_range(0..n_sched)));
                    }
                }
                Some(p) => {
                    let mut c = json!({
                        "id": format!("c_{id}"), "prev_ema_question_node_id": p,
                        "next_ema_question_node_id": id,
                        "priority": k as i64 * if rng.random_bool(0.5) { 1 } else { -1 },
                        "return_rule": pick(rng, &rules)
                    });
                    if rng.random_bool(0.2) {
                        c["data_fetching_rule"] = json!({
                            "method": "GET",
                            "url_template": "https://api.example/v/{_answer_}?t={_now_}",
                            "extract_path": "a.0.b", "timeout_s": rng.random_range(1..30), "on_error": 0
                        });
                        c["return_rule"] = json!("_fetched_ == 0");
                    }
                    conditions.push(c);
                }
            }
            let n_scripts = rng.random_range(1..4);
            audio.push(json!({"id": format!("a_{id}"), "scripts": (0..n_scripts).map(|_| text(rng)).collect::<Vec<_>>()}));
            nodes.push(node);
            ids.push(id);
        }
        topics.push(json!({"id": topic, "name": text(rng), "root_question_ids": roots}));
    }
    serde_json::from_value(json!({
        "schema_version": "1", "topics": topics, "nodes": nodes, "audio_outputs": audio,
        "visual_outputs": visuals, "answers": answers, "conditions": conditions, "schedules": schedules
    }))
    .unwrap()
}

/// One probe for the fixture's Likert question: `(is_widget_event, text)`.
pub type Probe = (bool, &'static str);

/// The fifteen inputs the 1..5 Likert question must accept.
pub const LIKERT_ACCEPTED: [Probe; 15] = [
    (false, "1"),
    (false, "2"),
    (false, "3"),
    (false, "4"),
    (false, "5"),
    (false, "one"),
    (false, "two"),
    (false, "three"),
    (false, "four"),
    (false, "five"),
    (true, "1"),
    (true, "2"),
    (true, "3"),
    (true, "4"),
    (true, "5"),
];

/// Twenty-five near misses it must reject.
pub const LIKERT_REJECTED: [Probe; 25] = [
    (false, "0"),
    (false, "6"),
    (false, "10"),
    (false, "-1"),
    (false, "2.5"),
    (false, "3.0"),
    (false, "zero"),
    (false, "six"),
    (false, "ten"),
    (false, "eleven"),
    (false, "twenty"),
    (false, ""),
    (false, "   "),
    (false, "one two"),
    (false, "1 2"),
    (false, "fiv"),
    (false, "yes"),
    (false, "maybe"),
    (false, "three point five"),
    (false, "1e0"),
    (false, "0x3"),
    (true, "0"),
    (true, "6"),
    (true, "2.5"),
    (true, "three"),
];
