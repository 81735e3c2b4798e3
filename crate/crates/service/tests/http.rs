mod common;

use std::sync::Arc;

use common::*;
use ema_core::schema::SEDENTARY_FIXTURE;
use ema_service::{http, FixedClock};
use ema_testkit::fixtures::sedentary_json;
use serde_json::{json, Value};

struct Client {
    base: String,
    agent: ureq::Agent,
}

impl Client {
    fn send(&self, method: &str, path: &str, body: Option<Vec<u8>>) -> (u16, String) {
        let url = format!("{}{path}", self.base);
        let result = match (method, body) {
            ("GET", _) => self.agent.get(&url).call(),
            ("PUT", Some(b)) => self.agent.put(&url).content_type("application/json").send(&b[..]),
            ("POST", Some(b)) => self.agent.post(&url).content_type("application/json").send(&b[..]),
            other => panic!("{other:?}"),
        };
        let mut response = result.unwrap();
        let status = response.status().as_u16();
        (status, response.body_mut().read_to_string().unwrap())
    }

    fn json(&self, method: &str, path: &str, body: Value) -> (u16, Value) {
        let (status, text) = self.send(method, path, Some(body.to_string().into_bytes()));
        (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
    }

    fn get(&self, path: &str) -> (u16, String) {
        self.send("GET", path, None)
    }
}

fn spawn(dir: &std::path::Path, clock: &Arc<FixedClock>) -> Client {
    let service = Arc::new(open(dir, clock));
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            http::serve(listener, service).await.unwrap();
        });
    });
    let addr = rx.recv().unwrap();
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    Client {
        base: format!("http://{addr}"),
        agent,
    }
}

#[test]
fn wire_protocol_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let clock = Arc::new(FixedClock::new(NOON));
    let c = spawn(dir.path(), &clock);

    let (status, body) = c.send("PUT", "/v1/schemas", Some(SEDENTARY_FIXTURE.as_bytes().to_vec()));
    assert_eq!(status, 201, "{body}");
    let schema_id = serde_json::from_str::<Value>(&body).unwrap()["id"].as_str().unwrap().to_owned();
    let (status, doc) = c.get(&format!("/v1/schemas/{schema_id}"));
    assert_eq!((status, doc.as_str()), (200, SEDENTARY_FIXTURE));
    assert_eq!(c.get(&format!("/v1/schemas/{}", "f".repeat(32))).0, 404);

    let (status, body) = c.json("PUT", "/v1/participants/p1", json!({"utc_offset_minutes": -480}));
    assert_eq!(status, 200);
    assert_eq!(body, json!({"id": "p1", "utc_offset_minutes": -480}));
    assert_eq!(c.json("PUT", "/v1/participants/p1", json!({"utc_offset_minutes": 900})).0, 400);

    // noon UTC is 04:00 at UTC-8
    let create = json!({"schema_id": schema_id, "topic_id": "sedentary", "participant_id": "p1", "seed": 7});
    let (status, body) = c.json("POST", "/v1/sessions", create.clone());
    assert_eq!((status, body), (200, json!({"no_eligible_question": {"reason": "outside_daily_window"}})));
    c.json("PUT", "/v1/participants/p1", json!({"utc_offset_minutes": 0}));
    let (status, body) = c.json("POST", "/v1/sessions", create);
    assert_eq!(status, 201, "{body}");
    let session = body["session_id"].as_str().unwrap().to_owned();
    assert_eq!(body["prompt"]["node_id"], "q_sitting");
    assert_eq!(body["prompt"]["visual_document"]["kind"], "buttons");
    assert_eq!(body["prompt"]["visual_document"]["buttons"][0], json!({"label": "1", "value": "1"}));
    assert_eq!(body["prompt"]["is_error_reprompt"], false);

    let input = |v: &str| json!({"kind": "utterance", "value": v});
    let path = format!("/v1/sessions/{session}/input");
    let (status, body) = c.json("POST", &path, input("lots"));
    assert_eq!((status, body["outcome"].as_str()), (200, Some("reprompt")));
    assert_eq!(body["prompt"]["audio_script"], "Sorry, I need a number from one to five.");
    assert_eq!(body["prompt"]["is_error_reprompt"], true);
    let (_, body) = c.json("POST", &path, input("four"));
    assert_eq!(body["outcome"], "advance");
    assert_eq!(body["prompt"]["node_id"], "q_sitting_context");
    let (_, body) = c.json("POST", &path, json!({"kind": "widget_event", "value": "other"}));
    assert_eq!(body, json!({"outcome": "completed"}));
    let (status, body) = c.json("POST", &path, input("yes"));
    assert_eq!(status, 409, "{body}");
    assert_eq!(c.json("POST", &format!("/v1/sessions/{}/input", "0".repeat(32)), input("1")).0, 404);
    assert_eq!(c.json("POST", &path, json!({"kind": "shout", "value": "1"})).0, 422);

    let (status, view) = c.get(&format!("/v1/sessions/{session}"));
    assert_eq!(status, 200);
    assert_eq!(serde_json::from_str::<Value>(&view).unwrap()["state"], "completed");

    let (status, lines) = c.get(&format!("/v1/sessions/{session}/transcript"));
    assert_eq!(status, 200);
    let records: Vec<Value> = lines.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 3);
    assert_eq!(records[0]["valid"], false);
    assert!(records[0].get("parsed").is_none());
    assert_eq!(records[1]["parsed"], 4);
    assert_eq!(records[2]["raw"], json!({"kind": "widget_event", "value": "other", "received_at": NOON}));

    let (_, all) = c.get("/v1/responses");
    assert_eq!(all, lines);
    assert_eq!(c.get("/v1/responses?participant=p1").1, lines);
    assert_eq!(c.get("/v1/responses?participant=p2").1, "");
    assert_eq!(c.get(&format!("/v1/responses?from={}", NOON + 1)).1, "");
    assert_eq!(c.get(&format!("/v1/responses?from={NOON}&to={NOON}")).1, lines);
}

#[test]
fn rejected_schema_lists_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let c = spawn(dir.path(), &Arc::new(FixedClock::new(NOON)));
    let mut doc = sedentary_json();
    doc["conditions"][0]["next_ema_question_node_id"] = "q_gone".into();
    let (status, body) = c.json("PUT", "/v1/schemas", doc);
    assert_eq!(status, 422);
    let diags = body["diagnostics"].as_array().unwrap();
    assert!(diags.iter().any(|d| d["code"] == "dangling-ref" && d["severity"] == "error"), "{body}");

    let (status, body) = c.send("PUT", "/v1/schemas", Some(b"{\"topics\": [".to_vec()));
    assert_eq!(status, 422);
    assert!(body.contains("parse-error") && body.contains("line 1"), "{body}");
}
