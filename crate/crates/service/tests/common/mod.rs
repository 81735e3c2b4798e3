#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use ema_core::rule::{FetchGateway, OfflineGateway};
use ema_core::schema::SEDENTARY_FIXTURE;
use ema_service::{CreateReply, CreateSession, FixedClock, InputBody, Service};

// 2023-11-14T12:00:00Z
pub const NOON: i64 = 1_699_963_200;

pub fn open(dir: &Path, clock: &Arc<FixedClock>) -> Service {
    open_with(dir, clock, Arc::new(OfflineGateway))
}

pub fn open_with(dir: &Path, clock: &Arc<FixedClock>, gateway: Arc<dyn FetchGateway>) -> Service {
    Service::open(dir, clock.clone(), gateway).unwrap()
}

/// A service over a fresh store holding the fixture and participant `p1` at UTC.
pub fn fixture_service(dir: &Path, clock: &Arc<FixedClock>) -> (Service, String) {
    let service = open(dir, clock);
    let schema_id = service.put_schema(SEDENTARY_FIXTURE.as_bytes()).unwrap();
    service.put_participant("p1", 0).unwrap();
    (service, schema_id)
}

pub fn create(service: &Service, schema_id: &str, topic: &str, participant: &str, seed: u64) -> CreateReply {
    service
        .create_session(&CreateSession {
            schema_id: schema_id.into(),
            topic_id: topic.into(),
            participant_id: participant.into(),
            seed: Some(seed),
        })
        .unwrap()
}

pub fn started(reply: CreateReply) -> String {
    match reply {
        CreateReply::Started { session_id, .. } => session_id,
        other => panic!("not started: {other:?}"),
    }
}

pub fn say(value: &str) -> InputBody {
    serde_json::from_value(serde_json::json!({"kind": "utterance", "value": value})).unwrap()
}

pub fn click(value: &str) -> InputBody {
    serde_json::from_value(serde_json::json!({"kind": "widget_event", "value": value})).unwrap()
}
