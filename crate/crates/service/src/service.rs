use std::collections::{BTreeMap, HashMap};
use std::io;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use ema_core::flow::{
    start_session, submit_answer, FlowError, InputKind, ParticipantInput, PromptPayload, ResponseRecord,
    SessionStart, SessionState, StartOutcome,
};
use ema_core::rule::FetchGateway;
use ema_core::scheduler::{AttemptLog, AttemptRecord, EligibilityReason, LocalInstant};
use ema_core::schema::{load_schema, serialize_schema, Diagnostic, SurveySchema};
use ema_core::Timestamp;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;
pub use crate::store::ParticipantRecord;
use crate::store::{is_store_id, Store, StoredSession};

pub const MIN_UTC_OFFSET: i32 = -720;
pub const MAX_UTC_OFFSET: i32 = 840;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("schema rejected with {} diagnostics", .0.len())]
    Rejected(Vec<Diagnostic>),
    #[error("{0}")]
    BadRequest(String),
    #[error("injected fault at {0:?}")]
    Fault(FaultPoint),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Places where a crash can be simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultPoint {
    /// The attempt record is on disk, the session file is not.
    AfterAttemptAppend,
    /// The response record is on disk, the session file is not yet updated
    /// and no reply has been sent.
    AfterResponseAppend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FaultAction {
    Fail,
    Abort,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateSession {
    pub schema_id: String,
    pub topic_id: String,
    pub participant_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoEligible {
    pub reason: EligibilityReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CreateReply {
    Started { session_id: String, prompt: PromptPayload },
    NoEligible { no_eligible_question: NoEligible },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputBody {
    pub kind: InputKind,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputReply {
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<PromptPayload>,
}

/// Current state of a session as reported over the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub schema_id: String,
    pub topic_id: String,
    pub participant_id: String,
    pub state: SessionState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_node_id: Option<String>,
    pub attempts_remaining: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<PromptPayload>,
}

/// Export filter; `from` and `to` are inclusive Unix seconds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseFilter {
    pub participant: Option<String>,
    pub from: Option<Timestamp>,
    pub to: Option<Timestamp>,
}

impl ResponseFilter {
    fn matches(&self, r: &ResponseRecord) -> bool {
        self.participant.as_ref().is_none_or(|p| *p == r.participant_id)
            && self.from.is_none_or(|f| r.ts >= f)
            && self.to.is_none_or(|t| r.ts <= t)
    }
}

fn new_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

/// The engine bound to a store.
///
/// Inputs to one session are handled one at a time; a create-session call
/// checks and appends the attempt log atomically. Sessions keep the schema
/// they started with: uploads always mint a new id and stored schemas are
/// never rewritten.
pub struct Service {
    store: Store,
    clock: Arc<dyn Clock>,
    gateway: Arc<dyn FetchGateway>,
    schemas: RwLock<HashMap<String, Arc<SurveySchema>>>,
    participants: Mutex<BTreeMap<String, ParticipantRecord>>,
    attempts: Mutex<AttemptLog>,
    session_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    fault: Mutex<Option<(FaultPoint, FaultAction)>>,
}

impl Service {
    /// Opens (or creates) the store at `root` and finishes any write a crash
    /// interrupted.
    pub fn open(
        root: impl Into<PathBuf>,
        clock: Arc<dyn Clock>,
        gateway: Arc<dyn FetchGateway>,
    ) -> Result<Service, ServiceError> {
        let store = Store::open(root)?;
        let participants = store.read_participants()?;
        let attempts = AttemptLog::from_records(store.read_attempts()?)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("attempts.jsonl: {e}")))?;
        let service = Service {
            store,
            clock,
            gateway,
            schemas: RwLock::new(HashMap::new()),
            participants: Mutex::new(participants),
            attempts: Mutex::new(attempts),
            session_locks: Mutex::new(HashMap::new()),
            fault: Mutex::new(None),
        };
        service.recover()?;
        Ok(service)
    }

    /// A staged session state is kept exactly when its response record made
    /// it to disk.
    fn recover(&self) -> Result<(), ServiceError> {
        let pending = self.store.pending_ids()?;
        if pending.is_empty() {
            return Ok(());
        }
        let responses = self.store.read_responses()?;
        for id in pending {
            let Some(staged) = self.store.read_pending(&id)? else { continue };
            let written = responses.iter().filter(|r| r.session_id == id).count() as u64;
            if written >= staged.session.turns {
                log::info!("recovering session {id} at turn {}", staged.session.turns);
                self.store.promote_pending(&id)?;
            } else {
                log::info!("discarding unacknowledged state of session {id}");
                self.store.discard_pending(&id)?;
            }
        }
        Ok(())
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    /// Makes the next pass through `point` return [`ServiceError::Fault`].
    pub fn inject_fault(&self, point: FaultPoint) {
        *lock(&self.fault) = Some((point, FaultAction::Fail));
    }

    /// Makes the next pass through `point` abort the process.
    pub fn inject_crash(&self, point: FaultPoint) {
        *lock(&self.fault) = Some((point, FaultAction::Abort));
    }

    fn checkpoint(&self, point: FaultPoint) -> Result<(), ServiceError> {
        let mut fault = lock(&self.fault);
        match *fault {
            Some((p, action)) if p == point => {
                *fault = None;
                if action == FaultAction::Abort {
                    log::error!("aborting at injected crash point {point:?}");
                    std::process::abort();
                }
                Err(ServiceError::Fault(point))
            }
            _ => Ok(()),
        }
    }

    /// Validates and stores a schema document under a fresh id.
    pub fn put_schema(&self, document: &[u8]) -> Result<String, ServiceError> {
        let schema = load_schema(document).map_err(ServiceError::Rejected)?;
        let id = new_id();
        self.store.write_schema(&id, &serialize_schema(&schema))?;
        self.schemas.write().unwrap_or_else(|e| e.into_inner()).insert(id.clone(), Arc::new(schema));
        Ok(id)
    }

    /// The stored canonical document.
    pub fn get_schema(&self, id: &str) -> Result<Vec<u8>, ServiceError> {
        self.store
            .read_schema(id)?
            .ok_or_else(|| ServiceError::NotFound(format!("schema `{id}`")))
    }

    fn schema(&self, id: &str) -> Result<Arc<SurveySchema>, ServiceError> {
        if let Some(s) = self.schemas.read().unwrap_or_else(|e| e.into_inner()).get(id) {
            return Ok(s.clone());
        }
        let bytes = self.get_schema(id)?;
        let schema = load_schema(&bytes).map_err(|d| {
            io::Error::new(io::ErrorKind::InvalidData, format!("stored schema {id} no longer validates: {d:?}"))
        })?;
        let schema = Arc::new(schema);
        self.schemas
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id.to_owned(), schema.clone());
        Ok(schema)
    }

    pub fn put_participant(&self, id: &str, utc_offset_minutes: i32) -> Result<ParticipantRecord, ServiceError> {
        if !(MIN_UTC_OFFSET..=MAX_UTC_OFFSET).contains(&utc_offset_minutes) {
            return Err(ServiceError::BadRequest(format!(
                "utc_offset_minutes {utc_offset_minutes} outside [{MIN_UTC_OFFSET}, {MAX_UTC_OFFSET}]"
            )));
        }
        if id.is_empty() {
            return Err(ServiceError::BadRequest("participant id is empty".into()));
        }
        let record = ParticipantRecord {
            id: id.to_owned(),
            utc_offset_minutes,
        };
        let mut all = lock(&self.participants);
        let mut next = all.clone();
        next.insert(id.to_owned(), record.clone());
        self.store.write_participants(&next)?;
        *all = next;
        Ok(record)
    }

    pub fn participant(&self, id: &str) -> Result<ParticipantRecord, ServiceError> {
        lock(&self.participants)
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("participant `{id}`")))
    }

    fn session_lock(&self, id: &str) -> Arc<Mutex<()>> {
        lock(&self.session_locks).entry(id.to_owned()).or_default().clone()
    }

    /// Starts a session at the first eligible root of the topic.
    pub fn create_session(&self, req: &CreateSession) -> Result<CreateReply, ServiceError> {
        let schema = self.schema(&req.schema_id)?;
        let participant = self.participant(&req.participant_id)?;
        if schema.topic(&req.topic_id).is_none() {
            return Err(ServiceError::NotFound(format!("topic `{}`", req.topic_id)));
        }
        let now = LocalInstant::from_utc(self.clock.now(), participant.utc_offset_minutes);
        let session_id = new_id();
        let start = SessionStart {
            session_id: &session_id,
            topic_id: &req.topic_id,
            participant_id: &req.participant_id,
            seed: req.seed.unwrap_or_else(rand::random),
        };

        let mut log = lock(&self.attempts);
        let mut trial = log.clone();
        let outcome = match start_session(&schema, start, now, &mut trial) {
            Ok(o) => o,
            Err(FlowError::Monotonicity(e)) => return Err(ServiceError::Conflict(e.to_string())),
            Err(e) => return Err(ServiceError::NotFound(e.to_string())),
        };
        let (session, prompt) = match outcome {
            StartOutcome::NoEligibleQuestion { reason } => {
                return Ok(CreateReply::NoEligible {
                    no_eligible_question: NoEligible { reason },
                })
            }
            StartOutcome::Started { session, prompt } => (session, prompt),
        };
        let root = session.current_node_id.clone().expect("new session awaits an answer");
        self.store.append_attempt(&AttemptRecord {
            participant: req.participant_id.clone(),
            question: root,
            ts: now.epoch,
        })?;
        *log = trial;
        self.checkpoint(FaultPoint::AfterAttemptAppend)?;
        self.store.write_session(&StoredSession {
            schema_id: req.schema_id.clone(),
            session,
        })?;
        Ok(CreateReply::Started { session_id, prompt })
    }

    fn load_session(&self, id: &str) -> Result<StoredSession, ServiceError> {
        if !is_store_id(id) {
            return Err(ServiceError::NotFound(format!("session `{id}`")));
        }
        self.store
            .read_session(id)?
            .ok_or_else(|| ServiceError::NotFound(format!("session `{id}`")))
    }

    /// Feeds one input to a session. The response record is on disk before
    /// this returns.
    pub fn post_input(&self, session_id: &str, body: &InputBody) -> Result<InputReply, ServiceError> {
        let guard = self.session_lock(session_id);
        let _held = lock(&guard);
        let mut stored = self.load_session(session_id)?;
        if !stored.session.is_awaiting() {
            return Err(ServiceError::Conflict(format!(
                "session `{session_id}` is {}",
                match stored.session.state {
                    SessionState::Completed => "completed",
                    _ => "abandoned",
                }
            )));
        }
        let schema = self.schema(&stored.schema_id)?;
        let offset = self.participant(&stored.session.participant_id)?.utc_offset_minutes;
        let now = LocalInstant::from_utc(self.clock.now(), offset);
        let input = ParticipantInput {
            kind: body.kind,
            value: body.value.clone(),
            received_at: now.epoch,
        };
        let turn = submit_answer(&schema, &mut stored.session, &input, now, self.gateway.as_ref())
            .map_err(|e| ServiceError::Conflict(e.to_string()))?;

        self.store.write_pending(&stored)?;
        self.store.append_response(&turn.record)?;
        self.checkpoint(FaultPoint::AfterResponseAppend)?;
        self.store.promote_pending(session_id)?;
        Ok(InputReply {
            outcome: turn.outcome.name().to_owned(),
            prompt: turn.outcome.prompt().cloned(),
        })
    }

    pub fn session(&self, session_id: &str) -> Result<SessionView, ServiceError> {
        let StoredSession { schema_id, session } = self.load_session(session_id)?;
        Ok(SessionView {
            session_id: session.id,
            schema_id,
            topic_id: session.topic_id,
            participant_id: session.participant_id,
            state: session.state,
            current_node_id: session.current_node_id,
            attempts_remaining: session.attempts_remaining,
            prompt: session.last_prompt,
        })
    }

    /// Every response record of one session, in the order written.
    pub fn transcript(&self, session_id: &str) -> Result<Vec<ResponseRecord>, ServiceError> {
        self.load_session(session_id)?;
        let mut records = self.store.read_responses()?;
        records.retain(|r| r.session_id == session_id);
        Ok(records)
    }

    /// Matching response records in timestamp order (ties in write order).
    pub fn export_responses(&self, filter: &ResponseFilter) -> Result<Vec<ResponseRecord>, ServiceError> {
        let mut records = self.store.read_responses()?;
        records.retain(|r| filter.matches(r));
        records.sort_by_key(|r| r.ts);
        Ok(records)
    }
}
