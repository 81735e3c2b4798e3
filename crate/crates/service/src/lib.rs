//! Persistence and wire API for EMA sessions.
//!
//! [`Service`] owns a directory-backed [`Store`] and runs the flow engine
//! against it; [`http::router`] exposes it over HTTP.

mod clock;
mod gateway;
pub mod http;
mod service;
mod store;

pub use clock::{Clock, FixedClock, SystemClock};
pub use gateway::HttpGateway;
pub use service::{
    CreateReply, CreateSession, FaultPoint, InputBody, InputReply, ParticipantRecord, ResponseFilter, Service,
    ServiceError, SessionView,
};
pub use store::{Store, StoredSession};
