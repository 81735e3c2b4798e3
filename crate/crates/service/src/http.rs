//! HTTP/1.1 JSON binding of [`Service`].
//!
//! | method | path                          | body / reply                              |
//! |--------|-------------------------------|-------------------------------------------|
//! | PUT    | /v1/schemas                   | document → 201 `{"id"}` / 422 diagnostics |
//! | GET    | /v1/schemas/{id}              | canonical document                        |
//! | PUT    | /v1/participants/{id}         | `{"utc_offset_minutes"}`                  |
//! | POST   | /v1/sessions                  | [`CreateSession`] → [`CreateReply`]       |
//! | GET    | /v1/sessions/{id}             | [`SessionView`]                           |
//! | POST   | /v1/sessions/{id}/input       | [`InputBody`] → [`InputReply`]            |
//! | GET    | /v1/sessions/{id}/transcript  | JSON Lines of response records            |
//! | GET    | /v1/responses                 | JSON Lines, `?participant=&from=&to=`     |

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use ema_core::flow::ResponseRecord;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::service::{CreateReply, CreateSession, InputBody, ResponseFilter, Service, ServiceError};

type Shared = Arc<Service>;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Rejected(diagnostics) => {
                return (StatusCode::UNPROCESSABLE_ENTITY, Json(json!({ "diagnostics": diagnostics }))).into_response()
            }
            ServiceError::Fault(_) | ServiceError::Io(_) => {
                log::error!("{self}");
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

/// Runs blocking service work off the async executor.
async fn blocking<T, F>(service: Shared, f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce(&Service) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&service))
        .await
        .unwrap_or_else(|e| Err(ServiceError::Io(std::io::Error::other(e.to_string()))))
}

fn json_lines(records: &[ResponseRecord]) -> Response {
    let mut body = String::new();
    for r in records {
        body.push_str(&serde_json::to_string(r).expect("record serializes"));
        body.push('\n');
    }
    ([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response()
}

async fn put_schema(State(s): State<Shared>, body: Bytes) -> Result<Response, ServiceError> {
    let id = blocking(s, move |s| s.put_schema(&body)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "id": id }))).into_response())
}

async fn get_schema(State(s): State<Shared>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let doc = blocking(s, move |s| s.get_schema(&id)).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], doc).into_response())
}

#[derive(Deserialize)]
struct ParticipantBody {
    utc_offset_minutes: i32,
}

async fn put_participant(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Json(body): Json<ParticipantBody>,
) -> Result<Response, ServiceError> {
    let record = blocking(s, move |s| s.put_participant(&id, body.utc_offset_minutes)).await?;
    Ok(Json(record).into_response())
}

async fn create_session(State(s): State<Shared>, Json(req): Json<CreateSession>) -> Result<Response, ServiceError> {
    let reply = blocking(s, move |s| s.create_session(&req)).await?;
    let status = match reply {
        CreateReply::Started { .. } => StatusCode::CREATED,
        CreateReply::NoEligible { .. } => StatusCode::OK,
    };
    Ok((status, Json(reply)).into_response())
}

async fn get_session(State(s): State<Shared>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(Json(blocking(s, move |s| s.session(&id)).await?).into_response())
}

async fn post_input(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Json(body): Json<InputBody>,
) -> Result<Response, ServiceError> {
    Ok(Json(blocking(s, move |s| s.post_input(&id, &body)).await?).into_response())
}

async fn transcript(State(s): State<Shared>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(json_lines(&blocking(s, move |s| s.transcript(&id)).await?))
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct ResponseQuery {
    participant: Option<String>,
    from: Option<i64>,
    to: Option<i64>,
}

async fn responses(State(s): State<Shared>, Query(q): Query<ResponseQuery>) -> Result<Response, ServiceError> {
    let filter = ResponseFilter {
        participant: q.participant,
        from: q.from,
        to: q.to,
    };
    Ok(json_lines(&blocking(s, move |s| s.export_responses(&filter)).await?))
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/v1/schemas", put(put_schema))
        .route("/v1/schemas/{id}", get(get_schema))
        .route("/v1/participants/{id}", put(put_participant))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/input", post(post_input))
        .route("/v1/sessions/{id}/transcript", get(transcript))
        .route("/v1/responses", get(responses))
        .with_state(service)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, service: Arc<Service>) -> std::io::Result<()> {
    axum::serve(listener, router(service)).await
}
