//! HTTP surface.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | /transcripts | JSON body, or SRT/VTT with `?format=srt|vtt` |
//! | GET | /transcripts/{id} | |
//! | POST | /transcripts/{id}/guide | optional segmentation rules body |
//! | POST | /transcripts/{id}/video | expert video upload |
//! | GET | /guides/{id} | |
//! | POST | /sessions | `{transcript_id, guide_id, twin}` |
//! | GET | /sessions/{id} | |
//! | POST | /sessions/{id}/turns | `{text}` |
//! | POST | /sessions/{id}/audio-turns | WAV body |
//! | GET | /sessions/{id}/twin | |
//! | POST | /sessions/{id}/twin/actions | `{advance_ms, action}` |
//! | GET | /sessions/{id}/stream | server-sent events, resumable |
//! | GET | /media/{id} | range requests supported |

use std::convert::Infallible;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, FromRequest, Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;
use tokio::sync::broadcast::error::RecvError;
use tower_http::services::ServeFile;
use tower::ServiceExt;

use taskguide_core::engine::EngineError;
use taskguide_core::{Action, SegmentationRules, SubtitleFormat};

use crate::providers::{AudioBlob, AudioFormat, ProviderError};
use crate::runtime::{Service, ServiceError, StreamEvent, TranscriptUpload};
use crate::store::{valid_id, StoreError};

pub const TOKEN_HEADER: &str = "x-taskguide-token";

pub struct ApiError(ServiceError);

impl<E: Into<ServiceError>> From<E> for ApiError {
    fn from(e: E) -> Self {
        ApiError(e.into())
    }
}

impl ApiError {
    fn status_and_code(&self) -> (StatusCode, &'static str) {
        use ServiceError as S;
        match &self.0 {
            S::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            S::Busy => (StatusCode::CONFLICT, "turn_in_progress"),
            S::Engine(EngineError::SessionCompleted) => (StatusCode::CONFLICT, "session_completed"),
            S::Engine(EngineError::EmptyTurn) => (StatusCode::UNPROCESSABLE_ENTITY, "empty_turn"),
            S::Engine(_) => (StatusCode::UNPROCESSABLE_ENTITY, "guide_mismatch"),
            S::Transcript(_) => (StatusCode::BAD_REQUEST, "invalid_transcript"),
            S::Invalid(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_request"),
            S::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            S::Speech(ProviderError::AudioRejected(_)) => (StatusCode::UNSUPPORTED_MEDIA_TYPE, "audio_rejected"),
            S::Speech(ProviderError::InvalidInput(_)) => (StatusCode::UNPROCESSABLE_ENTITY, "audio_rejected"),
            S::Speech(_) => (StatusCode::SERVICE_UNAVAILABLE, "speech_unavailable"),
            S::Store(StoreError::Exists { .. }) => (StatusCode::CONFLICT, "exists"),
            S::Store(_) | S::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage"),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code) = self.status_and_code();
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        }
        let mut body = json!({"error": code, "message": self.0.to_string()});
        if let ServiceError::Transcript(e) = &self.0 {
            if let Some((segment, violation)) = e.violation() {
                body["segment"] = json!(segment);
                body["violation"] = json!(violation);
            }
        }
        (status, Json(body)).into_response()
    }
}

fn bad_request(message: impl Into<String>) -> ApiError {
    ApiError(ServiceError::Invalid(message.into()))
}

/// `Json` whose failures use this API's error shape (and 422 for bad
/// bodies).
pub struct JsonBody<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for JsonBody<T> {
    type Rejection = Response;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(JsonBody(v)),
            Err(JsonRejection::BytesRejection(e)) => Err(e.into_response()),
            Err(e) => Err(bad_request(e.body_text()).into_response()),
        }
    }
}

type AppState = Arc<Service>;

pub fn router(service: Arc<Service>) -> Router {
    let limit = service.config().max_body_bytes;
    Router::new()
        .route("/transcripts", post(ingest))
        .route("/transcripts/{id}", get(get_transcript))
        .route("/transcripts/{id}/guide", post(compile_guide))
        .route("/transcripts/{id}/video", post(upload_video))
        .route("/guides/{id}", get(get_guide))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/turns", post(text_turn))
        .route("/sessions/{id}/audio-turns", post(audio_turn))
        .route("/sessions/{id}/twin", get(get_twin))
        .route("/sessions/{id}/twin/actions", post(twin_action))
        .route("/sessions/{id}/stream", get(stream))
        .route("/media/{id}", get(media))
        .route("/healthz", get(|| async { "ok" }))
        .layer(middleware::from_fn_with_state(service.clone(), require_token))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(service)
}

async fn require_token(State(service): State<AppState>, req: Request, next: Next) -> Response {
    let Some(expected) = service.config().token.as_deref() else {
        return next.run(req).await;
    };
    let header_ok = req
        .headers()
        .get(TOKEN_HEADER)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v == expected);
    let query_ok = req
        .uri()
        .query()
        .into_iter()
        .flat_map(|q| q.split('&'))
        .any(|kv| kv.strip_prefix("token=") == Some(expected));
    if header_ok || query_ok || req.uri().path() == "/healthz" {
        next.run(req).await
    } else {
        (
            StatusCode::UNAUTHORIZED,
            Json(json!({"error": "unauthorized", "message": "missing or wrong access token"})),
        )
            .into_response()
    }
}

#[derive(Debug, Deserialize)]
struct IngestQuery {
    format: Option<String>,
    task_id: Option<String>,
    language_tag: Option<String>,
}

async fn ingest(State(service): State<AppState>, Query(q): Query<IngestQuery>, body: Bytes) -> Result<Response, ApiError> {
    let upload = match q.format.as_deref() {
        None | Some("json") => TranscriptUpload::Json,
        Some(f) => TranscriptUpload::Subtitle {
            format: f.parse::<SubtitleFormat>().map_err(|_| bad_request(format!("unknown format {f:?}")))?,
            task_id: q.task_id.unwrap_or_else(|| "subtitle".into()),
            language_tag: q.language_tag.unwrap_or_else(|| "und".into()),
        },
    };
    let (meta, t) = service.ingest_transcript(&body, upload)?;
    let body = json!({
        "id": meta.id,
        "task_id": t.task_id(),
        "segments": t.segments().len(),
        "duration_ms": t.duration_ms(),
    });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn get_transcript(State(service): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let t = service.transcript(&id)?;
    let video = service.store().video_for(&id)?.map(|m| m.id);
    let transcript: serde_json::Value = serde_json::from_slice(&t.to_json()).expect("canonical JSON");
    Ok(Json(json!({"id": id, "transcript": transcript, "video_id": video})).into_response())
}

async fn compile_guide(State(service): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let rules: SegmentationRules = if body.iter().all(u8::is_ascii_whitespace) {
        SegmentationRules::default()
    } else {
        serde_json::from_slice::<Option<SegmentationRules>>(&body)
            .map_err(|e| bad_request(format!("segmentation rules: {e}")))?
            .unwrap_or_default()
    };
    let (meta, guide) = service.compile_guide(&id, &rules)?;
    let guide: serde_json::Value = serde_json::from_slice(&guide.to_json()).expect("canonical JSON");
    Ok((
        StatusCode::CREATED,
        Json(json!({"id": meta.id, "transcript_id": id, "guide": guide})),
    )
        .into_response())
}

async fn get_guide(State(service): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let (meta, guide) = service.guide(&id)?;
    let guide: serde_json::Value = serde_json::from_slice(&guide.to_json()).expect("canonical JSON");
    Ok(Json(json!({"id": id, "transcript_id": meta.transcript_id, "guide": guide})).into_response())
}

async fn upload_video(
    State(service): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let ct = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("");
    if body.is_empty() {
        return Err(bad_request("video body is empty"));
    }
    let meta = service.put_video(&id, &body, ct)?;
    Ok((StatusCode::CREATED, Json(json!({"id": meta.id, "transcript_id": id}))).into_response())
}

#[derive(Debug, Deserialize)]
struct CreateSession {
    transcript_id: String,
    guide_id: String,
    #[serde(default)]
    twin: bool,
}

async fn create_session(State(service): State<AppState>, JsonBody(req): JsonBody<CreateSession>) -> Result<Response, ApiError> {
    let created = service
        .create_session(&req.transcript_id, &req.guide_id, req.twin)
        .await?;
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

async fn get_session(State(service): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(service.session_view(&id).await?).into_response())
}

#[derive(Debug, Deserialize)]
struct TextTurn {
    text: String,
}

async fn text_turn(
    State(service): State<AppState>,
    Path(id): Path<String>,
    JsonBody(req): JsonBody<TextTurn>,
) -> Result<Response, ApiError> {
    Ok(Json(service.text_turn(&id, &req.text).await?).into_response())
}

#[derive(Debug, Deserialize)]
struct AudioQuery {
    duration_ms: Option<u64>,
}

async fn audio_turn(
    State(service): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<AudioQuery>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let ct = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("audio/wav");
    let format = AudioFormat::from_content_type(ct)
        .ok_or_else(|| ApiError(ServiceError::Speech(ProviderError::AudioRejected(format!("unsupported content type {ct:?}")))))?;
    let blob = match format {
        AudioFormat::WavPcm16 => AudioBlob::from_wav(body.to_vec()),
        other => AudioBlob::opaque(other, body.to_vec(), q.duration_ms.unwrap_or(1)),
    }
    .map_err(|e| bad_request(e.to_string()))?;
    Ok(Json(service.audio_turn(&id, blob).await?).into_response())
}

async fn get_twin(State(service): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let view = service.session_view(&id).await?;
    match view.twin {
        Some(t) => Ok(Json(t).into_response()),
        None => Err(ApiError(ServiceError::Conflict("session has no twin".into()))),
    }
}

#[derive(Debug, Deserialize)]
struct TwinRequest {
    #[serde(default)]
    advance_ms: u64,
    #[serde(default)]
    action: Option<Action>,
}

async fn twin_action(
    State(service): State<AppState>,
    Path(id): Path<String>,
    JsonBody(req): JsonBody<TwinRequest>,
) -> Result<Response, ApiError> {
    Ok(Json(service.twin_action(&id, req.advance_ms, req.action).await?).into_response())
}

#[derive(Debug, Deserialize)]
struct StreamQuery {
    after: Option<u64>,
}

fn sse_event(e: &StreamEvent) -> Event {
    Event::default()
        .id(e.seq.to_string())
        .event(match &e.body {
            crate::runtime::StreamBody::AssistantTurn { .. } => "assistant_turn",
            crate::runtime::StreamBody::TwinState(_) => "twin_state",
            crate::runtime::StreamBody::Error { .. } => "error",
        })
        .data(serde_json::to_string(e).expect("stream event serializes"))
}

/// Server-sent events for one session. Resumes after `?after=` or the
/// `Last-Event-ID` header; otherwise starts from the first event.
async fn stream(
    State(service): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<StreamQuery>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let slot = service.stream(&id)?;
    let after = q.after.or_else(|| {
        headers
            .get("last-event-id")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.parse().ok())
    });
    let (backlog, rx) = slot.subscribe(after);
    let last = backlog.last().map(|e| e.seq).or(after);
    let live = stream::unfold((rx, last, slot), |(mut rx, mut last, slot)| async move {
        loop {
            match rx.recv().await {
                Ok(e) if last.is_some_and(|l| e.seq <= l) => continue,
                Ok(e) => {
                    last = Some(e.seq);
                    return Some((vec![e], (rx, last, slot)));
                }
                Err(RecvError::Lagged(_)) => {
                    let missed = slot.events_after(last);
                    if let Some(l) = missed.last() {
                        last = Some(l.seq);
                    }
                    if !missed.is_empty() {
                        return Some((missed, (rx, last, slot)));
                    }
                }
                Err(RecvError::Closed) => return None,
            }
        }
    })
    .flat_map(stream::iter);
    let events = stream::iter(backlog)
        .chain(live)
        .map(|e| Ok(sse_event(&e)));
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}

async fn media(State(service): State<AppState>, Path(id): Path<String>, req: Request) -> Result<Response, ApiError> {
    if !valid_id(&id) {
        return Err(ApiError(ServiceError::NotFound(format!("no media with id {id:?}"))));
    }
    let (_, path) = service.store().media_path(&id)?;
    let serve = ServeFile::new(path);
    let response = serve
        .oneshot(req)
        .await
        .unwrap_or_else(|e: Infallible| match e {});
    Ok(response.map(Body::new))
}
