//! HTTP transport for [`Hub`](crate::api::Hub).
//!
//! | method | path                         | body              | reply             |
//! |--------|------------------------------|-------------------|-------------------|
//! | POST   | `/sessions`                  | `CreateRequest`   | 201 `ApiSessionView` |
//! | GET    | `/sessions`                  |                   | `[SessionSummary]` |
//! | GET    | `/sessions/{id}`             |                   | `ApiSessionView`  |
//! | POST   | `/sessions/{id}/actions`     | `ActionRequest`   | `TurnResult`      |
//! | GET    | `/sessions/{id}/debug`       |                   | `DebugSnapshot`   |
//! | POST   | `/sessions/{id}/truncate`    |                   | `ApiSessionView`  |
//! | POST   | `/sessions/{id}/quit`        |                   | `ApiSessionView`  |
//! | GET    | `/sessions/{id}/events`      |                   | event stream      |
//!
//! Errors are `ApiError` JSON with status 400, 404, 409, or 500.
//!
//! The event stream is server-sent events. Each committed record is sent
//! with `id:` set to its 1-based index, `event:` set to its kind (`turn`,
//! `truncate`, `quit`), and the `LogRecord` JSON as data. A client resumes
//! with a `Last-Event-ID` header (or `?after=N`) and receives every later
//! record exactly once. Interim `thinking` events carry no id. Idle streams
//! get `:heartbeat` comment frames; an unknown session gets one `error`
//! event and the stream ends.

use std::collections::VecDeque;
use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use tokio::sync::broadcast;

use crate::api::{ActionRequest, ApiError, CreateRequest, ErrorKind, Hub, StreamItem};
use pretcil_core::session::Event;

#[derive(Clone)]
struct App {
    hub: Arc<Hub>,
    heartbeat: Duration,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.kind.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

pub fn router(hub: Arc<Hub>, heartbeat: Duration) -> Router {
    Router::new()
        .route("/sessions", post(create).get(list))
        .route("/sessions/:id", get(view))
        .route("/sessions/:id/actions", post(act))
        .route("/sessions/:id/debug", get(debug))
        .route("/sessions/:id/truncate", post(truncate))
        .route("/sessions/:id/quit", post(quit))
        .route("/sessions/:id/events", get(events))
        .with_state(App { hub, heartbeat })
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    router: Router,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router).with_graceful_shutdown(shutdown).await
}

fn parse_body<T: DeserializeOwned>(body: &[u8], empty: impl FnOnce() -> T) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(empty());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::new(ErrorKind::BadRequest, format!("malformed payload: {e}")))
}

/// Runs a hub command off the async workers; commands may plan.
async fn blocking<T: Send + 'static>(
    app: &App,
    f: impl FnOnce(&Hub) -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    let hub = app.hub.clone();
    tokio::task::spawn_blocking(move || f(&hub))
        .await
        .map_err(|e| ApiError::new(ErrorKind::Internal, e.to_string()))?
}

async fn create(State(app): State<App>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let request: CreateRequest = parse_body(&body, CreateRequest::default)?;
    let view = blocking(&app, move |hub| hub.create(request)).await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn list(State(app): State<App>) -> impl IntoResponse {
    Json(app.hub.list())
}

async fn view(State(app): State<App>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(app.hub.view(&id)?))
}

async fn debug(State(app): State<App>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(app.hub.debug(&id)?))
}

async fn act(State(app): State<App>, Path(id): Path<String>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let request: ActionRequest = parse_body(&body, || ActionRequest { action: String::new() })?;
    Ok(Json(blocking(&app, move |hub| hub.act(&id, &request)).await?))
}

async fn truncate(State(app): State<App>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(blocking(&app, move |hub| hub.truncate(&id)).await?))
}

async fn quit(State(app): State<App>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(blocking(&app, move |hub| hub.quit(&id)).await?))
}

#[derive(Deserialize)]
struct Resume {
    after: Option<u64>,
}

fn frame(item: &StreamItem) -> SseEvent {
    match item {
        StreamItem::Record { index, record } => {
            let kind = match record.event {
                Event::Turn(_) => "turn",
                Event::Truncate { .. } => "truncate",
                Event::Quit { .. } => "quit",
            };
            SseEvent::default()
                .id(index.to_string())
                .event(kind)
                .data(serde_json::to_string(record).expect("records serialize"))
        }
        StreamItem::Thinking { turn } => SseEvent::default()
            .event("thinking")
            .data(format!("{{\"turn\":{turn}}}")),
    }
}

struct Feed {
    hub: Arc<Hub>,
    id: String,
    last: u64,
    backlog: VecDeque<StreamItem>,
    rx: broadcast::Receiver<StreamItem>,
}

impl Feed {
    /// Next item not yet delivered, or `None` once the session is gone.
    async fn next(&mut self) -> Option<StreamItem> {
        loop {
            let item = match self.backlog.pop_front() {
                Some(item) => item,
                None => match self.rx.recv().await {
                    Ok(item) => item,
                    Err(broadcast::error::RecvError::Lagged(_)) => {
                        // Refill from the committed history instead of skipping.
                        let (backlog, rx) = self.hub.subscribe(&self.id, self.last).ok()?;
                        self.backlog = backlog.into();
                        self.rx = rx;
                        continue;
                    }
                    Err(broadcast::error::RecvError::Closed) => return None,
                },
            };
            match &item {
                StreamItem::Record { index, .. } if *index <= self.last => continue,
                StreamItem::Record { index, .. } => self.last = *index,
                StreamItem::Thinking { .. } => {}
            }
            return Some(item);
        }
    }
}

async fn events(
    State(app): State<App>,
    Path(id): Path<String>,
    Query(resume): Query<Resume>,
    headers: HeaderMap,
) -> Sse<impl Stream<Item = Result<SseEvent, Infallible>>> {
    let after = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<u64>().ok())
        .or(resume.after)
        .unwrap_or(0);
    let keep_alive = KeepAlive::new().interval(app.heartbeat).text("heartbeat");
    let stream = match app.hub.subscribe(&id, after) {
        Ok((backlog, rx)) => {
            let feed = Feed {
                hub: app.hub.clone(),
                id,
                last: after,
                backlog: backlog.into(),
                rx,
            };
            stream::unfold(feed, |mut feed| async move {
                let item = feed.next().await?;
                Some((Ok(frame(&item)), feed))
            })
            .left_stream()
        }
        Err(error) => {
            let data = serde_json::to_string(&error).expect("errors serialize");
            stream::once(async move { Ok(SseEvent::default().event("error").data(data)) }).right_stream()
        }
    };
    Sse::new(stream).keep_alive(keep_alive)
}
