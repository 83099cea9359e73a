use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use debriefkit_core::analytics::{select_window, AnalyticsParams};
use debriefkit_core::annotation::ScenarioConfig;
use debriefkit_core::ingest::{SessionStatus, SessionStore};
use debriefkit_core::interactions::{InteractionEvent, InteractionKind};
use debriefkit_core::model::{EntityRole, Millis, Phase, TimeWindow, WardLayout};
use debriefkit_core::share::snippet_range;

use crate::error::ApiError;
use crate::state::AppState;
use crate::ws::room_socket;

type AppResult<T> = Result<T, ApiError>;
type Shared = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(json!({ "ok": true })) }))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(manifest))
        .route("/sessions/{id}/streams/{kind}", post(upload_stream))
        .route("/sessions/{id}/seal", post(seal))
        .route("/sessions/{id}/timeline", get(timeline))
        .route("/sessions/{id}/analytics/{viz}", get(analytics))
        .route("/sessions/{id}/annotations", post(annotate).get(annotations))
        .route("/sessions/{id}/snippet", get(snippet))
        .route("/sessions/{id}/interactions", post(log_interaction))
        .route("/sessions/{id}/interactions/close", post(close_interactions))
        .route("/sessions/{id}/share", get(share_state))
        .route("/ws/debrief/{id}", get(room_socket))
        .with_state(state)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> AppResult<T> + Send + 'static) -> AppResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))?
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> AppResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    session_id: String,
    #[serde(default)]
    layout: Option<WardLayout>,
    #[serde(default)]
    scenario: Option<ScenarioConfig>,
    #[serde(default)]
    cast: Vec<EntityRole>,
    #[serde(default)]
    planned_end_ms: Option<Millis>,
}

async fn create_session(State(app): Shared, body: Bytes) -> AppResult<Response> {
    let req: CreateSession = parse_json(&body)?;
    let root = app.config.session_root.clone();
    let store = blocking(move || {
        let mut store = SessionStore::create(
            &root,
            &req.session_id,
            req.layout.unwrap_or_else(WardLayout::standard),
            req.scenario,
        )?;
        if !req.cast.is_empty() {
            store.declare_cast(&req.cast)?;
        }
        if let Some(end) = req.planned_end_ms {
            store.set_planned_end(end)?;
        }
        Ok(store)
    })
    .await?;
    let manifest = store.manifest().clone();
    app.insert(store);
    Ok((StatusCode::CREATED, Json(manifest)).into_response())
}

async fn list_sessions(State(app): Shared) -> Json<Value> {
    Json(json!({ "sessions": app.list() }))
}

async fn manifest(State(app): Shared, Path(id): Path<String>) -> AppResult<Response> {
    let slot = app.slot(&id)?;
    Ok(Json(slot.read(|s| s.manifest().clone())).into_response())
}

#[derive(Debug, Deserialize)]
struct UploadQuery {
    #[serde(default)]
    offset_ms: i64,
    entity: Option<EntityRole>,
}

async fn upload_stream(
    State(app): Shared,
    Path((id, kind)): Path<(String, String)>,
    Query(q): Query<UploadQuery>,
    body: Bytes,
) -> AppResult<Response> {
    let slot = app.slot(&id)?;
    let coder = app.coder.clone();
    let vad = app.config.vad;
    let kind2 = kind.clone();
    let added = blocking(move || {
        slot.write(|store| match kind2.as_str() {
            "positions" => store.ingest_positions(&body, q.offset_ms),
            "voice" => store.ingest_voice(&body, q.offset_ms),
            "utterances" => store.ingest_utterances(&body, q.offset_ms, coder.as_ref()),
            "audio" => {
                let entity = q.entity.ok_or(debriefkit_core::ingest::IngestError::Format {
                    line: 0,
                    message: "audio upload needs ?entity=<role>".into(),
                })?;
                store.ingest_audio(entity, &body, q.offset_ms, &vad)
            }
            _ => Ok(usize::MAX),
        })
    })
    .await?;
    if added == usize::MAX {
        return Err(ApiError::not_found(format!("stream kind `{kind}`")));
    }
    Ok(Json(json!({ "kind": kind, "added": added })).into_response())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SealRequest {
    #[serde(default)]
    end_ms: Option<Millis>,
}

async fn seal(State(app): Shared, Path(id): Path<String>, body: Bytes) -> AppResult<Response> {
    let req: SealRequest = if body.iter().all(u8::is_ascii_whitespace) {
        SealRequest::default()
    } else {
        parse_json(&body)?
    };
    let slot = app.slot(&id)?;
    let summary = blocking(move || {
        slot.write(|store| {
            let mut timeline = store.proposed_timeline()?;
            if let Some(end) = req.end_ms {
                timeline.end_ms = end;
            }
            store.seal(&timeline)
        })
    })
    .await?;
    Ok(Json(summary).into_response())
}

async fn timeline(State(app): Shared, Path(id): Path<String>) -> AppResult<Response> {
    let slot = app.slot(&id)?;
    let (status, annotations) = slot.read(|s| (s.status(), s.annotations().records().len()));
    let timeline = match status {
        SessionStatus::Sealed => slot.timeline()?,
        SessionStatus::Recording => slot.read(|s| s.proposed_timeline())?,
    };
    Ok(Json(json!({
        "session_id": id,
        "status": status,
        "timeline": timeline,
        "annotations": annotations,
    }))
    .into_response())
}

/// Window selection plus optional parameter overrides.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticsQuery {
    pub phase: Option<String>,
    pub from_ms: Option<Millis>,
    pub to_ms: Option<Millis>,
    pub hex_radius_mm: Option<f64>,
    pub speed_threshold_mm_s: Option<f64>,
    pub discussion_dist_mm: Option<f64>,
    pub dist_face_mm: Option<f64>,
    pub dist_side_mm: Option<f64>,
    pub angle_tol_deg: Option<f64>,
    pub network_window_size: Option<usize>,
}

impl AnalyticsQuery {
    pub fn params(&self, base: AnalyticsParams) -> AnalyticsParams {
        AnalyticsParams {
            hex_radius_mm: self.hex_radius_mm.unwrap_or(base.hex_radius_mm),
            speed_threshold_mm_s: self.speed_threshold_mm_s.unwrap_or(base.speed_threshold_mm_s),
            discussion_dist_mm: self.discussion_dist_mm.unwrap_or(base.discussion_dist_mm),
            dist_face_mm: self.dist_face_mm.unwrap_or(base.dist_face_mm),
            dist_side_mm: self.dist_side_mm.unwrap_or(base.dist_side_mm),
            angle_tol_deg: self.angle_tol_deg.unwrap_or(base.angle_tol_deg),
            network_window_size: self.network_window_size.unwrap_or(base.network_window_size),
        }
    }
}

async fn analytics(
    State(app): Shared,
    Path((id, viz)): Path<(String, String)>,
    Query(q): Query<AnalyticsQuery>,
) -> AppResult<Response> {
    let slot = app.slot(&id)?;
    let params = q.params(app.config.analytics);
    let bytes = blocking(move || {
        let timeline = slot.timeline()?;
        let phase: Option<Phase> = q.phase.as_deref().map(str::parse).transpose()?;
        let window = select_window(&timeline, phase, q.from_ms, q.to_ms)?;
        slot.analytics(&viz, window, &params)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes.as_ref().clone()).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotateRequest {
    t_ms: Millis,
    author: String,
    #[serde(default)]
    phase: Option<Phase>,
    #[serde(default)]
    action_id: Option<String>,
    #[serde(default)]
    note: Option<String>,
    #[serde(default)]
    favorite: bool,
}

async fn annotate(State(app): Shared, Path(id): Path<String>, body: Bytes) -> AppResult<Response> {
    let req: AnnotateRequest = parse_json(&body)?;
    let slot = app.slot(&id)?;
    let out = match (req.phase, req.action_id) {
        (Some(phase), None) => {
            let (rec, timeline) =
                slot.write(|s| s.tag_phase(phase, req.t_ms, &req.author, req.note))?;
            json!({ "annotation": rec, "timeline": timeline })
        }
        (None, Some(action)) => {
            let rec = slot.write(|s| s.tag_action(&action, req.t_ms, &req.author, req.note, req.favorite))?;
            json!({ "annotation": rec })
        }
        _ => return Err(ApiError::bad_request("give exactly one of `phase` or `action_id`")),
    };
    Ok((StatusCode::CREATED, Json(out)).into_response())
}

#[derive(Debug, Default, Deserialize)]
struct AnnotationQuery {
    from_ms: Option<Millis>,
    to_ms: Option<Millis>,
    #[serde(default)]
    favorites: bool,
}

async fn annotations(
    State(app): Shared,
    Path(id): Path<String>,
    Query(q): Query<AnnotationQuery>,
) -> AppResult<Response> {
    let slot = app.slot(&id)?;
    let window = match (q.from_ms, q.to_ms) {
        (None, None) => None,
        (from, to) => Some(TimeWindow::new(from.unwrap_or(0), to.unwrap_or(Millis::MAX))?),
    };
    let list = slot.read(|s| {
        s.annotations()
            .list(window.as_ref(), q.favorites)
            .into_iter()
            .cloned()
            .collect::<Vec<_>>()
    });
    Ok(Json(json!({ "annotations": list })).into_response())
}

#[derive(Debug, Deserialize)]
struct SnippetQuery {
    at_ms: Millis,
}

async fn snippet(State(app): Shared, Path(id): Path<String>, Query(q): Query<SnippetQuery>) -> AppResult<Response> {
    let slot = app.slot(&id)?;
    let end = slot.timeline()?.end_ms;
    Ok(Json(snippet_range(q.at_ms, end)?).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InteractionRequest {
    #[serde(default)]
    t_wall: Option<u64>,
    actor: String,
    event: InteractionKind,
    #[serde(default)]
    payload: Value,
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

async fn log_interaction(State(app): Shared, Path(id): Path<String>, body: Bytes) -> AppResult<Response> {
    let req: InteractionRequest = parse_json(&body)?;
    let slot = app.slot(&id)?;
    let event = InteractionEvent {
        t_wall: req.t_wall.unwrap_or_else(now_ms),
        actor: req.actor,
        event: req.event,
        payload: req.payload,
    };
    let count = slot.with_log(|log| log.append(&event))?;
    Ok((StatusCode::CREATED, Json(json!({ "count": count }))).into_response())
}

async fn close_interactions(State(app): Shared, Path(id): Path<String>) -> AppResult<Response> {
    let slot = app.slot(&id)?;
    let count = slot.with_log(|log| {
        log.close();
        Ok(log.len())
    })?;
    Ok(Json(json!({ "closed": true, "count": count })).into_response())
}

async fn share_state(State(app): Shared, Path(id): Path<String>) -> AppResult<Response> {
    let slot = app.slot(&id)?;
    Ok(Json(slot.room.current()).into_response())
}
