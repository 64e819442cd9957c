//! HTTP+JSON front end for learning sessions.
//!
//! Sessions live in memory. Each one sits behind its own mutex so requests to
//! one session are applied in some sequential order; snapshots are computed
//! from a cloned session outside the lock. With a trace directory configured,
//! every mutation rewrites `<id>.jsonl` (the trace) next to
//! `<id>.context.json` (the initial context), which together are enough to
//! re-import the session.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use noesis_core::session::{trace_from_jsonl, trace_to_jsonl, CueOpening};
use noesis_core::{
    parse_context, scale_scenario, serialize_context, ContextError, FormalContext, Format, Implication, LatticeError,
    OracleAnswer, OracleKind, Phase, Scenario, ScriptedOracle, Session, SessionError, SupportingObject, TimeGranule,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tower_http::cors::CorsLayer;

/// Environment variable holding the bind address.
pub const ADDR_ENV: &str = "NOESIS_ADDR";
pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),
    #[error("no session `{0}`")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let kind = match self {
            ApiError::BadRequest(_) => "bad_request",
            ApiError::NotFound(_) => "not_found",
            ApiError::Conflict(_) => "conflict",
            ApiError::Unprocessable(_) => "unprocessable",
            ApiError::Internal(_) => "internal",
        };
        (self.status(), Json(json!({ "error": self.to_string(), "kind": kind }))).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let msg = e.to_string();
        match e {
            SessionError::ProtocolViolation(_) => ApiError::Conflict(msg),
            SessionError::Context(ContextError::DuplicateName(_))
            | SessionError::Lattice(LatticeError::Context(ContextError::DuplicateName(_))) => ApiError::Conflict(msg),
            SessionError::UnknownGranule { .. } | SessionError::Trace(_) => ApiError::BadRequest(msg),
            SessionError::EmptyBasis
            | SessionError::NotACounterexample { .. }
            | SessionError::Lattice(_)
            | SessionError::Context(_)
            | SessionError::InconsistentReference(_) => ApiError::Unprocessable(msg),
            SessionError::OracleUnavailable(_) | SessionError::Ensemble(_) => ApiError::Internal(msg),
        }
    }
}

struct Entry {
    id: String,
    created_at: u64,
    session: Session,
    oracle: Option<ScriptedOracle>,
}

#[derive(Default)]
pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Mutex<Entry>>>>,
    order: Mutex<Vec<String>>,
    trace_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(trace_dir: Option<PathBuf>) -> Self {
        AppState { trace_dir, ..Default::default() }
    }

    fn entry(&self, id: &str) -> Result<Arc<Mutex<Entry>>, ApiError> {
        self.sessions
            .read()
            .expect("session index poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(id.to_string()))
    }

    fn persist(&self, entry: &Entry) -> Result<(), ApiError> {
        let Some(dir) = &self.trace_dir else { return Ok(()) };
        let io = |e: std::io::Error| ApiError::Internal(format!("writing trace: {e}"));
        std::fs::create_dir_all(dir).map_err(io)?;
        let initial = serialize_context(entry.session.initial_context(), Format::Json).map_err(|e| ApiError::Internal(e.to_string()))?;
        std::fs::write(dir.join(format!("{}.context.json", entry.id)), initial).map_err(io)?;
        std::fs::write(dir.join(format!("{}.jsonl", entry.id)), trace_to_jsonl(entry.session.trace())).map_err(io)?;
        Ok(())
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/sessions", get(list_sessions).post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/cue", post(pose_cue))
        .route("/v1/sessions/{id}/answer", post(answer))
        .route("/v1/sessions/{id}/suggestion", get(suggestion))
        .route("/v1/sessions/{id}/lattice", get(lattice))
        .route("/v1/sessions/{id}/ensemble", get(ensemble))
        .route("/v1/sessions/{id}/trace", get(trace))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Binds `addr` and serves until the process ends.
pub async fn serve(addr: SocketAddr, trace_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(AppState::new(trace_dir)))).await
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("malformed body: {e}")))
}

fn context_from_value(v: &Value) -> Result<FormalContext, ApiError> {
    let bytes = serde_json::to_vec(v).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    parse_context(&bytes, Format::Json).map_err(|e| ApiError::BadRequest(format!("invalid context: {e}")))
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    context: Option<Value>,
    scenario: Option<Scenario>,
    oracle: OracleKind,
    reference: Option<Value>,
    /// JSON Lines trace to re-import on top of `context`.
    trace: Option<String>,
}

#[derive(Serialize)]
struct SessionView {
    id: String,
    created_at: u64,
    oracle: OracleKind,
    /// `awaiting_oracle` while an interactive cue waits for its answer.
    phase: String,
    state: noesis_core::SessionState,
}

fn view(entry: &Entry) -> SessionView {
    let phase = if entry.session.awaiting().is_some() { "awaiting_oracle".to_string() } else { entry.session.phase().to_string() };
    SessionView {
        id: entry.id.clone(),
        created_at: entry.created_at,
        oracle: entry.session.oracle_kind(),
        phase,
        state: entry.session.state(),
    }
}

async fn list_sessions(State(app): State<Arc<AppState>>) -> Result<Json<Vec<SessionView>>, ApiError> {
    let ids = app.order.lock().expect("order poisoned").clone();
    let mut out = Vec::with_capacity(ids.len());
    for id in ids {
        let entry = app.entry(&id)?;
        let entry = entry.lock().expect("session poisoned");
        out.push(view(&entry));
    }
    Ok(Json(out))
}

async fn create_session(State(app): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateRequest = parse_body(&body)?;
    let initial = match (&req.context, &req.scenario) {
        (Some(ctx), None) => context_from_value(ctx)?,
        (None, Some(s)) => scale_scenario(s).map_err(|e| ApiError::BadRequest(e.to_string()))?.0,
        _ => return Err(ApiError::BadRequest("give exactly one of `context` or `scenario`".into())),
    };
    let oracle = match (req.oracle, &req.reference) {
        (OracleKind::Scripted, Some(r)) => Some(ScriptedOracle::new(context_from_value(r)?)),
        (OracleKind::Scripted, None) => return Err(ApiError::Unprocessable("scripted sessions need a `reference` context".into())),
        (OracleKind::Interactive, _) => None,
    };
    if let Some(o) = &oracle {
        if o.reference().attributes() != initial.attributes() {
            return Err(ApiError::Unprocessable("reference and context declare different attributes".into()));
        }
    }
    let session = match &req.trace {
        Some(text) => Session::from_trace(initial, req.oracle, &trace_from_jsonl(text)?)?,
        None => Session::start(initial, req.oracle)?,
    };
    let entry = Entry { id: uuid::Uuid::new_v4().to_string(), created_at: now(), session, oracle };
    app.persist(&entry)?;
    let body = view(&entry);
    let id = entry.id.clone();
    app.sessions.write().expect("session index poisoned").insert(id.clone(), Arc::new(Mutex::new(entry)));
    app.order.lock().expect("order poisoned").push(id);
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let entry = app.entry(&id)?;
    let entry = entry.lock().expect("session poisoned");
    Ok(Json(view(&entry)))
}

#[derive(Serialize)]
struct StepResponse {
    phase: String,
    granule: u64,
    verdict: Option<noesis_core::Verdict>,
    oracle_answer: Option<noesis_core::session::OracleReply>,
    pending: Option<Implication>,
    counterexample: Option<SupportingObject>,
    events: Vec<noesis_core::TraceEvent>,
}

fn step_response(entry: &Entry, events: Vec<noesis_core::TraceEvent>) -> StepResponse {
    let v = view(entry);
    let first = events.first();
    StepResponse {
        phase: v.phase,
        granule: v.state.granule,
        verdict: first.and_then(|e| e.local_verdict.clone()),
        oracle_answer: first.and_then(|e| e.oracle_answer.clone()),
        pending: v.state.pending,
        counterexample: v.state.counterexample,
        events,
    }
}

async fn pose_cue(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Result<Json<StepResponse>, ApiError> {
    let cue: Implication = parse_body(&body)?;
    if cue.conclusion.is_empty() {
        return Err(ApiError::Unprocessable(LatticeError::EmptyConclusion.to_string()));
    }
    let entry = app.entry(&id)?;
    let mut guard = entry.lock().expect("session poisoned");
    let entry = &mut *guard;
    let events = match entry.oracle.as_mut() {
        Some(oracle) => {
            let mut events = vec![entry.session.pose_cue(cue, oracle)?];
            if entry.session.phase() == Phase::Uncertain {
                events.push(entry.session.resolve_with_oracle_counterexample()?);
            }
            events
        }
        None => match entry.session.open_cue(cue)? {
            CueOpening::Settled(event) => vec![event],
            CueOpening::AwaitingOracle { local_verdict } => {
                let mut resp = step_response(entry, vec![]);
                resp.verdict = Some(local_verdict);
                return Ok(Json(resp));
            }
        },
    };
    app.persist(entry)?;
    Ok(Json(step_response(entry, events)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerRequest {
    #[serde(default)]
    accept: bool,
    #[serde(default)]
    give_up: bool,
    counterexample: Option<SupportingObject>,
}

async fn answer(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Result<Json<StepResponse>, ApiError> {
    let req: AnswerRequest = parse_body(&body)?;
    let answer = match (req.accept, req.give_up, req.counterexample) {
        (true, false, None) => OracleAnswer::Accept,
        (false, true, None) => OracleAnswer::GiveUp,
        (false, false, Some(obj)) => OracleAnswer::Counterexample(obj),
        _ => return Err(ApiError::BadRequest("give exactly one of `accept`, `give_up` or `counterexample`".into())),
    };
    let entry = app.entry(&id)?;
    let mut guard = entry.lock().expect("session poisoned");
    let session = &mut guard.session;
    let mut events = Vec::new();
    if session.awaiting().is_some() {
        let resolving = match &answer {
            OracleAnswer::Counterexample(obj) => Some(obj.clone()),
            _ => None,
        };
        events.push(session.answer(answer)?);
        if let Some(obj) = resolving {
            events.push(session.resolve(obj)?);
        }
    } else {
        match (session.phase(), answer) {
            (Phase::Uncertain, OracleAnswer::Counterexample(obj)) => events.push(session.resolve(obj)?),
            (Phase::Terminal, _) => return Err(ApiError::Conflict("session has terminated".into())),
            (_, OracleAnswer::GiveUp) => events.push(session.give_up()?),
            (Phase::Uncertain, _) => return Err(ApiError::Conflict("the pending cue needs a counterexample".into())),
            _ => return Err(ApiError::Conflict("no cue is awaiting an answer".into())),
        }
    }
    app.persist(&guard)?;
    Ok(Json(step_response(&guard, events)))
}

async fn suggestion(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let entry = app.entry(&id)?;
    let session = entry.lock().expect("session poisoned").session.clone();
    Ok(Json(json!({ "cue": session.suggest_cue() })))
}

#[derive(Deserialize)]
struct GranuleQuery {
    granule: Option<u64>,
}

fn snapshot_session(app: &AppState, id: &str) -> Result<Session, ApiError> {
    let entry = app.entry(id)?;
    let session = entry.lock().expect("session poisoned").session.clone();
    Ok(session)
}

/// Serves `body` with a content-hash ETag, or 304 when the client already has it.
fn tagged(headers: &HeaderMap, content_type: &'static str, body: String) -> Response {
    let digest = Sha256::digest(body.as_bytes());
    let etag = format!("\"{}\"", hex::encode(&digest[..16]));
    if headers.get(header::IF_NONE_MATCH).and_then(|v| v.to_str().ok()) == Some(etag.as_str()) {
        return (StatusCode::NOT_MODIFIED, [(header::ETAG, etag)]).into_response();
    }
    let mut resp = (StatusCode::OK, body).into_response();
    resp.headers_mut().insert(header::CONTENT_TYPE, HeaderValue::from_static(content_type));
    resp.headers_mut().insert(header::ETAG, HeaderValue::from_str(&etag).expect("hex etag is a valid header"));
    resp
}

async fn lattice(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<GranuleQuery>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let session = snapshot_session(&app, &id)?;
    let granule = q.granule.map_or(session.granule(), TimeGranule);
    let (lattice, _) = session.snapshot(granule)?;
    Ok(tagged(&headers, "application/json", lattice.to_json()))
}

async fn ensemble(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<GranuleQuery>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let session = snapshot_session(&app, &id)?;
    let granule = q.granule.map_or(session.granule(), TimeGranule);
    let (_, ensemble) = session.snapshot(granule)?;
    Ok(tagged(&headers, "application/json", ensemble.to_json()))
}

async fn trace(State(app): State<Arc<AppState>>, Path(id): Path<String>, headers: HeaderMap) -> Result<Response, ApiError> {
    let session = snapshot_session(&app, &id)?;
    Ok(tagged(&headers, "application/x-ndjson", trace_to_jsonl(session.trace())))
}
