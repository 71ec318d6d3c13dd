//! HTTP service over catalogs and migration sessions.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::catalog::{Catalog, CloudService, VmImage};
use crate::error::Error;
use crate::formation::{Formation, FormationDocument};
use crate::profile::PreferencesDocument;
use crate::session::{Clock, Session};

pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(60 * 60);

#[derive(Debug, Clone)]
pub struct ApiConfig {
    pub session_ttl: Duration,
    /// Directory receiving `<sessionId>.json` event logs after each mutation.
    pub log_dir: Option<PathBuf>,
    /// Use logical event timestamps instead of wall-clock milliseconds.
    pub logical_clock: bool,
}

impl Default for ApiConfig {
    fn default() -> Self {
        ApiConfig {
            session_ttl: DEFAULT_SESSION_TTL,
            log_dir: None,
            logical_clock: false,
        }
    }
}

struct ApiSession {
    session: Session,
    version: u64,
    expires: Instant,
}

pub struct AppState {
    catalog: Arc<Catalog>,
    config: ApiConfig,
    sessions: Mutex<HashMap<String, Arc<Mutex<ApiSession>>>>,
}

impl AppState {
    pub fn new(catalog: Arc<Catalog>, config: ApiConfig) -> Arc<AppState> {
        Arc::new(AppState {
            catalog,
            config,
            sessions: Mutex::new(HashMap::new()),
        })
    }

    fn lookup(&self, id: &str) -> Result<Arc<Mutex<ApiSession>>, ApiError> {
        let mut sessions = self.sessions.lock().expect("session table poisoned");
        let entry = sessions.get(id).cloned().ok_or_else(|| {
            ApiError::new(StatusCode::NOT_FOUND, "sessionNotFound", format!("no session `{id}`"))
        })?;
        let mut s = entry.lock().expect("session poisoned");
        if s.expires <= Instant::now() {
            drop(s);
            sessions.remove(id);
            return Err(ApiError::new(StatusCode::GONE, "sessionExpired", format!("session `{id}` expired")));
        }
        s.expires = Instant::now() + self.config.session_ttl;
        drop(s);
        Ok(entry)
    }

    fn persist(&self, s: &Session) -> Result<(), ApiError> {
        let Some(dir) = &self.config.log_dir else {
            return Ok(());
        };
        let path = dir.join(format!("{}.json", s.id()));
        std::fs::write(&path, s.event_log().to_json()).map_err(|source| ApiError::from(Error::Io { path, source }))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    detail: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            detail: Value::Null,
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        use StatusCode as S;
        let (status, code, detail) = match &e {
            Error::Io { path, .. } => (S::INTERNAL_SERVER_ERROR, "io", json!({ "path": path })),
            Error::Parse { what, .. } => (S::BAD_REQUEST, "parse", json!({ "document": what })),
            Error::Validation { entity, id, field, .. } => (
                S::UNPROCESSABLE_ENTITY,
                "validation",
                json!({ "entity": entity, "id": id, "field": field }),
            ),
            Error::TypeMismatch { attribute, expected } => (
                S::UNPROCESSABLE_ENTITY,
                "typeMismatch",
                json!({ "attribute": attribute, "expected": expected }),
            ),
            Error::InvalidMatrix(_) => (S::UNPROCESSABLE_ENTITY, "invalidMatrix", Value::Null),
            Error::MissingMatrix(node) => (S::UNPROCESSABLE_ENTITY, "missingMatrix", json!({ "node": node })),
            Error::NegativeValue { id, .. } => (S::UNPROCESSABLE_ENTITY, "negativeValue", json!({ "id": id })),
            Error::EmptyRanking => (S::UNPROCESSABLE_ENTITY, "emptyRanking", Value::Null),
            Error::NoFeasibleCombination(c) => {
                (S::UNPROCESSABLE_ENTITY, "noFeasibleCombination", json!({ "component": c }))
            }
            Error::UnknownComponent(c) => (S::NOT_FOUND, "unknownComponent", json!({ "component": c })),
            Error::AlreadyCommitted(c) => (S::CONFLICT, "alreadyCommitted", json!({ "component": c })),
            Error::NoPendingComponent => (S::CONFLICT, "noPendingComponent", Value::Null),
            Error::NotEvaluated(c) => (S::CONFLICT, "notEvaluated", json!({ "component": c })),
            Error::InfeasibleSelection { image, service } => (
                S::UNPROCESSABLE_ENTITY,
                "infeasibleSelection",
                json!({ "image": image, "service": service }),
            ),
            Error::ReplayMismatch { index, .. } => (S::INTERNAL_SERVER_ERROR, "replayMismatch", json!({ "index": index })),
        };
        ApiError {
            status,
            code,
            message: e.to_string(),
            detail,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "code": self.code, "message": self.message, "detail": self.detail });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult = Result<(StatusCode, Json<Value>), ApiError>;

fn parse_body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    let bytes: &[u8] = if bytes.iter().all(u8::is_ascii_whitespace) { b"{}" } else { bytes };
    serde_json::from_slice(bytes).map_err(|e| Error::parse("request body", e).into())
}

fn check_version(s: &ApiSession, expected: Option<u64>) -> Result<(), ApiError> {
    match expected {
        Some(v) if v != s.version => Err(ApiError {
            status: StatusCode::CONFLICT,
            code: "staleVersion",
            message: format!("session is at version {}, request was based on {v}", s.version),
            detail: json!({ "current": s.version, "given": v }),
        }),
        _ => Ok(()),
    }
}

fn ok(body: Value) -> ApiResult {
    Ok((StatusCode::OK, Json(body)))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/catalog/images", get(list_images))
        .route("/catalog/services", get(list_services))
        .route("/sessions", post(create_session))
        .route("/sessions/:id", get(get_session))
        .route("/sessions/:id/formation", put(put_formation))
        .route("/sessions/:id/history", get(get_history))
        .route("/sessions/:id/components/:c/select", post(select))
        .route("/sessions/:id/components/:c/preferences", put(put_preferences))
        .route("/sessions/:id/components/:c/evaluate", post(evaluate))
        .route("/sessions/:id/components/:c/commit", post(commit))
        .with_state(state)
}

#[derive(Deserialize)]
struct FeatureQuery {
    feature: Option<String>,
}

async fn list_images(State(state): State<Arc<AppState>>, Query(q): Query<FeatureQuery>) -> Json<Vec<VmImage>> {
    let images = match &q.feature {
        Some(f) => state.catalog.images_with_feature(f).into_iter().cloned().collect(),
        None => state.catalog.images().to_vec(),
    };
    Json(images)
}

async fn list_services(State(state): State<Arc<AppState>>) -> Json<Vec<CloudService>> {
    Json(state.catalog.services().to_vec())
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let doc: FormationDocument = parse_body(&body)?;
    let formation = Formation::from_document(doc)?;
    let warnings = formation.warnings().to_vec();
    let id = uuid::Uuid::new_v4().to_string();
    let clock = if state.config.logical_clock { Clock::Logical(0) } else { Clock::System };
    let session = Session::new(id.clone(), state.catalog.clone(), formation, clock);
    state.persist(&session)?;
    let now = Instant::now();
    let mut sessions = state.sessions.lock().expect("session table poisoned");
    sessions.retain(|_, s| s.lock().map(|s| s.expires > now).unwrap_or(false));
    sessions.insert(
        id.clone(),
        Arc::new(Mutex::new(ApiSession {
            session,
            version: 1,
            expires: now + state.config.session_ttl,
        })),
    );
    tracing::info!(session = %id, "session created");
    Ok((StatusCode::CREATED, Json(json!({ "sessionId": id, "version": 1, "warnings": warnings }))))
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let entry = state.lookup(&id)?;
    let s = entry.lock().expect("session poisoned");
    let mut body = serde_json::to_value(s.session.snapshot()).expect("snapshot serializes");
    body["version"] = json!(s.version);
    ok(body)
}

async fn get_history(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let entry = state.lookup(&id)?;
    let s = entry.lock().expect("session poisoned");
    ok(json!({ "history": s.session.history(), "version": s.version }))
}

/// Runs `f` on the locked session after the version check, then bumps the
/// version and persists the log.
fn mutate(
    state: &AppState,
    id: &str,
    version: Option<u64>,
    f: impl FnOnce(&mut Session) -> Result<Value, Error>,
) -> Result<(Value, u64), ApiError> {
    let entry = state.lookup(id)?;
    let mut s = entry.lock().expect("session poisoned");
    check_version(&s, version)?;
    let out = f(&mut s.session)?;
    s.version += 1;
    state.persist(&s.session)?;
    Ok((out, s.version))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct FormationBody {
    version: Option<u64>,
    formation: FormationDocument,
}

async fn put_formation(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let body: FormationBody = parse_body(&body)?;
    let formation = Formation::from_document(body.formation)?;
    let warnings = formation.warnings().to_vec();
    let (_, version) = mutate(&state, &id, body.version, |s| s.redefine_formation(formation).map(|_| Value::Null))?;
    ok(json!({ "version": version, "warnings": warnings }))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct VersionBody {
    version: Option<u64>,
}

async fn select(State(state): State<Arc<AppState>>, Path((id, c)): Path<(String, String)>, body: Bytes) -> ApiResult {
    let body: VersionBody = parse_body(&body)?;
    let (out, version) = mutate(&state, &id, body.version, |s| {
        let pool = s.select_component(&c)?.to_vec();
        let mut warnings = Vec::new();
        if pool.is_empty() {
            warnings.push(format!("no image matches the feature of component `{c}`"));
        }
        Ok(json!({ "component": c, "candidateImages": pool, "warnings": warnings }))
    })?;
    let mut out = out;
    out["version"] = json!(version);
    ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PreferencesBody {
    version: Option<u64>,
    preferences: PreferencesDocument,
}

async fn put_preferences(
    State(state): State<Arc<AppState>>,
    Path((id, c)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult {
    let body: PreferencesBody = parse_body(&body)?;
    let (mut out, version) = mutate(&state, &id, body.version, |s| {
        let p = s.set_preferences(&c, body.preferences)?;
        Ok(json!({
            "component": c,
            "policy": p.policy,
            "weights": {"image": p.image_weights.leaves, "service": p.service_weights.leaves},
            "warnings": p.warnings,
        }))
    })?;
    out["version"] = json!(version);
    ok(out)
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct EvaluateBody {
    version: Option<u64>,
    preferences: Option<PreferencesDocument>,
}

/// Selects the component if needed, stores any supplied preferences and
/// evaluates. The body is the recommendation alone, so repeating the call
/// without other changes yields the same bytes.
async fn evaluate(State(state): State<Arc<AppState>>, Path((id, c)): Path<(String, String)>, body: Bytes) -> ApiResult {
    let body: EvaluateBody = parse_body(&body)?;
    let (out, _) = mutate(&state, &id, body.version, |s| {
        if s.pending() != Some(c.as_str()) {
            s.select_component(&c)?;
        }
        if let Some(p) = body.preferences {
            s.set_preferences(&c, p)?;
        }
        Ok(serde_json::to_value(s.evaluate()?).expect("recommendation serializes"))
    })?;
    ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CommitBody {
    version: Option<u64>,
    image: String,
    service: String,
    note: Option<String>,
}

async fn commit(State(state): State<Arc<AppState>>, Path((id, c)): Path<(String, String)>, body: Bytes) -> ApiResult {
    let body: CommitBody = parse_body(&body)?;
    let (mut out, version) = mutate(&state, &id, body.version, |s| {
        if s.pending() != Some(c.as_str()) {
            return Err(Error::NotEvaluated(c.clone()));
        }
        let entry = s.commit(&body.image, &body.service, body.note)?;
        Ok(serde_json::to_value(entry).expect("history serializes"))
    })?;
    out["version"] = json!(version);
    ok(out)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: SocketAddr, catalog: Arc<Catalog>, config: ApiConfig) -> anyhow::Result<()> {
    if let Some(dir) = &config.log_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| anyhow::anyhow!("cannot create log directory {}: {e}", dir.display()))?;
    }
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| anyhow::anyhow!("cannot listen on {addr}: {e}"))?;
    tracing::info!(%addr, "serving");
    axum::serve(listener, router(AppState::new(catalog, config))).await?;
    Ok(())
}
