use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use formation_genius::api::{router, ApiConfig, AppState};
use formation_genius::catalog::{load_catalog, Catalog};
use formation_genius::formation::Formation;
use formation_genius::profile::{PreferenceProfile, PreferencesDocument};
use formation_genius::session::{recommend, EventLog, Session};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)).unwrap()
}

fn catalog() -> Arc<Catalog> {
    Arc::new(load_catalog(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/catalog.json")).unwrap())
}

fn app(config: ApiConfig) -> Router {
    router(AppState::new(catalog(), config))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or(Body::empty(), |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

fn formation() -> Value {
    serde_json::from_str(&fixture_text("formation.json")).unwrap()
}

fn prefs() -> Value {
    serde_json::from_str(&fixture_text("prefs.json")).unwrap()
}

async fn new_session(app: &Router) -> String {
    let (status, body) = call(app, Method::POST, "/sessions", Some(formation())).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["version"], 1);
    body["sessionId"].as_str().unwrap().to_owned()
}

#[tokio::test]
async fn catalog_endpoints() {
    let app = app(ApiConfig::default());
    let (status, images) = call(&app, Method::GET, "/catalog/images?feature=web%20server", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(images.as_array().unwrap().len(), 5);
    let (_, all) = call(&app, Method::GET, "/catalog/images", None).await;
    assert_eq!(all.as_array().unwrap().len(), 10);
    let (_, services) = call(&app, Method::GET, "/catalog/services", None).await;
    assert_eq!(services.as_array().unwrap().len(), 5);
}

#[tokio::test]
async fn evaluate_matches_library_and_is_idempotent() {
    let app = app(ApiConfig::default());
    let id = new_session(&app).await;
    let uri = format!("/sessions/{id}/components/frontend/evaluate");
    let (status, first) = call(&app, Method::POST, &uri, Some(json!({ "preferences": prefs() }))).await;
    assert_eq!(status, StatusCode::OK, "{first}");
    let (_, second) = call(&app, Method::POST, &uri, None).await;
    assert_eq!(first, second);

    let catalog = catalog();
    let doc = PreferencesDocument::from_json(&fixture_text("prefs.json")).unwrap();
    let profile = PreferenceProfile::resolve(&doc, &catalog).unwrap();
    let direct = recommend(&catalog, &Formation::from_json(&fixture_text("formation.json")).unwrap(), "frontend", &profile).unwrap();
    assert_eq!(first, serde_json::to_value(&direct).unwrap());
}

#[tokio::test]
async fn stale_version_conflicts() {
    let app = app(ApiConfig::default());
    let id = new_session(&app).await;
    let select = format!("/sessions/{id}/components/frontend/select");
    let (status, body) = call(&app, Method::POST, &select, Some(json!({ "version": 1 }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["version"], 2);
    assert_eq!(body["candidateImages"].as_array().unwrap().len(), 5);

    let put = format!("/sessions/{id}/components/frontend/preferences");
    let (status, body) = call(&app, Method::PUT, &put, Some(json!({ "version": 1, "preferences": prefs() }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "staleVersion");
    assert_eq!(body["detail"]["current"], 2);

    let (status, body) = call(&app, Method::PUT, &put, Some(json!({ "version": 2, "preferences": prefs() }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["version"], 3);
}

#[tokio::test]
async fn full_migration_through_the_api() {
    let app = app(ApiConfig::default());
    let id = new_session(&app).await;
    for c in ["frontend", "backend", "storage"] {
        let (status, rec) = call(&app, Method::POST, &format!("/sessions/{id}/components/{c}/evaluate"), None).await;
        assert_eq!(status, StatusCode::OK, "{rec}");
        let best = rec["combinations"].as_array().unwrap().iter().find(|x| x["feasible"] == true).unwrap().clone();
        let (status, entry) = call(
            &app,
            Method::POST,
            &format!("/sessions/{id}/components/{c}/commit"),
            Some(json!({ "image": best["image"], "service": best["service"] })),
        )
        .await;
        assert_eq!(status, StatusCode::OK, "{entry}");
        assert_eq!(entry["rank"], 1);
    }
    let (_, history) = call(&app, Method::GET, &format!("/sessions/{id}/history"), None).await;
    assert_eq!(history["history"].as_array().unwrap().len(), 3);
    let (_, snapshot) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(snapshot["committed"].as_array().unwrap().len(), 3);
    assert!(snapshot["pendingComponent"].is_null());

    let (status, body) = call(&app, Method::POST, &format!("/sessions/{id}/components/frontend/select"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "alreadyCommitted");
    let (status, _) = call(&app, Method::PUT, &format!("/sessions/{id}/formation"), Some(json!({ "formation": formation() }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn error_shapes() {
    let app = app(ApiConfig::default());
    let (status, body) = call(&app, Method::GET, "/sessions/missing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "sessionNotFound");
    assert!(body["message"].is_string());

    let (status, body) = call(&app, Method::POST, "/sessions", Some(json!({ "components": [] }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "validation");

    let id = new_session(&app).await;
    let (status, body) = call(
        &app,
        Method::PUT,
        &format!("/sessions/{id}/components/frontend/preferences"),
        Some(json!({ "preferences": { "combination": { "importance": [[1, 3], [3, 1]] } } })),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "invalidMatrix");

    let (status, body) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/components/frontend/commit"),
        Some(json!({ "image": "web-1", "service": "alpha-de" })),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "notEvaluated");

    call(&app, Method::POST, &format!("/sessions/{id}/components/frontend/evaluate"), None).await;
    let (status, body) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/components/frontend/commit"),
        Some(json!({ "image": "web-1", "service": "gamma-us" })),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "infeasibleSelection");

    let (status, body) = call(&app, Method::POST, &format!("/sessions/{id}/components/ghost/select"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "unknownComponent");

    let (status, body) = call(&app, Method::POST, &format!("/sessions/{id}/components/frontend/select"), Some(json!("x"))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "parse");
}

#[tokio::test]
async fn sessions_expire() {
    let app = app(ApiConfig {
        session_ttl: Duration::from_millis(0),
        ..Default::default()
    });
    let id = new_session(&app).await;
    let (status, body) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::GONE);
    assert_eq!(body["code"], "sessionExpired");
}

#[tokio::test]
async fn persisted_log_replays() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(ApiConfig {
        log_dir: Some(dir.path().to_path_buf()),
        logical_clock: true,
        ..Default::default()
    });
    let id = new_session(&app).await;
    let (_, rec) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/components/backend/evaluate"),
        Some(json!({ "preferences": prefs() })),
    )
    .await;
    let third = &rec["combinations"][2];
    call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/components/backend/commit"),
        Some(json!({ "image": third["image"], "service": third["service"], "note": "customized" })),
    )
    .await;

    let log = EventLog::from_json(&std::fs::read_to_string(dir.path().join(format!("{id}.json"))).unwrap()).unwrap();
    let replayed = Session::replay(catalog(), &log).unwrap();
    assert_eq!(replayed.history().len(), 1);
    assert_eq!(replayed.history()[0].rank, 3);
    assert_eq!(replayed.event_log().to_json(), log.to_json());
}
