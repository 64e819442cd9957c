use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use noesis_core::fixtures::{digits_context, digits_script};
use noesis_core::session::trace_to_jsonl;
use noesis_core::{replay, serialize_context, Format, FormalContext, Implication};
use noesis_service::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

struct Reply {
    status: StatusCode,
    etag: Option<String>,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>, if_none_match: Option<&str>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(tag) = if_none_match {
        req = req.header(header::IF_NONE_MATCH, tag);
    }
    let body = match body {
        Some(v) => Body::from(serde_json::to_vec(&v).unwrap()),
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.header(header::CONTENT_TYPE, "application/json").body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let etag = resp.headers().get(header::ETAG).map(|v| v.to_str().unwrap().to_string());
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, etag, body }
}

fn ctx_json(ctx: &FormalContext) -> Value {
    serde_json::from_slice(&serialize_context(ctx, Format::Json).unwrap()).unwrap()
}

fn cue_json(cue: &Implication) -> Value {
    serde_json::to_value(cue).unwrap()
}

fn app() -> Router {
    router(Arc::new(AppState::new(None)))
}

async fn scripted_session(app: &Router) -> String {
    let r = call(
        app,
        "POST",
        "/v1/sessions",
        Some(json!({
            "context": ctx_json(&digits_context().without_objects()),
            "oracle": "scripted",
            "reference": ctx_json(&digits_context()),
        })),
        None,
    )
    .await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&r.body));
    r.json()["id"].as_str().unwrap().to_string()
}

async fn interactive_session(app: &Router) -> String {
    let r = call(
        app,
        "POST",
        "/v1/sessions",
        Some(json!({ "context": ctx_json(&digits_context().without_objects()), "oracle": "interactive" })),
        None,
    )
    .await;
    assert_eq!(r.status, StatusCode::CREATED);
    r.json()["id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn scripted_digits_session_matches_replay() {
    let app = app();
    let id = scripted_session(&app).await;
    let mut supporting = Vec::new();
    for cue in digits_script() {
        let r = call(&app, "POST", &format!("/v1/sessions/{id}/cue"), Some(cue_json(&cue)), None).await;
        assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.body));
        let step = r.json();
        assert_eq!(step["phase"], "conscious");
        supporting.push(step["oracle_answer"]["counterexample"]["name"].as_str().unwrap_or("-").to_string());
    }
    assert_eq!(supporting, ["One", "Two", "Four", "Three", "-", "-", "Six", "-", "Nine", "-"]);

    let expected = replay(&digits_context(), &digits_script()).unwrap();
    let r = call(&app, "GET", &format!("/v1/sessions/{id}/trace"), None, None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(String::from_utf8(r.body).unwrap(), expected.to_jsonl());

    let r = call(&app, "GET", &format!("/v1/sessions/{id}/lattice"), None, None).await;
    let doc = r.json();
    assert_eq!(doc["concepts"].as_array().unwrap().len(), 14);
    assert_eq!(doc["hasse"].as_array().unwrap().len(), 23);

    let state = call(&app, "GET", &format!("/v1/sessions/{id}"), None, None).await.json();
    assert_eq!(state["state"]["granule"], 9);
    assert_eq!(state["state"]["objects"], 6);
}

#[tokio::test]
async fn interactive_cue_waits_for_the_oracle() {
    let app = app();
    let id = interactive_session(&app).await;
    let cue = json!({ "premise": [], "conclusion": ["Odd", "Square"] });

    let r = call(&app, "POST", &format!("/v1/sessions/{id}/answer"), Some(json!({ "accept": true })), None).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.json()["kind"], "conflict");

    let r = call(&app, "POST", &format!("/v1/sessions/{id}/cue"), Some(cue.clone()), None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["phase"], "awaiting_oracle");
    assert_eq!(call(&app, "GET", &format!("/v1/sessions/{id}"), None, None).await.json()["phase"], "awaiting_oracle");

    // a second cue while one is open violates the protocol
    let r = call(&app, "POST", &format!("/v1/sessions/{id}/cue"), Some(cue.clone()), None).await;
    assert_eq!(r.status, StatusCode::CONFLICT);

    // Nine is odd and square, so it cannot refute the cue
    let wrong = json!({ "counterexample": { "name": "Nine", "intent": ["Composite", "Odd", "Square"] } });
    let r = call(&app, "POST", &format!("/v1/sessions/{id}/answer"), Some(wrong), None).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);

    let two = json!({ "counterexample": { "name": "Two", "intent": ["Even", "Prime"] } });
    let r = call(&app, "POST", &format!("/v1/sessions/{id}/answer"), Some(two), None).await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.body));
    let step = r.json();
    assert_eq!(step["phase"], "conscious");
    assert_eq!(step["events"].as_array().unwrap().len(), 2);

    // the cue is now locally false and settles without the oracle
    let r = call(&app, "POST", &format!("/v1/sessions/{id}/cue"), Some(cue), None).await;
    let step = r.json();
    assert_eq!(step["phase"], "conscious");
    assert_eq!(step["verdict"]["kind"], "fails");
    assert!(step["oracle_answer"].is_null());

    let r = call(&app, "POST", &format!("/v1/sessions/{id}/answer"), Some(json!({ "give_up": true })), None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["phase"], "terminal");
    let r = call(&app, "POST", &format!("/v1/sessions/{id}/cue"), Some(json!({ "premise": [], "conclusion": ["Odd"] })), None).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn accepted_cues_steer_suggestions() {
    let app = app();
    let id = interactive_session(&app).await;
    let r = call(&app, "GET", &format!("/v1/sessions/{id}/suggestion"), None, None).await;
    let first = r.json()["cue"].clone();
    assert_eq!(first["premise"], json!([]));
    call(&app, "POST", &format!("/v1/sessions/{id}/cue"), Some(first.clone()), None).await;
    let r = call(&app, "POST", &format!("/v1/sessions/{id}/answer"), Some(json!({ "accept": true })), None).await;
    assert_eq!(r.json()["phase"], "conscious");
    let next = call(&app, "GET", &format!("/v1/sessions/{id}/suggestion"), None, None).await.json()["cue"].clone();
    assert_ne!(next, first);
}

#[tokio::test]
async fn request_errors_map_to_statuses() {
    let app = app();
    let r = call(&app, "GET", "/v1/sessions/nope", None, None).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["kind"], "not_found");

    let bad = app
        .clone()
        .oneshot(Request::post("/v1/sessions").body(Body::from("{not json")).unwrap())
        .await
        .unwrap();
    assert_eq!(bad.status(), StatusCode::BAD_REQUEST);

    let r = call(&app, "POST", "/v1/sessions", Some(json!({ "oracle": "interactive" })), None).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);

    let shape = json!({ "dimensions": [{ "name": "d", "attributes": ["a"] }], "granules": {}, "incidence": [[true, false]], "objects": ["x"] });
    let r = call(&app, "POST", "/v1/sessions", Some(json!({ "context": shape, "oracle": "interactive" })), None).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);

    let ctx = ctx_json(&digits_context().without_objects());
    let r = call(&app, "POST", "/v1/sessions", Some(json!({ "context": ctx, "oracle": "scripted" })), None).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);

    let id = interactive_session(&app).await;
    let r = call(&app, "POST", &format!("/v1/sessions/{id}/cue"), Some(json!({ "premise": ["Blue"], "conclusion": ["Odd"] })), None).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    let r = call(&app, "POST", &format!("/v1/sessions/{id}/cue"), Some(json!({ "premise": ["Odd"], "conclusion": [] })), None).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    let r = call(&app, "POST", &format!("/v1/sessions/{id}/answer"), Some(json!({ "accept": true, "give_up": true })), None).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let r = call(&app, "GET", &format!("/v1/sessions/{id}/lattice?granule=7"), None, None).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let r = call(&app, "POST", "/v1/sessions/nope/cue", Some(json!({ "premise": [], "conclusion": ["Odd"] })), None).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn snapshots_carry_etags() {
    let app = app();
    let id = scripted_session(&app).await;
    for cue in digits_script().iter().take(3) {
        call(&app, "POST", &format!("/v1/sessions/{id}/cue"), Some(cue_json(cue)), None).await;
    }
    for path in ["lattice?granule=1", "ensemble?granule=2", "trace"] {
        let uri = format!("/v1/sessions/{id}/{path}");
        let first = call(&app, "GET", &uri, None, None).await;
        assert_eq!(first.status, StatusCode::OK);
        let tag = first.etag.clone().expect("etag");
        let again = call(&app, "GET", &uri, None, Some(&tag)).await;
        assert_eq!(again.status, StatusCode::NOT_MODIFIED);
        assert!(again.body.is_empty());
        let stale = call(&app, "GET", &uri, None, Some("\"stale\"")).await;
        assert_eq!(stale.status, StatusCode::OK);
        assert_eq!(stale.body, first.body);
    }
    let early = call(&app, "GET", &format!("/v1/sessions/{id}/lattice?granule=0"), None, None).await.json();
    assert_eq!(early["concepts"].as_array().unwrap().len(), 1);
    let ensemble = call(&app, "GET", &format!("/v1/sessions/{id}/ensemble?granule=0"), None, None).await.json();
    assert_eq!(ensemble["normalized"], true);
}

#[tokio::test]
async fn index_lists_sessions_in_creation_order() {
    let app = app();
    assert_eq!(call(&app, "GET", "/v1/sessions", None, None).await.json(), json!([]));
    let a = scripted_session(&app).await;
    let b = interactive_session(&app).await;
    let list = call(&app, "GET", "/v1/sessions", None, None).await.json();
    let ids: Vec<&str> = list.as_array().unwrap().iter().map(|s| s["id"].as_str().unwrap()).collect();
    assert_eq!(ids, [a.as_str(), b.as_str()]);
    assert_eq!(list[0]["oracle"], "scripted");
    assert_eq!(list[1]["phase"], "belief");
}

#[tokio::test]
async fn traces_reimport_to_the_same_session() {
    let app = app();
    let id = scripted_session(&app).await;
    for cue in digits_script() {
        call(&app, "POST", &format!("/v1/sessions/{id}/cue"), Some(cue_json(&cue)), None).await;
    }
    let trace = String::from_utf8(call(&app, "GET", &format!("/v1/sessions/{id}/trace"), None, None).await.body).unwrap();
    let r = call(
        &app,
        "POST",
        "/v1/sessions",
        Some(json!({ "context": ctx_json(&digits_context().without_objects()), "oracle": "interactive", "trace": trace })),
        None,
    )
    .await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&r.body));
    let copy = r.json()["id"].as_str().unwrap().to_string();
    let lhs = call(&app, "GET", &format!("/v1/sessions/{id}/lattice"), None, None).await;
    let rhs = call(&app, "GET", &format!("/v1/sessions/{copy}/lattice"), None, None).await;
    assert_eq!(lhs.body, rhs.body);

    let tampered = trace.replacen("\"kind\":\"fails\"", "\"kind\":\"holds\"", 1);
    let r = call(
        &app,
        "POST",
        "/v1/sessions",
        Some(json!({ "context": ctx_json(&digits_context().without_objects()), "oracle": "interactive", "trace": tampered })),
        None,
    )
    .await;
    assert_ne!(r.status, StatusCode::CREATED);
}

#[tokio::test]
async fn scenario_bodies_are_scaled() {
    let app = app();
    let scenario = serde_json::to_value(noesis_core::fixtures::apple_scenario()).unwrap();
    let r = call(&app, "POST", "/v1/sessions", Some(json!({ "scenario": scenario, "oracle": "interactive" })), None).await;
    assert_eq!(r.status, StatusCode::CREATED);
    let id = r.json()["id"].as_str().unwrap().to_string();
    let lattice = call(&app, "GET", &format!("/v1/sessions/{id}/lattice"), None, None).await.json();
    assert_eq!(lattice["concepts"][0]["extent"], json!(["apple"]));
}

#[tokio::test]
async fn trace_dir_is_written_through() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(Arc::new(AppState::new(Some(dir.path().to_path_buf()))));
    let id = scripted_session(&app).await;
    for cue in digits_script() {
        call(&app, "POST", &format!("/v1/sessions/{id}/cue"), Some(cue_json(&cue)), None).await;
    }
    let written = std::fs::read_to_string(dir.path().join(format!("{id}.jsonl"))).unwrap();
    assert_eq!(written, replay(&digits_context(), &digits_script()).unwrap().to_jsonl());
    assert!(dir.path().join(format!("{id}.context.json")).exists());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_cues_are_linearizable() {
    let app = app();
    let id = scripted_session(&app).await;
    let script = digits_script();
    let mut handles = Vec::new();
    for cue in script.clone() {
        let app = app.clone();
        let uri = format!("/v1/sessions/{id}/cue");
        handles.push(tokio::spawn(async move { call(&app, "POST", &uri, Some(cue_json(&cue)), None).await.status }));
    }
    for h in handles {
        assert_eq!(h.await.unwrap(), StatusCode::OK);
    }
    let trace = String::from_utf8(call(&app, "GET", &format!("/v1/sessions/{id}/trace"), None, None).await.body).unwrap();
    let applied: Vec<Implication> = trace
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .filter(|e| e["learning_cue"].is_null())
        .filter_map(|e| e["measurement_cue"].as_object().cloned())
        .map(|m| serde_json::from_value(Value::Object(m)).unwrap())
        .collect();
    assert_eq!(applied.len(), script.len());
    let mut sorted_applied = applied.iter().map(|c| c.to_string()).collect::<Vec<_>>();
    let mut sorted_script = script.iter().map(|c| c.to_string()).collect::<Vec<_>>();
    sorted_applied.sort();
    sorted_script.sort();
    assert_eq!(sorted_applied, sorted_script);
    // whatever order the server chose, the outcome equals running that order sequentially
    let sequential = replay(&digits_context(), &applied).unwrap();
    assert_eq!(trace, trace_to_jsonl(&sequential.events));
}
