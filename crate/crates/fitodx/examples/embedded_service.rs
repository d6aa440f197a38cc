//! Hosts the session service in-process and drives one consultation through
//! the router without opening a socket: create a session, answer every
//! pending question, then fetch the explanation.
//!
//! ```text
//! cargo run -p fitodx --example embedded_service
//! ```

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use fitodx::service::{router, AppState, ServiceConfig};
use fitodx_core::reference::reference_kb;

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::main]
async fn main() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig {
        log_path: dir.path().join("sessions.jsonl"),
        ..ServiceConfig::default()
    };
    let kb = reference_kb().map_err(|_| "invalid reference KB").unwrap();
    let (state, _) = AppState::new(Ok(kb), &config).unwrap();
    let app = router(state);

    let (_, summary) = call(&app, "GET", "/v1/kb", None).await;
    println!("serving {:?} with {} crops", summary["title"], summary["crops"].as_array().unwrap().len());

    let yes = ["principal.es_tabaco", "tabaco.p3", "tabaco.p9", "tabaco.p12"];
    let (status, mut step) = call(&app, "POST", "/v1/sessions", Some(json!({"client_note": "demo"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = step["session_id"].as_str().unwrap().to_string();
    while let Some(pending) = step.get("pending").cloned() {
        let question = pending["question_id"].as_str().unwrap();
        let answer = if yes.contains(&question) { "si" } else { "no" };
        println!("[{}] {} -> {answer}", pending["ordinal"], pending["prompt"].as_str().unwrap().trim());
        let body = json!({"question_id": question, "answer": answer});
        (_, step) = call(&app, "POST", &format!("/v1/sessions/{id}/answers"), Some(body)).await;
    }
    println!("result: {}", step["result"]["diagnosis"]["name"]);

    let (_, explanation) = call(&app, "GET", &format!("/v1/sessions/{id}/explanation"), None).await;
    println!("fired: {}", explanation["fired"]);
    println!("{} supporting answers", explanation["supporting"].as_array().unwrap().len());

    let log = std::fs::read_to_string(&config.log_path).unwrap();
    println!("log holds {} lines", log.lines().count());
}
