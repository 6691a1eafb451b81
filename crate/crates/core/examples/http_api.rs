//! Drives the HTTP API in-process: create a session over an inline model,
//! stream events, ask a boolean and a wildcard query, request an
//! explanation, close the trace and read the session state.
//!
//! cargo run --example http_api
//! (`procsift serve` exposes the same router on a socket.)

use axum::body::Body;
use axum::http::{Method, Request};
use http_body_util::BodyExt;
use procsift::fixtures::CARE_RESTRICTED_JSON;
use procsift::service::{router, AppState, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &axum::Router, method: Method, uri: &str, body: Option<Value>) -> Result<(u16, Value), Box<dyn std::error::Error>> {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))?;
    let resp = app.clone().oneshot(req).await?;
    let status = resp.status().as_u16();
    let bytes = resp.into_body().collect().await?.to_bytes();
    Ok((status, serde_json::from_slice(&bytes).unwrap_or(Value::Null)))
}

#[tokio::main(flavor = "current_thread")]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let app = router(AppState::new(ServiceConfig::default()));
    let model: Value = serde_json::from_str(CARE_RESTRICTED_JSON)?;

    let (status, created) = call(&app, Method::POST, "/sessions", Some(json!({"v": 1, "model": model}))).await?;
    println!("{status} {created}");
    let id = created["id"].as_str().ok_or("no session id")?.to_string();

    for etype in ["BloodSample", "BloodPressure", "Temperature", "CannulaInsertion"] {
        let (status, step) = call(&app, Method::POST, &format!("/sessions/{id}/events"), Some(json!({"event": {"type": etype}}))).await?;
        println!("{status} #{} {etype} -> {} valid {}", step["index"], step["top"], step["valid"]);
    }
    let queries = [
        ("query", json!({"index": 4, "activity": "A2", "step": "last", "instance": 1})),
        ("query", json!({"index": 4, "activity": "A1"})),
        ("explain", json!({"index": 4, "activity": "A1"})),
        ("finalize", json!({})),
    ];
    for (path, body) in queries {
        let (status, v) = call(&app, Method::POST, &format!("/sessions/{id}/{path}"), Some(body)).await?;
        println!("{status} {path}: {v}");
    }
    let (status, state) = call(&app, Method::GET, &format!("/sessions/{id}/state"), None).await?;
    println!("{status} state: {} events, finalized {}", state["events"].as_array().map_or(0, Vec::len), state["finalized"]);
    let (status, err) = call(&app, Method::POST, "/sessions/nope/events", Some(json!({"event": {"type": "Temperature"}}))).await?;
    println!("{status} unknown session: {err}");
    Ok(())
}
