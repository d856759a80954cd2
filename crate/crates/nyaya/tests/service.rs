mod common;

use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use nyaya::service::router;
use nyaya::{Engine, GatewayError, LlmGateway};
use nyaya_core::{ChatRequest, ChatResponse};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    raw(app, req).await
}

async fn raw(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn app_with(gateway: Arc<dyn LlmGateway>) -> (Router, Arc<Engine>, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let engine = Arc::new(common::engine(dir.path(), gateway).await);
    (router(engine.clone()), engine, dir)
}

async fn new_session(app: &Router) -> String {
    let (status, body) = call(app, Method::POST, "/v1/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    body["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn session_query_and_history() {
    let (app, _, _dir) = app_with(common::builtin_gateway()).await;
    let (status, health) = call(&app, Method::GET, "/v1/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(health["status"], "ok");
    assert_eq!(health["corpus_docs"], 25);
    assert_eq!(health["index_generation"], 1);

    let id = new_session(&app).await;
    let uri = format!("/v1/sessions/{id}/query");
    let (status, result) = call(&app, Method::POST, &uri, Some(json!({"text": "What is the punishment for theft?"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(result["domain"], "criminal");
    assert_eq!(result["complexity"], "simple");
    assert_eq!(result["compliance"]["decision"], "pass_with_disclaimer");
    assert!(!result["citations"].as_array().unwrap().is_empty());
    assert!(result["timing_ms"].is_u64());
    call(&app, Method::POST, &uri, Some(json!({"text": "What is bail?"}))).await;

    let (status, hist) = call(&app, Method::GET, &format!("/v1/sessions/{id}/history"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(hist["session_id"], id.as_str());
    assert_eq!(hist["turns"].as_array().unwrap().len(), 2);
    assert_eq!(hist["turns"][0]["final_text"], result["final_text"]);
    let (_, last) = call(&app, Method::GET, &format!("/v1/sessions/{id}/history?last_n=1"), None).await;
    let turns = last["turns"].as_array().unwrap();
    assert_eq!(turns.len(), 1);
    assert_eq!(turns[0]["ordinal"], 1);
    assert_eq!(turns[0]["user_text"], "What is bail?");
}

#[tokio::test]
async fn client_errors() {
    let (app, _, _dir) = app_with(common::builtin_gateway()).await;
    let missing = "/v1/sessions/0123456789abcdef0123456789abcdef";
    let (status, body) = call(&app, Method::POST, &format!("{missing}/query"), Some(json!({"text": "theft"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["code"], "session_not_found");
    let (status, _) = call(&app, Method::GET, &format!("{missing}/history"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, Method::GET, "/v1/sessions/..%2F..%2Fetc/history", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let id = new_session(&app).await;
    let uri = format!("/v1/sessions/{id}/query");
    let (status, body) = call(&app, Method::POST, &uri, Some(json!({"text": "  "}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "empty_query");
    let (status, body) = call(&app, Method::POST, &uri, Some(json!({"query": "theft"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "invalid_body");
    let req = Request::post(&uri).header("content-type", "application/json").body(Body::from("{not json")).unwrap();
    assert_eq!(raw(&app, req).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn ingest_then_reindex() {
    let (app, _, _dir) = app_with(common::builtin_gateway()).await;
    let documents: Vec<Value> = common::jsonl(&common::read_fixture("corpus_missing_body.jsonl"));

    let (status, body) =
        call(&app, Method::POST, "/v1/corpus/documents", Some(json!({"documents": documents, "strict": true}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "invalid_document");

    let (status, body) = call(&app, Method::POST, "/v1/corpus/documents", Some(json!({"documents": documents}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["count"], 2);
    assert_eq!(body["staged_docs"], 27);
    assert_eq!(body["errors"].as_array().unwrap().len(), 1);
    assert_eq!(body["errors"][0]["line"], 2);

    let (_, health) = call(&app, Method::GET, "/v1/health", None).await;
    assert_eq!((health["corpus_docs"].as_u64(), health["staged_docs"].as_u64()), (Some(25), Some(27)));
    let (status, health) = call(&app, Method::POST, "/v1/corpus/reindex", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(health["corpus_docs"], 27);
    assert_eq!(health["index_generation"], 2);
}

#[tokio::test]
async fn eval_endpoint() {
    let (app, _, _dir) = app_with(common::builtin_gateway()).await;
    let records: Vec<Value> = common::jsonl(&common::read_fixture("eval_dataset.jsonl"));
    let (status, body) = call(&app, Method::POST, "/v1/eval/run", Some(json!({"records": records, "k": 3}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["report"]["records"], 8);
    assert_eq!(body["report"]["retrieval_precision"]["k"], 3);
    assert!(body["text"].as_str().unwrap().contains("Error Category Distribution"));

    let bad = json!({"records": [{"query": "theft", "gold_domain": "criminal"}]});
    let (status, body) = call(&app, Method::POST, "/v1/eval/run", Some(bad)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "invalid_record");
}

#[tokio::test]
async fn unwritable_storage_is_unavailable() {
    let (app, engine, _dir) = app_with(common::builtin_gateway()).await;
    let sessions = engine.sessions().dir().to_path_buf();
    std::fs::remove_dir_all(&sessions).unwrap();
    std::fs::write(&sessions, b"not a directory").unwrap();
    let (status, body) = call(&app, Method::POST, "/v1/sessions", None).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(body["error"]["code"], "storage_unavailable");
}

struct Failing(GatewayError);

#[async_trait]
impl LlmGateway for Failing {
    async fn complete(&self, _: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        Err(self.0.clone())
    }
}

#[tokio::test]
async fn provider_failures_map_to_gateway_statuses() {
    let cases = [
        (GatewayError::Provider { status: 500, message: "boom".into() }, StatusCode::BAD_GATEWAY, "gateway_error"),
        (GatewayError::Timeout(Duration::from_secs(60)), StatusCode::GATEWAY_TIMEOUT, "gateway_timeout"),
    ];
    for (err, want, code) in cases {
        let (app, _, _dir) = app_with(Arc::new(Failing(err))).await;
        let id = new_session(&app).await;
        let uri = format!("/v1/sessions/{id}/query");
        let (status, body) = call(&app, Method::POST, &uri, Some(json!({"text": "What is the punishment for theft?"}))).await;
        assert_eq!(status, want);
        assert_eq!(body["error"]["code"], code);
        // out-of-domain questions never reach the provider
        let (status, _) = call(&app, Method::POST, &uri, Some(json!({"text": "best biryani recipe"}))).await;
        assert_eq!(status, StatusCode::OK);
    }
}
