use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use wltscan::hitl::http::{router, ApiConfig, ANNOTATOR_HEADER};
use wltscan::hitl::sim::synthetic_seeds;
use wltscan::hitl::{HitlConfig, Service};
use wltscan::model::WordFilter;
use wltscan::socialgraph::{synthesize_source, SyntheticParams};

fn service() -> Arc<Service> {
    let source = synthesize_source(3, &SyntheticParams::default()).unwrap();
    let (posts, users) = synthetic_seeds(&source, 3, 9);
    let config = HitlConfig { n_bootstrap: 3, k: 10, seed: 3, ..HitlConfig::default() };
    let service = Service::bootstrap(
        Arc::new(source.corpus().clone()),
        &posts,
        &users,
        config,
        Arc::new(WordFilter::default()),
        None,
    )
    .unwrap();
    Arc::new(service)
}

fn app(service: &Arc<Service>) -> Router {
    let media = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/media");
    router(service.clone(), ApiConfig { media_root: Some(media), ..ApiConfig::default() })
}

async fn call(app: &Router, method: &str, uri: &str, who: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(w) = who {
        req = req.header(ANNOTATOR_HEADER, w);
    }
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn queue_ids(v: &Value) -> Vec<String> {
    v["items"].as_array().unwrap().iter().map(|i| i["post_id"].as_str().unwrap().to_string()).collect()
}

#[tokio::test]
async fn state_and_queue() {
    let svc = service();
    let app = app(&svc);
    let (status, state) = call(&app, "GET", "/api/state", None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(state["round_index"], 0);
    assert!(state["pending"].as_u64().unwrap() > 0);
    assert_eq!(state["labeled"], state["adopted"]["seed"]);

    let (status, err) = call(&app, "GET", "/api/queue", None, None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(err["error"].as_str().unwrap().contains("annotator"));

    let (status, q) = call(&app, "GET", "/api/queue?limit=2", Some("alice"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(q["annotator_id"], "alice");
    assert_eq!(q["items"].as_array().unwrap().len(), 2);
    assert_eq!(q["remaining"], state["pending"]);
    for item in q["items"].as_array().unwrap() {
        assert!(item.get("score").is_none());
        let text = item["text"].as_str().unwrap();
        assert!(!text.contains("http") && !text.contains('@'), "{text}");
    }
    let (_, by_query) = call(&app, "GET", "/api/queue?annotator=alice&limit=2", None, None).await;
    assert_eq!(by_query, q);
}

#[tokio::test]
async fn annotation_merge_outcomes() {
    let svc = service();
    let app = app(&svc);
    let (_, q) = call(&app, "GET", "/api/queue", Some("a"), None).await;
    let ids = queue_ids(&q);
    assert!(ids.len() >= 3);

    let post = |id: &str, label: Value| json!({ "post_id": id, "label": label });
    let (status, first) = call(&app, "POST", "/api/annotations", Some("a"), Some(post(&ids[0], json!("wlt")))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(first["status"], "awaiting");
    let (_, second) = call(&app, "POST", "/api/annotations", Some("b"), Some(post(&ids[0], json!(1)))).await;
    assert_eq!(second["status"], "adopted");
    assert_eq!(second["label"], 1);
    assert_eq!(second["post_id"], ids[0].as_str());

    call(&app, "POST", "/api/annotations", Some("a"), Some(post(&ids[1], json!("wlt")))).await;
    let (_, conflict) = call(&app, "POST", "/api/annotations", Some("b"), Some(post(&ids[1], json!("normal")))).await;
    assert_eq!(conflict["status"], "conflict_excluded");

    let skip = json!({ "post_id": ids[2], "skip": true });
    let (_, recycled) = call(&app, "POST", "/api/annotations", Some("a"), Some(skip)).await;
    assert_eq!(recycled["status"], "recycled");

    let (status, _) = call(&app, "POST", "/api/annotations", Some("a"), Some(post(&ids[0], json!("wlt")))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call(&app, "POST", "/api/annotations", Some("a"), Some(json!({ "post_id": ids[3] }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let body = json!({ "annotator_id": "c", "post_id": ids[3], "label": "normal" });
    let (status, _) = call(&app, "POST", "/api/annotations", None, Some(body)).await;
    assert_eq!(status, StatusCode::OK);

    let (_, state) = call(&app, "GET", "/api/state", None, None).await;
    assert_eq!(state["conflicts"], 1);
    assert_eq!(state["adopted"]["round_0"], 1);
    assert_eq!(state["annotators"], json!(["a", "b", "c"]));
    let (_, export) = call(&app, "GET", "/api/export", None, None).await;
    assert_eq!(export["manifest"]["conflicts"], 1);
    assert_eq!(export["conflicts"][&ids[1]], json!({ "a": 1, "b": 0 }));
    assert_eq!(export["manifest"]["labeled"], state["labeled"]);
}

#[tokio::test]
async fn round_advance_reveals_scores() {
    let svc = service();
    let app = app(&svc);
    let (status, err) = call(&app, "POST", "/api/rounds/advance", None, None).await;
    assert_eq!(status, StatusCode::CONFLICT, "{err}");

    let source = synthesize_source(3, &SyntheticParams::default()).unwrap();
    let (_, q) = call(&app, "GET", "/api/queue?limit=1000", Some("a"), None).await;
    for id in queue_ids(&q) {
        let label = if source.is_planted(&id) { "wlt" } else { "normal" };
        for who in ["a", "b"] {
            let body = json!({ "post_id": id, "label": label });
            let (status, _) = call(&app, "POST", "/api/annotations", Some(who), Some(body)).await;
            assert_eq!(status, StatusCode::OK);
        }
    }
    let (status, state) = call(&app, "POST", "/api/rounds/advance", None, None).await;
    assert_eq!(status, StatusCode::OK, "{state}");
    assert_eq!(state["round_index"], 1);
    assert_eq!(state["pending"], 10);
    assert_eq!(state["rounds"][0]["queued"], 10);

    let (_, q) = call(&app, "GET", "/api/queue", Some("a"), None).await;
    let id = &queue_ids(&q)[0];
    let (_, reply) = call(&app, "POST", "/api/annotations", Some("a"), Some(json!({ "post_id": id, "label": "wlt" }))).await;
    let score = reply["score"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&score));
}

#[tokio::test]
async fn media_is_confined_to_root() {
    let svc = service();
    let app = app(&svc);
    let req = Request::get("/media/red_112.png").body(Body::empty()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["content-type"], "image/png");
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&bytes[..], &std::fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/media/red_112.png")).unwrap()[..]);

    for uri in ["/media/../case_study.jsonl", "/media/%2e%2e/case_study.jsonl", "/media/missing.png"] {
        let (status, _) = call(&app, "GET", uri, None, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
    }
    let bare = router(svc, ApiConfig::default());
    let (status, _) = call(&bare, "GET", "/media/red_112.png", None, None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}
