use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use ssmlab::mesh::load_labels;
use ssmlab::{ClassTable, LabelMap, Point, TriangleMesh};
use ssmlab_cli::serve::{router, Session};
use tower::ServiceExt;

fn tetra() -> TriangleMesh {
    let v = vec![
        Point::new(0.0, 0.0, 0.0),
        Point::new(1.0, 0.0, 0.0),
        Point::new(0.0, 1.0, 0.0),
        Point::new(0.0, 0.0, 1.0),
    ];
    TriangleMesh::new(v, vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]]).unwrap()
}

fn app(save_to: Option<PathBuf>, static_dir: Option<PathBuf>) -> (Arc<Session>, Router) {
    let classes = ClassTable::landmarks();
    let labels = LabelMap::new(vec![0, 1, 0, 2], classes.clone()).unwrap();
    let session = Arc::new(Session::new(tetra(), classes, labels, save_to).unwrap());
    let r = router(session.clone(), static_dir);
    (session, r)
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, body)
}

async fn get_json(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, b) = send(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (s, serde_json::from_slice(&b).unwrap())
}

fn post(body: impl Into<Body>, content_type: &str) -> Request<Body> {
    Request::post("/api/labels")
        .header(header::CONTENT_TYPE, content_type)
        .body(body.into())
        .unwrap()
}

fn error_code(body: &[u8]) -> String {
    let v: Value = serde_json::from_slice(body).unwrap();
    v["error"]["code"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn mesh_endpoint_returns_geometry() {
    let (_, app) = app(None, None);
    let (s, v) = get_json(&app, "/api/mesh").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["vertices"].as_array().unwrap().len(), 4);
    assert_eq!(v["vertices"][1], json!([1.0, 0.0, 0.0]));
    assert_eq!(v["faces"][0], json!([0, 2, 1]));
}

#[tokio::test]
async fn classes_and_labels_endpoints() {
    let (_, app) = app(None, None);
    let (s, v) = get_json(&app, "/api/classes").await;
    assert_eq!(s, StatusCode::OK);
    let ids: Vec<u64> = v["classes"].as_array().unwrap().iter().map(|c| c["id"].as_u64().unwrap()).collect();
    assert_eq!(ids, vec![1, 2]);
    assert_eq!(v["classes"][1]["name"], "falciform_ligament");

    let (s, v) = get_json(&app, "/api/labels").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["labels"], json!([0, 1, 0, 2]));
}

#[tokio::test]
async fn json_post_replaces_labels_and_saves() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels.csv");
    let (session, app) = app(Some(path.clone()), None);

    let (s, b) = send(&app, post(r#"{"labels":[2,2,1,0]}"#, "application/json")).await;
    assert_eq!(s, StatusCode::OK);
    let v: Value = serde_json::from_slice(&b).unwrap();
    assert_eq!(v["ok"], true);
    assert_eq!(v["n_vertices"], 4);
    assert_eq!(v["counts"], json!({"0": 1, "1": 1, "2": 2}));

    assert_eq!(session.labels().labels(), &[2, 2, 1, 0]);
    let (_, v) = get_json(&app, "/api/labels").await;
    assert_eq!(v["labels"], json!([2, 2, 1, 0]));
    let saved = load_labels(&path, &ClassTable::landmarks()).unwrap();
    assert_eq!(saved.labels(), &[2, 2, 1, 0]);
}

#[tokio::test]
async fn csv_post_is_accepted() {
    let (session, app) = app(None, None);
    // Missing vertices become background; the map is padded to the mesh.
    let csv = "vertex_index,class_id\n2,1\n";
    let (s, _) = send(&app, post(csv, "text/csv; charset=utf-8")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(session.labels().labels(), &[0, 0, 1, 0]);
}

#[tokio::test]
async fn wrong_length_is_rejected_and_state_kept() {
    let (session, app) = app(None, None);
    let (s, b) = send(&app, post(r#"{"labels":[1,1]}"#, "application/json")).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(error_code(&b), "mesh_core.invalid_labels");
    assert_eq!(session.labels().labels(), &[0, 1, 0, 2]);

    let csv = "vertex_index,class_id\n9,1\n";
    let (s, _) = send(&app, post(csv, "text/csv")).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn unknown_class_is_rejected() {
    let (_, app) = app(None, None);
    let (s, b) = send(&app, post(r#"{"labels":[0,0,7,0]}"#, "application/json")).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(error_code(&b), "mesh_core.unknown_class");

    let (s, b) = send(&app, post("vertex_index,class_id\n0,5\n", "text/csv")).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(error_code(&b), "mesh_core.unknown_class");
}

#[tokio::test]
async fn malformed_bodies_are_bad_requests() {
    let (_, app) = app(None, None);
    let (s, b) = send(&app, post("{not json", "application/json")).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(error_code(&b), "cli.bad_request");

    let (s, b) = send(&app, post("nope\n1,1\n", "text/csv")).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(error_code(&b), "mesh_core.parse");
}

#[tokio::test]
async fn placeholder_page_without_bundle() {
    let (_, app) = app(None, None);
    let (s, b) = send(&app, Request::get("/").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    assert!(String::from_utf8(b).unwrap().contains("--static-dir"));
    let (s, _) = send(&app, Request::get("/app.js").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn static_bundle_is_served() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>ui</h1>").unwrap();
    std::fs::write(dir.path().join("app.js"), "console.log(1)").unwrap();
    let (_, app) = app(None, Some(dir.path().into()));

    let (s, b) = send(&app, Request::get("/").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b, b"<h1>ui</h1>");
    let (s, b) = send(&app, Request::get("/app.js").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b, b"console.log(1)");
    let (s, _) = get_json(&app, "/api/labels").await;
    assert_eq!(s, StatusCode::OK);
}

#[test]
fn session_rejects_mismatched_labels() {
    let classes = ClassTable::landmarks();
    let labels = LabelMap::background(3, classes.clone());
    assert!(Session::new(tetra(), classes, labels, None).is_err());
}
