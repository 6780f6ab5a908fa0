//! HTTP backend for the mean-shape annotation UI.
//!
//! One session, one label map. Accepted labels replace the current map and
//! are written to the save path if one is configured.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use ssmlab::mesh::{parse_labels, save_labels};
use ssmlab::{ClassTable, LabelMap, TriangleMesh};
use tower_http::services::ServeDir;

pub struct Session {
    mesh: TriangleMesh,
    classes: ClassTable,
    labels: Mutex<LabelMap>,
    save_to: Option<PathBuf>,
}

impl Session {
    pub fn new(mesh: TriangleMesh, classes: ClassTable, labels: LabelMap, save_to: Option<PathBuf>) -> ssmlab::Result<Self> {
        if labels.len() != mesh.n_vertices() {
            return Err(ssmlab::Error::Dimension {
                expected: mesh.n_vertices(),
                actual: labels.len(),
                context: "labels per mesh vertex",
            });
        }
        Ok(Self {
            mesh,
            classes,
            labels: Mutex::new(labels),
            save_to,
        })
    }

    pub fn labels(&self) -> LabelMap {
        self.labels.lock().expect("label lock").clone()
    }
}

#[derive(Serialize)]
struct MeshBody {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
}

#[derive(Serialize, Deserialize)]
pub struct LabelsBody {
    pub labels: Vec<u32>,
}

const PLACEHOLDER: &str = "<!doctype html><title>ssmlab annotate</title>\
<p>No UI bundle configured. Start the server with <code>--static-dir</code>.</p>";

pub fn router(session: Arc<Session>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/mesh", get(get_mesh))
        .route("/api/classes", get(get_classes))
        .route("/api/labels", get(get_labels).post(post_labels))
        .layer(DefaultBodyLimit::max(256 << 20))
        .with_state(session);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api
            .route("/", get(|| async { Html(PLACEHOLDER) }))
            .fallback(|| async { (StatusCode::NOT_FOUND, "not found") }),
    }
}

fn rejection(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    (status, Json(json!({"error": {"code": code, "message": message.into()}}))).into_response()
}

async fn get_mesh(State(s): State<Arc<Session>>) -> Json<MeshBody> {
    Json(MeshBody {
        vertices: s.mesh.vertices().iter().map(|p| [p.x, p.y, p.z]).collect(),
        faces: s.mesh.faces().to_vec(),
    })
}

async fn get_classes(State(s): State<Arc<Session>>) -> Json<ClassTable> {
    Json(s.classes.clone())
}

async fn get_labels(State(s): State<Arc<Session>>) -> Json<LabelsBody> {
    Json(LabelsBody {
        labels: s.labels().labels().to_vec(),
    })
}

/// Accepts `{"labels": [...]}` with one entry per vertex, or a label CSV
/// when the content type is `text/csv`.
async fn post_labels(State(s): State<Arc<Session>>, headers: HeaderMap, body: Bytes) -> Response {
    let n = s.mesh.n_vertices();
    let is_csv = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("text/csv"));

    let parsed = if is_csv {
        let Ok(text) = std::str::from_utf8(&body) else {
            return rejection(StatusCode::BAD_REQUEST, "cli.bad_request", "body is not UTF-8");
        };
        parse_labels("<request>".as_ref(), text, &s.classes).and_then(|m| m.fit_to(n))
    } else {
        let body: LabelsBody = match serde_json::from_slice(&body) {
            Ok(b) => b,
            Err(e) => return rejection(StatusCode::BAD_REQUEST, "cli.bad_request", e.to_string()),
        };
        if body.labels.len() != n {
            return rejection(
                StatusCode::UNPROCESSABLE_ENTITY,
                "mesh_core.invalid_labels",
                format!("expected {n} labels, got {}", body.labels.len()),
            );
        }
        LabelMap::new(body.labels, s.classes.clone())
    };
    let map = match parsed {
        Ok(m) => m,
        Err(e) => return rejection(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string()),
    };

    let mut current = s.labels.lock().expect("label lock");
    if let Some(path) = &s.save_to {
        if let Err(e) = save_labels(&map, path) {
            return rejection(StatusCode::INTERNAL_SERVER_ERROR, e.code(), e.to_string());
        }
    }
    let counts = map.counts();
    *current = map;
    Json(json!({"ok": true, "n_vertices": n, "counts": counts})).into_response()
}
