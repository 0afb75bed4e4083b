//! HTTP front end for the handwriting pad.
//!
//! `POST /recognize` takes `{"strokes": [[[x,y],...],...]}` and answers with a
//! [`RecognitionResult`]; `GET /health` and `GET /alphabet` describe the
//! loaded model. Inference runs on the blocking pool so slow requests do not
//! stall the reactor.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use crate::api::{AlphabetListing, Health, Recognizer, API_VERSION};
use crate::error::Error;
use crate::ink::{InkSample, StrokesJson};

#[derive(Serialize)]
struct ErrorBody {
    v: u32,
    error: String,
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(ErrorBody { v: API_VERSION, error: msg.into() })).into_response()
}

/// Build the router. `cors_origin` restricts cross-origin access to one UI
/// origin; `None` allows any origin.
pub fn router(recognizer: Arc<Recognizer>, cors_origin: Option<HeaderValue>) -> Router {
    let origin = match cors_origin {
        Some(o) => AllowOrigin::exact(o),
        None => AllowOrigin::from(Any),
    };
    let cors = CorsLayer::new().allow_origin(origin).allow_methods(Any).allow_headers(Any);
    Router::new()
        .route("/recognize", post(recognize))
        .route("/health", get(|| async { Json(Health::ok()) }))
        .route("/alphabet", get(|| async { Json(AlphabetListing::current()) }))
        .layer(cors)
        .with_state(recognizer)
}

async fn recognize(State(rec): State<Arc<Recognizer>>, body: Bytes) -> Response {
    let req: StrokesJson = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed request body: {e}")),
    };
    if let Some(v) = req.v.filter(|&v| v != API_VERSION) {
        return error(StatusCode::BAD_REQUEST, format!("unsupported version {v}"));
    }
    if req.strokes.is_empty() {
        return error(StatusCode::UNPROCESSABLE_ENTITY, "no strokes to recognize");
    }
    let sample = match InkSample::from_points("request", req.strokes) {
        Ok(s) => s,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    match tokio::task::spawn_blocking(move || rec.recognize(&sample)).await {
        Ok(Ok(res)) => Json(res).into_response(),
        Ok(Err(e @ (Error::InvalidInk(_) | Error::Empty(_)))) => error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, format!("recognition task failed: {e}")),
    }
}

/// Bind and serve until the process is stopped.
pub async fn serve(recognizer: Recognizer, addr: SocketAddr, cors_origin: Option<HeaderValue>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(recognizer), cors_origin)).await
}
