use std::path::Path;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use groundwork_core::analytics::corpus_stats;
use groundwork_core::corpus::{read_corpus, read_jsonl_str, read_tsv_str, Format, LabelEntry};
use groundwork_core::engine::EngineError;
use groundwork_core::model::{CorpusTag, DialogAnnotation};
use serde::Deserialize;
use serde_json::{json, Map, Value};
use tower_http::services::ServeDir;
use tower_http::trace::TraceLayer;

use crate::store::StoreError;
use crate::AppState;

pub fn router(state: AppState) -> Router {
    let mut app = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_summary))
        .route("/sessions/{id}/labels", post(post_labels))
        .route("/sessions/{id}/labels/{utt_id}", put(revise_labels))
        .route("/sessions/{id}/timeline", get(timeline))
        .route("/sessions/{id}/export", get(export))
        .route("/corpora/{name}/stats", get(stats));
    if let Some(dir) = &state.config.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    app.layer(TraceLayer::new_for_http()).with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    findings: Vec<EngineError>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            findings: Vec::new(),
        }
    }

    fn malformed(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "malformed_body", message)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        let (status, code) = match &e {
            StoreError::NotFound(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            StoreError::OutOfOrder { .. } => (StatusCode::CONFLICT, "out_of_order"),
            StoreError::NotYetLabeled(_) => (StatusCode::CONFLICT, "not_yet_labeled"),
            StoreError::Engine(EngineError::InvalidLabel { .. }) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "invalid_label")
            }
            StoreError::Engine(_) => (StatusCode::CONFLICT, "engine_error"),
            StoreError::UnknownUtterance(_) => (StatusCode::UNPROCESSABLE_ENTITY, "unknown_utterance"),
            StoreError::EmptyLabels => (StatusCode::UNPROCESSABLE_ENTITY, "empty_labels"),
            StoreError::InvalidLabel { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_label"),
            StoreError::BadTranscript(_) => (StatusCode::UNPROCESSABLE_ENTITY, "bad_transcript"),
            StoreError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage"),
        };
        let mut err = ApiError::new(status, code, message);
        if let StoreError::Engine(engine) = e {
            err.findings.push(engine);
        }
        err
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::malformed(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = self.code, message = %self.message);
        }
        let mut body = json!({ "error": self.code, "message": self.message });
        if !self.findings.is_empty() {
            body["findings"] = json!(self.findings);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Deserialize)]
#[serde(untagged)]
enum Transcript {
    /// Corpus file contents, JSONL unless `format` says otherwise.
    Text(String),
    /// Utterance objects in the JSONL line schema.
    Lines(Vec<Map<String, Value>>),
}

#[derive(Deserialize)]
struct CreateBody {
    transcript: Transcript,
    #[serde(default)]
    format: Option<String>,
    #[serde(default)]
    dialog_id: Option<String>,
    #[serde(default)]
    corpus: Option<CorpusTag>,
}

fn parse_transcript(body: CreateBody) -> ApiResult<DialogAnnotation> {
    let source = Path::new("<request>");
    let format = match body.format.as_deref() {
        None => Format::Jsonl,
        Some(f) => f.parse().map_err(|e: String| ApiError::malformed(e))?,
    };
    let parsed = match body.transcript {
        Transcript::Text(text) => match format {
            Format::Jsonl => read_jsonl_str(&text, source),
            Format::Tsv => read_tsv_str(&text, source),
        },
        Transcript::Lines(lines) => {
            let dialog_id = body.dialog_id.clone().unwrap_or_else(|| "session".to_string());
            let mut text = String::new();
            for mut line in lines {
                line.entry("dialog_id").or_insert_with(|| json!(dialog_id));
                if let Some(corpus) = body.corpus {
                    line.entry("corpus").or_insert_with(|| json!(corpus));
                }
                text.push_str(&Value::Object(line).to_string());
                text.push('\n');
            }
            read_jsonl_str(&text, source)
        }
    }
    .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "bad_transcript", e.to_string()))?;
    let mut dialogs = parsed.dialogs;
    if dialogs.len() != 1 {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "bad_transcript",
            format!("expected one dialog, found {}", dialogs.len()),
        ));
    }
    Ok(dialogs.remove(0))
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateBody>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(body) = body?;
    let dialog = parse_transcript(body)?;
    let summary = state.store.create(dialog).await?;
    Ok((StatusCode::CREATED, Json(summary)))
}

async fn session_summary(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<impl IntoResponse> {
    let live = state.store.get(&id).await?;
    let summary = live.read().await.summary();
    Ok(Json(summary))
}

#[derive(Deserialize)]
struct LabelBody {
    utt_id: u32,
    labels: Vec<LabelEntry>,
}

#[derive(Deserialize)]
struct ReviseBody {
    labels: Vec<LabelEntry>,
}

async fn post_labels(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<LabelBody>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    // Unknown session wins over a bad body.
    state.store.get(&id).await?;
    let Json(body) = body?;
    let outcome = state.store.post_labels(&id, body.utt_id, body.labels).await?;
    Ok(Json(outcome))
}

async fn revise_labels(
    State(state): State<AppState>,
    UrlPath((id, utt_id)): UrlPath<(String, String)>,
    body: Result<Json<ReviseBody>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    state.store.get(&id).await?;
    let utt_id: u32 = utt_id
        .parse()
        .map_err(|_| ApiError::malformed(format!("bad utterance id `{utt_id}`")))?;
    let Json(body) = body?;
    let outcome = state.store.revise(&id, utt_id, body.labels).await?;
    Ok(Json(outcome))
}

async fn timeline(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<impl IntoResponse> {
    let live = state.store.get(&id).await?;
    let timeline = live.read().await.timeline();
    Ok(Json(timeline))
}

#[derive(Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<ExportQuery>,
) -> ApiResult<Response> {
    let live = state.store.get(&id).await?;
    let format = match q.format.as_deref() {
        None => Format::Jsonl,
        Some(f) => f.parse().map_err(|e: String| ApiError::malformed(e))?,
    };
    let live = live.read().await;
    let (body, content_type) = match format {
        Format::Jsonl => (live.export_jsonl(), "application/x-ndjson"),
        Format::Tsv => (live.export_tsv(), "text/tab-separated-values; charset=utf-8"),
    };
    Ok(([(header::CONTENT_TYPE, content_type)], body).into_response())
}

fn valid_corpus_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

async fn stats(
    State(state): State<AppState>,
    UrlPath(name): UrlPath<String>,
) -> ApiResult<impl IntoResponse> {
    let not_found = || ApiError::new(StatusCode::NOT_FOUND, "unknown_corpus", format!("no corpus `{name}`"));
    let dir = state.config.corpora_dir.as_ref().ok_or_else(not_found)?;
    if !valid_corpus_name(&name) {
        return Err(not_found());
    }
    let path = ["jsonl", "tsv"]
        .iter()
        .map(|ext| dir.join(format!("{name}.{ext}")))
        .find(|p| p.is_file())
        .ok_or_else(not_found)?;
    let stats = tokio::task::spawn_blocking(move || -> Result<_, String> {
        let file = read_corpus(&path, None).map_err(|e| e.to_string())?;
        corpus_stats(&file.dialogs).map_err(|e| e.to_string())
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "corpus_invalid", e))?;
    Ok(Json(stats))
}
