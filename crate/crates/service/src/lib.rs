//! HTTP annotation service. Sessions live in memory and are persisted as
//! append-only event logs under a data directory; see [`store`].

pub mod log;
mod routes;
pub mod store;

use std::path::PathBuf;
use std::sync::Arc;

pub use axum::Router;
use tokio::net::TcpListener;

pub use routes::router;
pub use store::{LabelOutcome, LiveSession, SessionStore, SessionSummary, StoreError};

pub const DEFAULT_PORT: u16 = 7340;

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Built UI assets served at `/`.
    pub static_dir: Option<PathBuf>,
    /// Directory holding `<name>.jsonl` or `<name>.tsv` corpora for
    /// `/corpora/{name}/stats`.
    pub corpora_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct AppState {
    pub store: Arc<SessionStore>,
    pub config: Arc<ServiceConfig>,
}

/// Opens the store (replaying any existing logs) and builds the router.
pub fn build(config: ServiceConfig) -> std::io::Result<Router> {
    let (store, report) = SessionStore::open(&config.data_dir)?;
    tracing::info!(
        recovered = report.recovered.len(),
        torn = report.torn.len(),
        failed = report.failed.len(),
        "session logs replayed"
    );
    for (path, reason) in &report.failed {
        tracing::warn!(path = %path.display(), %reason, "session log skipped");
    }
    Ok(router(AppState {
        store: Arc::new(store),
        config: Arc::new(config),
    }))
}

/// Serves `app` until Ctrl-C.
pub async fn serve_router(listener: TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

pub async fn serve(listener: TcpListener, config: ServiceConfig) -> std::io::Result<()> {
    serve_router(listener, build(config)?).await
}
