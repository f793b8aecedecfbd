//! Dictation sessions over HTTP: create a session against a trained model,
//! submit glyph recordings one at a time, and fetch the diagnosis once every
//! dictated glyph is scored.

pub mod api;
pub mod models;
pub mod store;

use std::path::Path;
use std::sync::Arc;

pub use api::{router, AppState};
pub use models::ModelRegistry;
pub use store::SessionStore;

pub fn open_state(model_dir: &Path, data_dir: &Path) -> Result<Arc<AppState>, Box<dyn std::error::Error + Send + Sync>> {
    let models = ModelRegistry::load_dir(model_dir)?;
    let store = SessionStore::open(data_dir)?;
    Ok(Arc::new(AppState { models, store }))
}

/// Serves on `0.0.0.0:port` until the process is stopped.
pub async fn serve(state: Arc<AppState>, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    axum::serve(listener, router(state)).await
}
