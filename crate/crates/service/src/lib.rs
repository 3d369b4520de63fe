//! HTTP front end: every `/api` endpoint reads one immutable snapshot of the
//! store and CPV table; static client files, when configured, are served at `/`.

pub mod api;
pub mod error;
pub mod state;

use std::path::Path;
use std::sync::Arc;

use axum::Router;
use tower_http::services::ServeDir;

pub use error::ApiError;
pub use state::{schema_document, AppConfig, AppState, Limits, Snapshot};

pub fn router(state: Arc<AppState>, static_dir: Option<&Path>) -> Router {
    let app = Router::new().nest("/api", api::routes());
    let app = match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true)),
        None => app,
    };
    app.with_state(state)
}
