//! REST facade over the search pipeline: buyers upload (optionally masked)
//! images to search, providers register products, and a restore endpoint
//! exposes the pre-processing and inpainting stages for inspection.
//!
//! Every error body is `{"code": ..., "message": ...}`; see [`ErrorCode`].

pub mod api;
pub mod error;
pub mod upload;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;
use tower_http::services::ServeDir;
use tower_http::trace::TraceLayer;

use occu_core::inpaint::load_model;
use occu_core::{CatalogStore, Engine, Options};

pub use error::{ApiError, ErrorCode};

/// Upload size cap per request.
pub const MAX_BODY_BYTES: usize = 16 * 1024 * 1024;

#[derive(Clone, Debug)]
pub struct Config {
    pub addr: SocketAddr,
    pub store: PathBuf,
    /// Weights for the pconv engine.
    pub model: Option<PathBuf>,
    /// Engine used when a request does not name one.
    pub engine: Engine,
    /// Built web UI served under `/`.
    pub ui_dir: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            addr: SocketAddr::from(([127, 0, 0, 1], 8080)),
            store: PathBuf::from("occu-store"),
            model: None,
            engine: Engine::Diffusion,
            ui_dir: None,
        }
    }
}

pub struct AppState {
    pub store: CatalogStore,
    pub options: Options,
}

impl AppState {
    pub fn new(store: CatalogStore, options: Options) -> Self {
        Self { store, options }
    }

    /// Open the store and load the model named by `config`.
    pub fn from_config(config: &Config) -> Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        let store = CatalogStore::open(&config.store)?;
        let model = config.model.as_deref().map(load_model).transpose()?.map(Arc::new);
        let options = Options {
            engine: config.engine,
            model,
            ..Options::default()
        };
        Ok(Self::new(store, options))
    }
}

pub fn router(state: Arc<AppState>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/search", post(api::search_handler))
        .route("/products", post(api::register_handler).get(api::list_products))
        .route("/products/{id}", get(api::get_product))
        .route("/products/{id}/image", get(api::product_image))
        .route("/categories", get(api::list_categories))
        .route("/restore", post(api::restore_handler))
        .fallback(api::not_found);
    let app = Router::new()
        .nest("/api/v1", api)
        .route("/healthz", get(api::healthz))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .layer(TraceLayer::new_for_http())
        .with_state(state);
    match ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.fallback(api::not_found),
    }
}

/// Bind and serve until Ctrl-C.
pub async fn serve(config: Config) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let state = Arc::new(AppState::from_config(&config)?);
    let app = router(state, config.ui_dir.clone());
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    tracing::info!(addr = %listener.local_addr()?, store = %config.store.display(), "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
