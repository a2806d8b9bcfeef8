//! HTTP session service for interactive segmentation.
//!
//! Each session owns one image and its round history. Clients post
//! interactions and receive the merged mask as COCO-style RLE:
//!
//! | method | path                          |                                  |
//! |--------|-------------------------------|----------------------------------|
//! | POST   | `/v1/sessions`                | multipart `image`, optional `initial_mask` and debug `gt_mask`; query `backend` |
//! | POST   | `/v1/sessions/{id}/interactions` | JSON interaction, one round  |
//! | POST   | `/v1/sessions/{id}/undo`      | revert the last round            |
//! | GET    | `/v1/sessions/{id}`           | state summary                    |
//! | GET    | `/v1/sessions/{id}/mask.png`  | current mask as PNG              |
//! | DELETE | `/v1/sessions/{id}`           | free the session                 |
//! | GET    | `/healthz`                    | liveness                         |
//!
//! Rounds run on the blocking pool so slow backends never stall other
//! sessions. A second round posted while one is in flight gets 409.

mod error;
mod routes;
mod store;

use std::future::Future;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::DefaultBodyLimit;
use axum::http::{HeaderName, HeaderValue};
use axum::response::Response;
use axum::Router;
use fcxl_core::pipeline::{BackendSpec, SegmenterBackend, SessionConfig};
use fcxl_core::BinaryMask;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

pub use error::ApiError;
pub use routes::{HistoryItem, RoundResponse, SessionHandle, SessionSummary, UndoResponse};
pub use store::{SessionEntry, SessionStore};

/// Header carried by every response.
pub const VERSION_HEADER: &str = "x-fcxl-version";
pub use fcxl_core::pipeline::remote::PROTOCOL;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub backend: BackendSpec,
    pub session: SessionConfig,
    /// Idle time after which a session is evicted.
    pub session_ttl: Duration,
    /// Largest accepted image, in pixels.
    pub max_pixels: u64,
    pub max_body_bytes: usize,
    /// Allowed CORS origin; `None` allows any.
    pub cors_origin: Option<String>,
    /// Static UI bundle served under `/`.
    pub ui_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            backend: BackendSpec::Classical(Default::default()),
            session: SessionConfig::default(),
            session_ttl: Duration::from_secs(30 * 60),
            max_pixels: 32_000_000,
            max_body_bytes: 256 << 20,
            cors_origin: None,
            ui_dir: None,
        }
    }
}

/// Creates the backend for a new session.
pub trait BackendFactory: Send + Sync {
    /// `requested` is the `backend` query parameter, if any. Returns the
    /// display name and the backend.
    fn create(
        &self,
        requested: Option<&str>,
        gt: Option<&BinaryMask>,
    ) -> Result<(String, Arc<dyn SegmenterBackend>), ApiError>;
}

/// Builds backends from [`BackendSpec`]s. Clients may pick any local
/// backend; remote endpoints are limited to the configured one.
pub struct SpecFactory {
    pub default: BackendSpec,
}

impl BackendFactory for SpecFactory {
    fn create(
        &self,
        requested: Option<&str>,
        gt: Option<&BinaryMask>,
    ) -> Result<(String, Arc<dyn SegmenterBackend>), ApiError> {
        let spec = match requested {
            None => self.default.clone(),
            Some(s) => {
                let spec: BackendSpec = s
                    .parse()
                    .map_err(|e: fcxl_core::Error| ApiError::bad_request("unknown-backend", e.to_string()))?;
                if matches!(spec, BackendSpec::Remote { .. }) && spec.to_string() != self.default.to_string() {
                    return Err(ApiError::bad_request(
                        "backend-not-allowed",
                        "remote endpoints other than the configured one are not allowed",
                    ));
                }
                spec
            }
        };
        if spec.needs_ground_truth() && gt.is_none() {
            return Err(ApiError::bad_request(
                "missing-gt",
                format!("backend {spec} needs a gt_mask upload"),
            ));
        }
        let backend = spec.build(gt).map_err(|e| ApiError::bad_request(e.code(), e.to_string()))?;
        Ok((spec.to_string(), Arc::from(backend)))
    }
}

/// Shared handler state.
#[derive(Clone)]
pub struct AppState {
    pub config: Arc<ServiceConfig>,
    pub store: Arc<SessionStore>,
    pub factory: Arc<dyn BackendFactory>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        let factory = Arc::new(SpecFactory {
            default: config.backend.clone(),
        });
        Self::with_factory(config, factory)
    }

    pub fn with_factory(config: ServiceConfig, factory: Arc<dyn BackendFactory>) -> Self {
        Self {
            config: Arc::new(config),
            store: Arc::new(SessionStore::default()),
            factory,
        }
    }
}

async fn stamp_version(mut resp: Response) -> Response {
    resp.headers_mut().insert(
        HeaderName::from_static(VERSION_HEADER),
        HeaderValue::from_static(PROTOCOL),
    );
    resp
}

pub fn router(state: AppState) -> Router {
    let cors = match &state.config.cors_origin {
        Some(origin) => match HeaderValue::from_str(origin) {
            Ok(v) => CorsLayer::new().allow_origin(AllowOrigin::exact(v)),
            Err(_) => {
                tracing::warn!(origin = %origin, "ignoring unparsable CORS origin");
                CorsLayer::new()
            }
        },
        None => CorsLayer::new().allow_origin(AllowOrigin::any()),
    }
    .allow_methods(tower_http::cors::Any)
    .allow_headers(tower_http::cors::Any)
    .expose_headers([HeaderName::from_static(VERSION_HEADER)]);

    let ui_dir = state.config.ui_dir.clone();
    let body_limit = state.config.max_body_bytes;
    let mut app = routes::api().with_state(state);
    if let Some(dir) = ui_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    app.layer(DefaultBodyLimit::max(body_limit))
        .layer(cors)
        .layer(axum::middleware::map_response(stamp_version))
}

/// Serves until `shutdown` resolves, then waits for in-flight requests.
/// Idle sessions are evicted in the background.
pub async fn run(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let ttl = state.config.session_ttl;
    let store = state.store.clone();
    let sweeper = tokio::spawn(async move {
        let period = (ttl / 4).clamp(Duration::from_millis(100), Duration::from_secs(60));
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let n = store.evict_idle(ttl);
            if n > 0 {
                tracing::info!(evicted = n, "evicted idle sessions");
            }
        }
    });
    let result = axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await;
    sweeper.abort();
    result
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    tracing::info!("shutdown requested");
}
