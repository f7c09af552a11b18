//! Pod store, HTTP review API and WebSocket replay stream.
//!
//! | route | |
//! |---|---|
//! | `POST /pods` | upload an MPOD file, returns `{pod_id}` |
//! | `GET /pods` | list stored pods |
//! | `GET /pods/{id}` | metadata |
//! | `GET /pods/{id}/file` | the uploaded bytes |
//! | `GET /pods/{id}/keyframes` | `[{t_us, annotation_id, kind, label}]` |
//! | `GET /pods/{id}/summary[?refresh=1]` | structured summary, cached on disk |
//! | `GET /pods/{id}/mesh` | environment mesh, optionally placed by mode parameters |
//! | `GET /pods/{id}/zones` | floor-plan zones |
//! | `GET /pods/{id}/frame?t_us=..` | one replay frame |
//! | `GET /pods/{id}/replay` | WebSocket replay stream |

mod api;
pub mod store;
mod stream;
pub mod views;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use memorypod::narrative::{HttpChatClient, SummarizerBackend};
use thiserror::Error;

pub use api::{codec_error_code, router, PodListItem};
pub use store::{PodStore, StoreError};

pub const DEFAULT_TICK_HZ: f64 = 20.0;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub root: PathBuf,
    pub bind: SocketAddr,
    pub tick_hz: f64,
    /// Chat-completion endpoint; summaries use the template engine when unset.
    pub llm_endpoint: Option<String>,
    pub llm_model: String,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            root: PathBuf::from("memorypod-data"),
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            tick_hz: DEFAULT_TICK_HZ,
            llm_endpoint: None,
            llm_model: "default".into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ServerError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("tick rate must be positive, got {0}")]
    InvalidTick(f64),
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<PodStore>,
    pub summarizer: SummarizerBackend,
    pub tick: Duration,
}

impl AppState {
    pub fn new(store: Arc<PodStore>, summarizer: SummarizerBackend, tick_hz: f64) -> Result<Self, ServerError> {
        if !(tick_hz > 0.0 && tick_hz.is_finite()) {
            return Err(ServerError::InvalidTick(tick_hz));
        }
        Ok(AppState { store, summarizer, tick: Duration::from_secs_f64(1.0 / tick_hz) })
    }

    pub fn from_config(config: &ServerConfig) -> Result<Self, ServerError> {
        let store = Arc::new(PodStore::open(&config.root)?);
        let summarizer = match &config.llm_endpoint {
            Some(url) => SummarizerBackend::Remote(Arc::new(HttpChatClient::from_env(url.clone(), config.llm_model.clone()))),
            None => SummarizerBackend::Template,
        };
        AppState::new(store, summarizer, config.tick_hz)
    }
}

/// Runs the server until the process is stopped.
pub async fn serve(config: ServerConfig) -> Result<(), ServerError> {
    let state = AppState::from_config(&config)?;
    let listener = tokio::net::TcpListener::bind(config.bind).await?;
    tracing::info!(addr = %listener.local_addr()?, root = %config.root.display(), "serving pods");
    axum::serve(listener, router(state)).await?;
    Ok(())
}
