//! Backend of the blind labeling mask.
//!
//! Raters list recordings, stream their audio and submit one of six labels
//! per recording and pass. Every submission goes to an append-only audit
//! log in the workspace; the effective label per (recording, rater, pass)
//! is the last one written. Responses to a rater only ever carry that
//! rater's own progress.
//!
//! | method | path | notes |
//! |---|---|---|
//! | GET | `/recordings` | needs `x-rater-id` |
//! | GET | `/recordings/{id}/audio` | 16-bit mono WAV |
//! | POST | `/assessments` | `{recording_id, rater_id, pass_index, label}` |
//! | GET | `/export/label-matrix` | long-form CSV, refused to raters |
//! | GET | `/export/audit` | every submission as JSON, refused to raters |

mod api;
mod store;

use std::sync::Arc;

use murmurlab::corpus::Workspace;
use thiserror::Error;

pub use api::{router, ApiError, RATER_HEADER};
pub use store::{Assessment, RecordingStatus, Store, StoreError, Submission, AUDIT_FILE};

/// Environment variable holding the bind address.
pub const BIND_ENV: &str = "MURMURLAB_BIND";
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server stopped: {0}")]
    Io(#[from] std::io::Error),
}

/// `$MURMURLAB_BIND`, or [`DEFAULT_BIND`] when unset or empty.
pub fn bind_address() -> String {
    std::env::var(BIND_ENV)
        .ok()
        .filter(|v| !v.trim().is_empty())
        .unwrap_or_else(|| DEFAULT_BIND.to_string())
}

/// Binds `addr` and serves the workspace until the process ends.
/// `on_ready` receives the bound address (useful with port 0).
pub async fn serve(ws: &Workspace, addr: &str, on_ready: impl FnOnce(std::net::SocketAddr)) -> Result<(), ServeError> {
    let store = Arc::new(Store::open(ws)?);
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| ServeError::Bind {
        addr: addr.to_string(),
        source,
    })?;
    let local = listener.local_addr()?;
    log::info!("serving {} recordings on {local}", store.n_recordings());
    on_ready(local);
    axum::serve(listener, router(store)).await?;
    Ok(())
}
