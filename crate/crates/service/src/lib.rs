//! HTTP service around live novelty-detection sessions.
//!
//! Clients create a session, upload images one at a time, and get back the
//! per-image sidecar with URLs of the rendered maps. Memory snapshots,
//! summaries and past results are read-only views that stay consistent while
//! an upload is being processed.

mod error;
mod routes;
mod state;

use std::net::SocketAddr;
use std::time::{Duration, Instant};

pub use error::ApiError;
pub use routes::router;
pub use state::{
    merge_config, AppState, ResetBody, ResultBody, ServiceConfig, SessionHandle,
    DEFAULT_MAX_UPLOAD_BYTES, DEMO_IDLE_TTL,
};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Storage(#[from] novelty_core::io::OutputError),
}

/// Periodically drops idle sessions; does nothing without a TTL.
pub fn spawn_sweeper(state: AppState) -> Option<tokio::task::JoinHandle<()>> {
    let ttl = state.config().idle_ttl?;
    let period = (ttl / 4).clamp(Duration::from_millis(10), Duration::from_secs(60));
    Some(tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            state.sweep_expired(Instant::now());
        }
    }))
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> Result<(), ServeError> {
    let state = AppState::new(config)?;
    let _sweeper = spawn_sweeper(state.clone());
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!(
        "serving on http://{} (outputs under {})",
        listener.local_addr()?,
        state.out_root().display()
    );
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

/// [`serve`] on a fresh multi-threaded runtime.
pub fn serve_blocking(config: ServiceConfig, addr: SocketAddr) -> Result<(), ServeError> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve(config, addr))
}
