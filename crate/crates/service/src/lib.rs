//! HTTP API and debrief-room broadcast over the session store.

pub mod config;
pub mod error;
pub mod http;
pub mod room;
pub mod state;
pub mod ws;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

pub use config::{ConfigError, ServiceConfig};
pub use error::ApiError;
pub use http::router;
pub use room::{ClientMessage, Room, ServerMessage};
pub use state::AppState;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot start: {0}")]
    Setup(String),
    #[error("listener: {0}")]
    Io(#[from] std::io::Error),
}

/// A bound, not yet running server.
pub struct Server {
    listener: tokio::net::TcpListener,
    app: axum::Router,
}

impl Server {
    pub async fn bind(config: ServiceConfig) -> Result<Self, ServeError> {
        let addr = format!("{}:{}", config.bind, config.port);
        let state = AppState::new(config).map_err(|e| ServeError::Setup(e.message))?;
        let listener = tokio::net::TcpListener::bind(&addr).await?;
        Ok(Server {
            listener,
            app: router(Arc::new(state)),
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServeError> {
        axum::serve(self.listener, self.app)
            .with_graceful_shutdown(shutdown)
            .await?;
        Ok(())
    }
}
