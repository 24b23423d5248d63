//! Live sessions over HTTP and WebSocket.
//!
//! Each session is one engine ticking at the scenario's rate (scaled by a
//! client-set speed) in its own task. Clients pin the leader's intention,
//! inject disturbances, pause, step and reset through JSON text frames, and
//! receive every trace event plus decimated snapshots.

pub mod http;
pub mod protocol;
pub mod session;

pub use http::{router, AppState, CreateSession};
pub use protocol::{parse_client, script_messages, ClientMessage, ProtocolError, ServerMessage, SessionInfo};
pub use session::{Reply, ServerConfig, SessionError, SessionHandle};

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
