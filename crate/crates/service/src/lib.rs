//! Local review API: topic summaries, mapping edits and live
//! classification/metrics over a loaded workspace.

pub mod api;
pub mod session;

use std::net::{Ipv4Addr, SocketAddr};
use std::path::Path;
use std::sync::Arc;

use axum::http::{HeaderValue, Method};
use axum::Router;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

pub use api::API_VERSION;
pub use session::{Session, SessionError, Snapshot};

/// True for `http(s)://localhost`, `127.0.0.1` or `[::1]`, any port.
pub fn is_local_origin(origin: &HeaderValue) -> bool {
    let Ok(origin) = origin.to_str() else {
        return false;
    };
    let Some(rest) = origin
        .strip_prefix("http://")
        .or_else(|| origin.strip_prefix("https://"))
    else {
        return false;
    };
    let split = if rest.starts_with('[') {
        rest.find(']').map(|i| i + 1)
    } else {
        rest.find(':')
    };
    let (host, port) = rest.split_at(split.unwrap_or(rest.len()));
    let port_ok =
        port.is_empty() || (port.len() > 1 && port.starts_with(':') && port[1..].bytes().all(|b| b.is_ascii_digit()));
    port_ok && matches!(host, "localhost" | "127.0.0.1" | "[::1]")
}

/// API routes with localhost-only CORS, plus the static UI when `ui_dir` exists.
pub fn router(session: Arc<Session>, ui_dir: Option<&Path>) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(AllowOrigin::predicate(|origin, _| is_local_origin(origin)))
        .allow_methods([Method::GET, Method::PUT])
        .allow_headers([axum::http::header::CONTENT_TYPE]);
    let mut app = api::routes(session);
    if let Some(dir) = ui_dir.filter(|d| d.is_dir()) {
        app = app.fallback_service(ServeDir::new(dir));
    }
    app.layer(cors)
}

/// Serve on 127.0.0.1 until Ctrl-C.
pub async fn serve(session: Arc<Session>, port: u16, ui_dir: Option<&Path>) -> std::io::Result<()> {
    let addr = SocketAddr::from((Ipv4Addr::LOCALHOST, port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(session, ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
