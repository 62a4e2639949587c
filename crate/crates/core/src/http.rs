//! Loopback HTTP plumbing shared by every service: binding, graceful
//! shutdown, JSON error mapping and the outbound client.

use std::net::{Ipv4Addr, SocketAddr};
use std::time::Duration;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use crate::error::{Error, ErrorBody, ErrorCode, Result};
use crate::model::AccessInfo;

impl IntoResponse for Error {
    fn into_response(self) -> Response {
        let body = self.to_body();
        let status =
            StatusCode::from_u16(body.code.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(body)).into_response()
    }
}

/// A running service. Dropping the handle stops it.
pub struct ServiceHandle {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    join: Option<JoinHandle<()>>,
}

impl ServiceHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn access(&self, base_path: &str) -> AccessInfo {
        AccessInfo::http(self.addr, base_path)
    }

    /// Stops accepting, lets in-flight requests finish for a short grace
    /// period, then aborts whatever is left.
    pub async fn shutdown(mut self) {
        self.stop().await;
    }

    async fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(mut join) = self.join.take() {
            if tokio::time::timeout(Duration::from_millis(500), &mut join)
                .await
                .is_err()
            {
                join.abort();
                let _ = join.await;
            }
        }
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(join) = self.join.take() {
            join.abort();
        }
    }
}

/// Loopback address for a service: `base + index` when a base port is set,
/// otherwise an ephemeral port.
pub fn loopback(base_port: Option<u16>, index: u16) -> SocketAddr {
    let port = base_port.map_or(0, |b| b.saturating_add(index));
    SocketAddr::from((Ipv4Addr::LOCALHOST, port))
}

pub async fn serve(addr: SocketAddr, router: Router) -> Result<ServiceHandle> {
    let listener = TcpListener::bind(addr).await?;
    serve_on(listener, router)
}

pub fn serve_on(listener: TcpListener, router: Router) -> Result<ServiceHandle> {
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let join = tokio::spawn(async move {
        let res = axum::serve(listener, router)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await;
        if let Err(e) = res {
            tracing::warn!(%addr, "server exited: {e}");
        }
    });
    Ok(ServiceHandle {
        addr,
        shutdown: Some(tx),
        join: Some(join),
    })
}

/// Nests `router` under `base_path`, treating "/" as no prefix.
pub fn mount(base_path: &str, router: Router) -> Router {
    let base = base_path.trim_end_matches('/');
    if base.is_empty() {
        router
    } else {
        Router::new().nest(base, router)
    }
}

/// Outbound client. Proxies are disabled: every peer lives on loopback.
pub fn client() -> reqwest::Client {
    reqwest::Client::builder()
        .no_proxy()
        .pool_idle_timeout(Duration::from_secs(5))
        .build()
        .expect("http client")
}

/// Decodes a JSON success body, or turns an error body back into an [`Error`].
pub async fn decode<T: DeserializeOwned>(resp: reqwest::Response) -> Result<T> {
    let status = resp.status();
    if status.is_success() {
        return resp.json::<T>().await.map_err(|e| {
            Error::new(ErrorCode::Internal, format!("undecodable response body: {e}"))
        });
    }
    Err(decode_error(resp).await)
}

pub async fn decode_error(resp: reqwest::Response) -> Error {
    let status = resp.status();
    let text = resp.text().await.unwrap_or_default();
    match serde_json::from_str::<ErrorBody>(&text) {
        Ok(body) => body.into(),
        Err(_) => Error::new(
            ErrorCode::Internal,
            format!("unexpected status {status}: {text}"),
        ),
    }
}

/// Correlation id carried by an inbound request, or "" when absent.
pub fn correlation(headers: &axum::http::HeaderMap) -> String {
    headers
        .get(crate::model::wire::CORRELATION_HEADER)
        .and_then(|v| v.to_str().ok())
        .unwrap_or_default()
        .to_string()
}

/// Maps a transport failure (refused, reset, timed out) onto `code`.
pub fn transport_error(code: ErrorCode, target: &str, e: &reqwest::Error) -> Error {
    let kind = if e.is_timeout() {
        "timed out"
    } else if e.is_connect() {
        "connection failed"
    } else {
        "transport error"
    };
    Error::new(code, format!("{target}: {kind}: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use axum::routing::get;

    #[tokio::test]
    async fn serve_and_shutdown_refuses_afterwards() {
        let router = Router::new().route("/ping", get(|| async { "pong" }));
        let handle = serve(loopback(None, 0), mount("/svc", router)).await.unwrap();
        let url = handle.access("/svc").url("/ping");
        let c = client();
        assert_eq!(c.get(&url).send().await.unwrap().text().await.unwrap(), "pong");
        handle.shutdown().await;
        let fresh = client();
        assert!(fresh.get(&url).send().await.is_err());
    }

    #[tokio::test]
    async fn error_bodies_decode_to_codes() {
        let router = Router::new().route(
            "/fail",
            get(|| async { Error::new(ErrorCode::PodUnreachable, "gone") }),
        );
        let handle = serve(loopback(None, 0), router).await.unwrap();
        let resp = client().get(handle.access("/").url("/fail")).send().await.unwrap();
        assert_eq!(resp.status().as_u16(), 502);
        let err = decode::<serde_json::Value>(resp).await.unwrap_err();
        assert_eq!(err.code(), ErrorCode::PodUnreachable);
    }

    #[test]
    fn deterministic_ports() {
        assert_eq!(loopback(Some(7000), 3).port(), 7003);
        assert_eq!(loopback(None, 3).port(), 0);
    }
}
