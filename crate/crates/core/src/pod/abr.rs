use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap};
use axum::response::Response;
use axum::routing::get;
use axum::{Json, Router};
use parking_lot::RwLock;

use super::instance::{basic_health_route, core_control_routes, InstanceCore};
use super::manifest::{build_manifest, segment_bytes, AbrManifest, DEFAULT_BITRATES, DEFAULT_SEGMENT_DURATION_S};
use super::media::{blob_response, Blob};
use crate::error::{Error, ErrorCode, Result};
use crate::http::{client, correlation, decode_error, transport_error};
use crate::model::wire::{CONTENT_DURATION_HEADER, CONTENT_SHA256_HEADER, CORRELATION_HEADER};
use crate::model::Role;

/// ABR streaming server. Content is read through the data interface of the
/// cache node found in the peer table.
pub struct AbrServer {
    pub core: Arc<InstanceCore>,
    client: reqwest::Client,
    blobs: RwLock<HashMap<String, Blob>>,
    segment_duration_s: f64,
    bitrates: Vec<u64>,
}

impl AbrServer {
    pub fn new(core: Arc<InstanceCore>) -> Self {
        let segment_duration_s = core
            .config
            .get("segment_duration_s")
            .and_then(|v| v.parse().ok())
            .unwrap_or(DEFAULT_SEGMENT_DURATION_S);
        let bitrates = core
            .config
            .get("bitrates")
            .map(|v| v.split(',').filter_map(|b| b.trim().parse().ok()).collect::<Vec<u64>>())
            .filter(|b| !b.is_empty())
            .unwrap_or_else(|| DEFAULT_BITRATES.to_vec());
        AbrServer {
            core,
            client: client(),
            blobs: RwLock::new(HashMap::new()),
            segment_duration_s,
            bitrates,
        }
    }

    async fn blob(&self, content_id: &str, correlation_id: &str) -> Result<Blob> {
        if let Some(b) = self.blobs.read().get(content_id) {
            return Ok(b.clone());
        }
        let cache = self.core.peer_with_role(Role::CacheNode).ok_or_else(|| {
            Error::new(
                ErrorCode::ContentNotFound,
                format!("{}: no cache peer known", self.core.instance_id),
            )
        })?;
        let url = cache.data_access.url(&format!("/contents/{content_id}"));
        let resp = self
            .client
            .get(&url)
            .header(CORRELATION_HEADER, correlation_id)
            .timeout(Duration::from_secs(10))
            .send()
            .await
            .map_err(|e| transport_error(ErrorCode::ContentSourceUnavailable, &url, &e))?;
        if !resp.status().is_success() {
            return Err(decode_error(resp).await);
        }
        let duration_s = resp
            .headers()
            .get(CONTENT_DURATION_HEADER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.parse::<f64>().ok())
            .unwrap_or(0.0);
        let declared = resp
            .headers()
            .get(CONTENT_SHA256_HEADER)
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
        let bytes = resp
            .bytes()
            .await
            .map_err(|e| transport_error(ErrorCode::ContentSourceUnavailable, &url, &e))?;
        let blob = Blob::new(bytes.to_vec(), duration_s);
        if declared.is_some_and(|d| d != blob.sha256) {
            return Err(Error::new(
                ErrorCode::InvalidContent,
                format!("{content_id}: cache peer returned corrupted bytes"),
            ));
        }
        self.blobs.write().insert(content_id.to_string(), blob.clone());
        Ok(blob)
    }

    pub async fn generate_manifest(&self, content_id: &str, correlation_id: &str) -> Result<AbrManifest> {
        let blob = self.blob(content_id, correlation_id).await?;
        build_manifest(content_id, blob.duration_s, self.segment_duration_s, &self.bitrates)
    }

    pub async fn serve_segment(
        &self,
        content_id: &str,
        rep_id: &str,
        n: u64,
        correlation_id: &str,
    ) -> Result<Vec<u8>> {
        let blob = self.blob(content_id, correlation_id).await?;
        let manifest =
            build_manifest(content_id, blob.duration_s, self.segment_duration_s, &self.bitrates)?;
        let range = manifest.segment_range(rep_id, n)?;
        Ok(segment_bytes(&blob.bytes, range))
    }

    pub fn control_router(self: &Arc<Self>) -> Router {
        core_control_routes(self.core.clone()).merge(basic_health_route(self.core.clone()))
    }

    pub fn data_router(self: &Arc<Self>) -> Router {
        Router::new()
            .route("/contents/{id}", get(content))
            .route("/contents/{id}/manifest", get(manifest))
            .route("/contents/{id}/reps/{rep}/segments/{n}", get(segment))
            .with_state(self.clone())
    }
}

async fn content(
    State(a): State<Arc<AbrServer>>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Result<Response> {
    Ok(blob_response(&a.blob(&id, &correlation(&headers)).await?))
}

async fn manifest(
    State(a): State<Arc<AbrServer>>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Result<Json<AbrManifest>> {
    a.generate_manifest(&id, &correlation(&headers)).await.map(Json)
}

async fn segment(
    State(a): State<Arc<AbrServer>>,
    headers: HeaderMap,
    Path((id, rep, n)): Path<(String, String, u64)>,
) -> Result<Response> {
    let bytes = a.serve_segment(&id, &rep, n, &correlation(&headers)).await?;
    Ok(Response::builder()
        .header(header::CONTENT_TYPE, "video/iso.segment")
        .body(Body::from(bytes))
        .expect("static headers are valid"))
}
