use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, State};
use axum::http::HeaderMap;
use axum::response::Response;
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::{Mutex, RwLock};

use super::instance::{core_control_routes, InstanceCore};
use super::media::{blob_response, Blob};
use crate::error::{Error, ErrorCode, Result};
use crate::http::{client, correlation, decode, decode_error, transport_error};
use crate::model::wire::{
    HealthReport, PullEntry, PullOutcome, PullReport, RegistrationOutcome, StoredContent,
    CONTENT_DURATION_HEADER, CONTENT_SHA256_HEADER, CORRELATION_HEADER,
};
use crate::model::{
    AccessInfo, ContentPlacement, InstanceState, ReadyReport, Role,
    SurrogateRegistration,
};
use crate::trace::Action;

/// Config keys a cache node understands.
pub const CONFIG_COMPONENT_ID: &str = "component_id";
pub const CONFIG_BOOTSTRAP_CONTENT: &str = "bootstrap_content";
pub const CONFIG_BOOTSTRAP_SOURCE: &str = "bootstrap_source";
pub const CONFIG_MEDIA_SERVER: &str = "media_server";

pub const REGISTRATION_ATTEMPTS: u32 = 3;

/// Cache node: stores pulled contents and drives the surrogate's
/// registration with a CDN controller.
pub struct CacheNode {
    pub core: Arc<InstanceCore>,
    contents: RwLock<BTreeMap<String, Blob>>,
    registered_controller: Mutex<Option<AccessInfo>>,
    client: reqwest::Client,
    registration_backoff: Duration,
    call_timeout: Duration,
}

impl CacheNode {
    pub fn new(core: Arc<InstanceCore>) -> Self {
        let ms = |key: &str, default: u64| {
            core.config
                .get(key)
                .and_then(|v| v.parse().ok())
                .unwrap_or(default)
        };
        let registration_backoff = Duration::from_millis(ms("registration_backoff_ms", 100));
        let call_timeout = Duration::from_millis(ms("call_timeout_ms", 5000));
        CacheNode {
            core,
            contents: RwLock::new(BTreeMap::new()),
            registered_controller: Mutex::new(None),
            client: client(),
            registration_backoff,
            call_timeout,
        }
    }

    /// Surrogate identity announced to the controller.
    pub fn surrogate_id(&self) -> String {
        self.core
            .config
            .get(CONFIG_COMPONENT_ID)
            .cloned()
            .unwrap_or_else(|| self.core.instance_id.clone())
    }

    pub fn stored(&self) -> Vec<StoredContent> {
        self.contents
            .read()
            .iter()
            .map(|(id, b)| StoredContent {
                content_id: id.clone(),
                size_bytes: b.bytes.len() as u64,
                sha256: b.sha256.clone(),
            })
            .collect()
    }

    pub fn content_ids(&self) -> Vec<String> {
        self.contents.read().keys().cloned().collect()
    }

    pub fn get_content(&self, content_id: &str) -> Result<Blob> {
        self.contents.read().get(content_id).cloned().ok_or_else(|| {
            Error::new(
                ErrorCode::ContentNotFound,
                format!("{}: content {content_id:?} not cached", self.core.instance_id),
            )
        })
    }

    pub fn registered_controller(&self) -> Option<AccessInfo> {
        self.registered_controller.lock().clone()
    }

    pub fn health(&self) -> HealthReport {
        let mut report = self.core.health();
        report.contents = self.stored();
        report.registered_controller = self.registered_controller();
        report
    }

    /// Pulls the sample contents named in the package config, if any. Runs
    /// right after start, before the deployment is acknowledged.
    pub async fn bootstrap(&self) -> Result<Option<PullReport>> {
        let Some(list) = self.core.config.get(CONFIG_BOOTSTRAP_CONTENT) else {
            return Ok(None);
        };
        let contents: Vec<String> = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        if contents.is_empty() {
            return Ok(None);
        }
        let source = self
            .core
            .config
            .get(CONFIG_BOOTSTRAP_SOURCE)
            .or_else(|| self.core.config.get(CONFIG_MEDIA_SERVER))
            .ok_or_else(|| {
                Error::new(
                    ErrorCode::InvalidConfig,
                    "bootstrap content configured without a source",
                )
            })?;
        let placement = ContentPlacement {
            surrogate_id: self.surrogate_id(),
            contents,
            media_server: AccessInfo::new(source.clone()),
        };
        self.fetch_all(&placement, "").await.map(Some)
    }

    /// Fetches every content in the placement from its media server.
    pub async fn pull_content(
        &self,
        placement: &ContentPlacement,
        correlation_id: &str,
    ) -> Result<PullReport> {
        placement.media_server.validate()?;
        if placement.contents.is_empty() {
            return Ok(PullReport::default());
        }
        let tracer = &self.core.tracer;
        tracer.emit(Action::ContentPullRequest, correlation_id).await;
        let report = self.fetch_all(placement, correlation_id).await;
        tracer.emit(Action::ContentPullResponse, correlation_id).await;
        report
    }

    async fn fetch_all(&self, placement: &ContentPlacement, correlation_id: &str) -> Result<PullReport> {
        placement.media_server.validate()?;
        let mut report = PullReport::default();
        let mut unreachable = 0;
        for id in &placement.contents {
            match self.fetch_one(&placement.media_server, id, correlation_id).await {
                Ok(blob) => {
                    report.entries.push(PullEntry {
                        content_id: id.clone(),
                        outcome: PullOutcome::Fetched,
                        sha256: Some(blob.sha256.clone()),
                        error: None,
                    });
                    self.contents.write().insert(id.clone(), blob);
                }
                Err((transport, e)) => {
                    unreachable += usize::from(transport);
                    report.entries.push(PullEntry {
                        content_id: id.clone(),
                        outcome: PullOutcome::Failed,
                        sha256: None,
                        error: Some(e.to_string()),
                    });
                }
            }
        }
        if unreachable == placement.contents.len() {
            return Err(Error::new(
                ErrorCode::ContentSourceUnavailable,
                format!("media server {} unreachable", placement.media_server),
            ));
        }
        Ok(report)
    }

    /// Err carries whether the failure was at the transport level.
    async fn fetch_one(
        &self,
        source: &AccessInfo,
        content_id: &str,
        correlation_id: &str,
    ) -> std::result::Result<Blob, (bool, Error)> {
        let url = source.url(&format!("/contents/{content_id}"));
        let resp = self
            .client
            .get(&url)
            .header(CORRELATION_HEADER, correlation_id)
            .timeout(self.call_timeout)
            .send()
            .await
            .map_err(|e| (true, transport_error(ErrorCode::ContentSourceUnavailable, &url, &e)))?;
        if !resp.status().is_success() {
            return Err((false, decode_error(resp).await));
        }
        let header = |name: &str| {
            resp.headers()
                .get(name)
                .and_then(|v| v.to_str().ok())
                .map(str::to_string)
        };
        let declared_sha = header(CONTENT_SHA256_HEADER);
        let duration_s = header(CONTENT_DURATION_HEADER)
            .and_then(|v| v.parse::<f64>().ok())
            .unwrap_or(0.0);
        let bytes = resp
            .bytes()
            .await
            .map_err(|e| (true, transport_error(ErrorCode::ContentSourceUnavailable, &url, &e)))?;
        let blob = Blob::new(bytes.to_vec(), duration_s);
        if let Some(sha) = declared_sha {
            if sha != blob.sha256 {
                return Err((
                    false,
                    Error::new(
                        ErrorCode::InvalidContent,
                        format!("{content_id}: hash {} does not match declared {sha}", blob.sha256),
                    ),
                ));
            }
        }
        Ok(blob)
    }

    /// The registration sent to the controller. Clients are redirected to
    /// the ABR peer when there is one.
    pub fn registration(&self) -> Result<SurrogateRegistration> {
        let (control, own_data) = self.core.own_access().ok_or_else(|| {
            Error::new(ErrorCode::InvalidState, "instance endpoints not bound yet")
        })?;
        let data_access = self
            .core
            .peer_with_role(Role::AbrStreamingServer)
            .map(|p| p.data_access)
            .unwrap_or(own_data);
        Ok(SurrogateRegistration {
            surrogate_id: self.surrogate_id(),
            region: self.core.region.clone(),
            control_access: control,
            data_access,
            ready: false,
        })
    }

    /// Registers with `controller`, applies the returned placement, then
    /// notifies readiness.
    pub async fn register_with(
        &self,
        controller: &AccessInfo,
        correlation_id: &str,
    ) -> Result<RegistrationOutcome> {
        if self.core.state() != InstanceState::Orchestrated {
            return Err(Error::new(
                ErrorCode::InvalidState,
                format!(
                    "{} is {:?}, registration requires orchestrated",
                    self.core.instance_id,
                    self.core.state()
                ),
            ));
        }
        controller.validate()?;
        let reg = self.registration()?;
        let placement: ContentPlacement = self
            .call_controller(controller, "/surrogates", &reg, correlation_id)
            .await?;
        *self.registered_controller.lock() = Some(controller.clone());

        let pull = self.pull_content(&placement, correlation_id).await?;
        let ready = ReadyReport {
            contents: Some(self.content_ids()),
        };
        let path = format!("/surrogates/{}/ready", reg.surrogate_id);
        let _: serde_json::Value = self
            .call_controller(controller, &path, &ready, correlation_id)
            .await?;
        Ok(RegistrationOutcome {
            surrogate_id: reg.surrogate_id,
            placement,
            pull,
            ready: true,
        })
    }

    /// POSTs to the controller, retrying transport failures and 5xx answers.
    async fn call_controller<B, T>(
        &self,
        controller: &AccessInfo,
        path: &str,
        body: &B,
        correlation_id: &str,
    ) -> Result<T>
    where
        B: serde::Serialize + ?Sized,
        T: serde::de::DeserializeOwned,
    {
        let url = controller.url(path);
        let mut last = String::new();
        for attempt in 1..=REGISTRATION_ATTEMPTS {
            if attempt > 1 {
                tokio::time::sleep(self.registration_backoff * (attempt - 1)).await;
            }
            let sent = self
                .client
                .post(&url)
                .header(CORRELATION_HEADER, correlation_id)
                .timeout(self.call_timeout)
                .json(body)
                .send()
                .await;
            match sent {
                Err(e) => last = transport_error(ErrorCode::RegistrationFailed, &url, &e).to_string(),
                Ok(resp) if resp.status().is_server_error() => {
                    last = decode_error(resp).await.to_string();
                }
                Ok(resp) => return decode(resp).await,
            }
        }
        Err(Error::new(
            ErrorCode::RegistrationFailed,
            format!("{url}: {REGISTRATION_ATTEMPTS} attempts failed, last: {last}"),
        ))
    }

    pub fn control_router(self: &Arc<Self>) -> Router {
        let own = Router::new()
            .route("/health", get(health))
            .route("/register-with", post(register_with))
            .with_state(self.clone());
        own.merge(core_control_routes(self.core.clone()))
    }

    pub fn data_router(self: &Arc<Self>) -> Router {
        Router::new()
            .route("/contents", get(list))
            .route("/contents/{id}", get(fetch))
            .with_state(self.clone())
    }
}

async fn health(State(c): State<Arc<CacheNode>>) -> Json<HealthReport> {
    Json(c.health())
}

async fn register_with(
    State(c): State<Arc<CacheNode>>,
    headers: HeaderMap,
    Json(controller): Json<AccessInfo>,
) -> Result<Json<RegistrationOutcome>> {
    let corr = correlation(&headers);
    c.register_with(&controller, &corr).await.map(Json)
}

async fn list(State(c): State<Arc<CacheNode>>) -> Json<Vec<StoredContent>> {
    Json(c.stored())
}

async fn fetch(State(c): State<Arc<CacheNode>>, Path(id): Path<String>) -> Result<Response> {
    Ok(blob_response(&c.get_content(&id)?))
}
