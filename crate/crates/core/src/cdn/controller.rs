use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::{Arc, OnceLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::HeaderMap;
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::Mutex;
use serde::Deserialize;
use serde_json::{json, Value};

use super::strategy::{Candidate, NearestLeastLoaded, PlacementStrategy, RedirectStrategy, TopKPlacement};
use crate::error::{Error, ErrorCode, Result};
use crate::http::correlation;
use crate::model::{
    now_ns, AccessInfo, ContentPlacement, ReadyReport, RedirectDecision, Region, RequestEvent,
    SurrogateRegistration, TargetKind,
};
use crate::trace::{Action, Tracer};

/// Sees every end-user request the controller handles, synchronously.
pub trait RequestObserver: Send + Sync {
    fn on_request(&self, event: &RequestEvent);
}

#[derive(Debug, Clone)]
pub struct ControllerConfig {
    pub origin: AccessInfo,
    /// Where new surrogates pull from; the origin unless set.
    pub media_server: Option<AccessInfo>,
    pub placement_k: usize,
    pub default_contents: Vec<String>,
    /// Redirects younger than this count as active sessions.
    pub session_window_ns: u64,
}

impl ControllerConfig {
    pub fn new(origin: AccessInfo, default_contents: Vec<String>) -> Self {
        ControllerConfig {
            origin,
            media_server: None,
            placement_k: 10,
            default_contents,
            session_window_ns: 10_000_000_000,
        }
    }
}

struct Registered {
    registration: SurrogateRegistration,
    holdings: BTreeSet<String>,
    sessions: VecDeque<u64>,
}

#[derive(Default)]
struct ControllerState {
    registry: BTreeMap<String, Registered>,
    /// region id -> content id -> request count
    history: HashMap<String, BTreeMap<String, u64>>,
    decisions: u64,
}

/// CDN controller: surrogate registry, content placement and request
/// redirection. All state sits behind one lock, so registration, readiness,
/// deregistration and redirection linearize.
pub struct CdnController {
    config: ControllerConfig,
    placement: Box<dyn PlacementStrategy>,
    redirect: Box<dyn RedirectStrategy>,
    state: Mutex<ControllerState>,
    observer: OnceLock<Arc<dyn RequestObserver>>,
    tracer: Tracer,
}

impl CdnController {
    pub fn new(config: ControllerConfig, tracer: Tracer) -> Self {
        let placement = TopKPlacement {
            k: config.placement_k,
            default_contents: config.default_contents.clone(),
        };
        CdnController {
            config,
            placement: Box::new(placement),
            redirect: Box::new(NearestLeastLoaded),
            state: Mutex::new(ControllerState::default()),
            observer: OnceLock::new(),
            tracer,
        }
    }

    pub fn with_strategies(
        mut self,
        placement: Box<dyn PlacementStrategy>,
        redirect: Box<dyn RedirectStrategy>,
    ) -> Self {
        self.placement = placement;
        self.redirect = redirect;
        self
    }

    pub fn set_observer(&self, observer: Arc<dyn RequestObserver>) {
        let _ = self.observer.set(observer);
    }

    pub fn origin(&self) -> &AccessInfo {
        &self.config.origin
    }

    pub fn registrations(&self) -> Vec<SurrogateRegistration> {
        self.state
            .lock()
            .registry
            .values()
            .map(|r| r.registration.clone())
            .collect()
    }

    pub fn registration(&self, surrogate_id: &str) -> Option<SurrogateRegistration> {
        self.state
            .lock()
            .registry
            .get(surrogate_id)
            .map(|r| r.registration.clone())
    }

    pub fn is_ready(&self, surrogate_id: &str) -> bool {
        self.registration(surrogate_id).is_some_and(|r| r.ready)
    }

    pub fn holdings(&self, surrogate_id: &str) -> Option<BTreeSet<String>> {
        self.state.lock().registry.get(surrogate_id).map(|r| r.holdings.clone())
    }

    pub fn decision_count(&self) -> u64 {
        self.state.lock().decisions
    }

    /// Region's request counts as recorded so far.
    pub fn history(&self, region: &Region) -> BTreeMap<String, u64> {
        self.state.lock().history.get(&region.id).cloned().unwrap_or_default()
    }

    pub fn place_content(&self, surrogate_id: &str, region: &Region) -> ContentPlacement {
        let history = self.history(region);
        ContentPlacement {
            surrogate_id: surrogate_id.to_string(),
            contents: self.placement.place(region, &history),
            media_server: self
                .config
                .media_server
                .clone()
                .unwrap_or_else(|| self.config.origin.clone()),
        }
    }

    /// Adds a surrogate (not ready) and answers with its content placement.
    /// An identical re-registration gets the placement again.
    pub async fn register_surrogate(
        &self,
        mut reg: SurrogateRegistration,
        correlation_id: &str,
    ) -> Result<ContentPlacement> {
        if reg.surrogate_id.is_empty() {
            return Err(Error::new(ErrorCode::InvalidConfig, "surrogate_id must be non-empty"));
        }
        reg.control_access.validate()?;
        reg.data_access.validate()?;
        reg.ready = false;
        {
            let mut st = self.state.lock();
            match st.registry.get(&reg.surrogate_id) {
                Some(existing) if !existing.registration.same_as(&reg) => {
                    return Err(Error::new(
                        ErrorCode::AlreadyRegistered,
                        format!("surrogate {} registered with other endpoints", reg.surrogate_id),
                    ));
                }
                Some(_) => {}
                None => {
                    st.registry.insert(
                        reg.surrogate_id.clone(),
                        Registered {
                            registration: reg.clone(),
                            holdings: BTreeSet::new(),
                            sessions: VecDeque::new(),
                        },
                    );
                }
            }
        }
        self.tracer.emit(Action::Registration, correlation_id).await;
        self.tracer.emit(Action::ContentPlacement, correlation_id).await;
        let placement = self.place_content(&reg.surrogate_id, &reg.region);
        self.tracer.emit(Action::PlacementResponse, correlation_id).await;
        Ok(placement)
    }

    /// Makes the surrogate eligible for redirection. Holdings come from the
    /// report when given.
    pub async fn notify_ready(
        &self,
        surrogate_id: &str,
        report: ReadyReport,
        correlation_id: &str,
    ) -> Result<()> {
        {
            let mut st = self.state.lock();
            let entry = st.registry.get_mut(surrogate_id).ok_or_else(|| {
                Error::new(
                    ErrorCode::SurrogateNotFound,
                    format!("no surrogate {surrogate_id:?}"),
                )
            })?;
            if let Some(contents) = report.contents {
                entry.holdings = contents.into_iter().collect();
            }
            entry.registration.ready = true;
        }
        self.tracer.emit(Action::ReadyNotify, correlation_id).await;
        Ok(())
    }

    pub fn deregister_surrogate(&self, surrogate_id: &str) -> Result<SurrogateRegistration> {
        self.state
            .lock()
            .registry
            .remove(surrogate_id)
            .map(|r| r.registration)
            .ok_or_else(|| {
                Error::new(
                    ErrorCode::SurrogateNotFound,
                    format!("no surrogate {surrogate_id:?}"),
                )
            })
    }

    /// Picks where to send one end-user request, then hands the request to
    /// the observer.
    pub fn redirect_request(&self, region: &Region, content_id: &str, t: Option<u64>) -> RedirectDecision {
        let t = t.unwrap_or_else(now_ns);
        let decision = {
            let mut st = self.state.lock();
            st.decisions += 1;
            *st.history
                .entry(region.id.clone())
                .or_default()
                .entry(content_id.to_string())
                .or_default() += 1;
            let window = self.config.session_window_ns;
            for r in st.registry.values_mut() {
                while r.sessions.front().is_some_and(|&s| s + window <= t) {
                    r.sessions.pop_front();
                }
            }
            let ids: Vec<&String> = st.registry.keys().collect();
            let candidates: Vec<Candidate<'_>> = st
                .registry
                .values()
                .map(|r| Candidate {
                    registration: &r.registration,
                    holdings: &r.holdings,
                    active_sessions: r.sessions.len(),
                })
                .collect();
            let chosen = self
                .redirect
                .choose(region, content_id, &candidates)
                .filter(|&i| candidates[i].registration.ready)
                .map(|i| ids[i].clone());
            drop(candidates);
            match chosen {
                Some(id) => {
                    let r = st.registry.get_mut(&id).expect("chosen from registry");
                    r.sessions.push_back(t);
                    RedirectDecision {
                        target: r.registration.data_access.clone(),
                        target_kind: TargetKind::Surrogate,
                        surrogate_id: Some(id),
                    }
                }
                None => RedirectDecision {
                    target: self.config.origin.clone(),
                    target_kind: TargetKind::Origin,
                    surrogate_id: None,
                },
            }
        };
        if let Some(obs) = self.observer.get() {
            obs.on_request(&RequestEvent {
                region: region.clone(),
                content_id: content_id.to_string(),
                t,
            });
        }
        decision
    }

    /// POST /surrogates, POST /surrogates/{id}/ready, DELETE /surrogates/{id},
    /// GET /surrogates, GET /redirect
    pub fn router(self: &Arc<Self>) -> Router {
        Router::new()
            .route("/surrogates", get(list).post(register))
            .route("/surrogates/{id}", axum::routing::delete(deregister))
            .route("/surrogates/{id}/ready", post(ready))
            .route("/redirect", get(redirect))
            .with_state(self.clone())
    }
}

async fn list(State(c): State<Arc<CdnController>>) -> Json<Vec<SurrogateRegistration>> {
    Json(c.registrations())
}

async fn register(
    State(c): State<Arc<CdnController>>,
    headers: HeaderMap,
    Json(reg): Json<SurrogateRegistration>,
) -> Result<Json<ContentPlacement>> {
    c.register_surrogate(reg, &correlation(&headers)).await.map(Json)
}

async fn ready(
    State(c): State<Arc<CdnController>>,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>> {
    let report = if body.iter().all(u8::is_ascii_whitespace) {
        ReadyReport::default()
    } else {
        serde_json::from_slice(&body)?
    };
    c.notify_ready(&id, report, &correlation(&headers)).await?;
    Ok(Json(json!({ "ok": true })))
}

async fn deregister(
    State(c): State<Arc<CdnController>>,
    Path(id): Path<String>,
) -> Result<Json<SurrogateRegistration>> {
    c.deregister_surrogate(&id).map(Json)
}

#[derive(Deserialize)]
struct RedirectQuery {
    region: String,
    content_id: String,
    #[serde(default)]
    t_ns: Option<u64>,
}

async fn redirect(
    State(c): State<Arc<CdnController>>,
    Query(q): Query<RedirectQuery>,
) -> Result<Json<RedirectDecision>> {
    if q.region.trim().is_empty() || q.content_id.is_empty() {
        return Err(Error::new(
            ErrorCode::InvalidConfig,
            "region and content_id are required",
        ));
    }
    let region = Region::id(&q.region);
    Ok(Json(c.redirect_request(&region, &q.content_id, q.t_ns)))
}
