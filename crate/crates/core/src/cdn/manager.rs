use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Weak};
use std::time::Duration;

use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::controller::RequestObserver;
use super::detector::{DetectorConfig, FlashCrowdDetector};
use super::select::select_pod;
use crate::error::{Error, ErrorBody, ErrorCode, Result};
use crate::http::{client, correlation, decode, transport_error};
use crate::model::wire::{
    DisposeResponse, ProvisionRequest, ProvisionResponse, RegistrationOutcome, CORRELATION_HEADER,
};
use crate::model::{
    AccessInfo, ComponentSummary, FlashCrowdTrigger, PoDDescriptor, Region, RequestEvent,
};
use crate::trace::{Action, Tracer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderStatus {
    Provisioning,
    Registered,
    Failed,
    Disposed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRecord {
    pub order_id: String,
    pub correlation_id: String,
    pub region: Region,
    pub trigger: FlashCrowdTrigger,
    pub status: OrderStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pod_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub type_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registration: Option<RegistrationOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

#[derive(Debug, Clone)]
pub struct ManagerConfig {
    pub component_provider: AccessInfo,
    /// Controller access handed to new surrogates.
    pub controller: AccessInfo,
    pub pods: Vec<PoDDescriptor>,
    pub required_features: BTreeSet<String>,
    /// Free slots a PoD needs to be eligible.
    pub required_slots: u32,
    pub detector: DetectorConfig,
    pub call_timeout: Duration,
    pub provision_timeout: Duration,
}

impl ManagerConfig {
    pub fn new(component_provider: AccessInfo, controller: AccessInfo, pods: Vec<PoDDescriptor>) -> Self {
        ManagerConfig {
            component_provider,
            controller,
            pods,
            required_features: ["ABR-streaming".to_string()].into(),
            required_slots: 2,
            detector: DetectorConfig::default(),
            call_timeout: Duration::from_secs(5),
            provision_timeout: Duration::from_secs(60),
        }
    }
}

/// CDN deployment manager: turns flash-crowd triggers into provisioning
/// orders against the component provider, then hands each new surrogate the
/// controller to register with. One order in flight per region.
pub struct CdnDeploymentManager {
    config: ManagerConfig,
    controller: Mutex<AccessInfo>,
    detector: Mutex<FlashCrowdDetector>,
    orders: Mutex<BTreeMap<String, OrderRecord>>,
    in_flight: AtomicU64,
    next_order: AtomicU64,
    correlation_prefix: Mutex<String>,
    client: reqwest::Client,
    tracer: Tracer,
    me: Weak<CdnDeploymentManager>,
}

impl CdnDeploymentManager {
    pub fn new(config: ManagerConfig, tracer: Tracer) -> Arc<Self> {
        Arc::new_cyclic(|me| CdnDeploymentManager {
            controller: Mutex::new(config.controller.clone()),
            detector: Mutex::new(FlashCrowdDetector::new(config.detector.clone())),
            orders: Mutex::new(BTreeMap::new()),
            in_flight: AtomicU64::new(0),
            next_order: AtomicU64::new(1),
            correlation_prefix: Mutex::new("order".into()),
            client: client(),
            tracer,
            config,
            me: me.clone(),
        })
    }

    /// Correlation ids of detector-started orders are `{prefix}-{n}`.
    pub fn set_correlation_prefix(&self, prefix: impl Into<String>) {
        *self.correlation_prefix.lock() = prefix.into();
    }

    /// Controller access handed to subsequently provisioned surrogates.
    pub fn set_controller_access(&self, controller: AccessInfo) {
        *self.controller.lock() = controller;
    }

    pub fn orders(&self) -> Vec<OrderRecord> {
        self.orders.lock().values().cloned().collect()
    }

    pub fn order(&self, order_id: &str) -> Option<OrderRecord> {
        self.orders.lock().get(order_id).cloned()
    }

    pub fn in_flight(&self) -> u64 {
        self.in_flight.load(Ordering::SeqCst)
    }

    /// Waits until no order is in flight.
    pub async fn wait_idle(&self, timeout: Duration) -> Result<()> {
        let deadline = tokio::time::Instant::now() + timeout;
        while self.in_flight() > 0 {
            if tokio::time::Instant::now() >= deadline {
                return Err(Error::new(
                    ErrorCode::Timeout,
                    format!("{} orders still in flight after {timeout:?}", self.in_flight()),
                ));
            }
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
        Ok(())
    }

    /// Starts an order for `trigger` in the background and returns its
    /// record. Fails if the region already has one in flight.
    pub fn submit(&self, trigger: FlashCrowdTrigger, correlation_id: Option<String>) -> Result<OrderRecord> {
        let mut det = self.detector.lock();
        if det.suppression(&trigger.region, trigger.window.1)
            == Some(super::detector::Suppression::InFlight)
        {
            return Err(Error::new(
                ErrorCode::InvalidState,
                format!("an order for region {} is already in flight", trigger.region.id),
            ));
        }
        det.mark_in_flight(&trigger.region);
        drop(det);
        Ok(self.start_order(trigger, correlation_id))
    }

    fn start_order(&self, trigger: FlashCrowdTrigger, correlation_id: Option<String>) -> OrderRecord {
        let n = self.next_order.fetch_add(1, Ordering::SeqCst);
        let order_id = format!("order-{n}");
        let correlation_id = correlation_id
            .filter(|c| !c.is_empty())
            .unwrap_or_else(|| format!("{}-{n}", self.correlation_prefix.lock()));
        let record = OrderRecord {
            order_id: order_id.clone(),
            correlation_id,
            region: trigger.region.clone(),
            trigger,
            status: OrderStatus::Provisioning,
            pod_id: None,
            type_id: None,
            component_id: None,
            registration: None,
            error: None,
        };
        self.orders.lock().insert(order_id.clone(), record.clone());
        self.in_flight.fetch_add(1, Ordering::SeqCst);
        let me = self.me.upgrade().expect("manager alive while handling requests");
        tokio::spawn(async move {
            let rec = me.order(&order_id).expect("order just inserted");
            let result = me.order_provisioning(&rec).await;
            me.finish(&order_id, result);
        });
        record
    }

    fn finish(&self, order_id: &str, result: Result<()>) {
        let mut orders = self.orders.lock();
        let rec = orders.get_mut(order_id).expect("known order");
        let ok = result.is_ok();
        match result {
            Ok(()) => rec.status = OrderStatus::Registered,
            Err(e) => {
                tracing::warn!(order = order_id, "order failed: {e}");
                rec.status = OrderStatus::Failed;
                rec.error = Some(e.to_body());
            }
        }
        let (region, t) = (rec.region.clone(), rec.trigger.window.1);
        drop(orders);
        self.detector.lock().release(&region, ok, t);
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
    }

    fn update(&self, order_id: &str, f: impl FnOnce(&mut OrderRecord)) {
        if let Some(r) = self.orders.lock().get_mut(order_id) {
            f(r);
        }
    }

    /// Selects a PoD, picks a component type from the catalogue, orders
    /// provisioning and then starts post-deployment.
    pub async fn order_provisioning(&self, order: &OrderRecord) -> Result<()> {
        let corr = order.correlation_id.as_str();
        self.tracer.emit(Action::SelectPod, corr).await;
        let pod = select_pod(&self.config.pods, &order.region, self.config.required_slots)?;
        self.update(&order.order_id, |r| r.pod_id = Some(pod.pod_id.clone()));

        self.tracer.emit(Action::CatalogueRequest, corr).await;
        let catalogue = self.fetch_catalogue(corr).await?;
        self.tracer.emit(Action::CatalogueResponse, corr).await;
        let ty = catalogue
            .iter()
            .find(|t| self.config.required_features.is_subset(&t.features))
            .ok_or_else(|| {
                Error::new(
                    ErrorCode::NoMatchingComponentType,
                    format!("no component type offers {:?}", self.config.required_features),
                )
            })?;
        self.update(&order.order_id, |r| r.type_id = Some(ty.type_id.clone()));

        self.tracer.emit(Action::ProvisionRequest, corr).await;
        let ack = self.request_provisioning(&ty.type_id, &pod.access, corr).await?;
        self.update(&order.order_id, |r| r.component_id = Some(ack.cdn_component_id.clone()));

        self.tracer.emit(Action::PostDeploymentStart, corr).await;
        let control = ack.surrogate_control.ok_or_else(|| {
            Error::new(
                ErrorCode::PostDeploymentFailed,
                format!("{}: provider did not name a surrogate endpoint", ack.cdn_component_id),
            )
        })?;
        let controller = self.controller.lock().clone();
        let outcome = self.start_post_deployment(&control, &controller, corr).await?;
        self.update(&order.order_id, |r| r.registration = Some(outcome));
        Ok(())
    }

    async fn fetch_catalogue(&self, corr: &str) -> Result<Vec<ComponentSummary>> {
        let url = self.config.component_provider.url("/CDNComponentCatalogue");
        let resp = self
            .client
            .get(&url)
            .header(CORRELATION_HEADER, corr)
            .timeout(self.config.call_timeout)
            .send()
            .await
            .map_err(|e| transport_error(ErrorCode::Internal, &url, &e))?;
        decode(resp).await
    }

    async fn request_provisioning(
        &self,
        type_id: &str,
        pod_access: &AccessInfo,
        corr: &str,
    ) -> Result<ProvisionResponse> {
        let url = self.config.component_provider.url(&format!("/CDNComponent/{type_id}"));
        let resp = self
            .client
            .post(&url)
            .header(CORRELATION_HEADER, corr)
            .timeout(self.config.provision_timeout)
            .json(&ProvisionRequest {
                pod_access: pod_access.clone(),
            })
            .send()
            .await
            .map_err(|e| transport_error(ErrorCode::Internal, &url, &e))?;
        decode(resp).await
    }

    /// Sends the surrogate the controller it should register with.
    pub async fn start_post_deployment(
        &self,
        surrogate_control: &AccessInfo,
        controller: &AccessInfo,
        corr: &str,
    ) -> Result<RegistrationOutcome> {
        self.tracer.emit(Action::ControllerAccessInfo, corr).await;
        let url = surrogate_control.url("/register-with");
        let resp = self
            .client
            .post(&url)
            .header(CORRELATION_HEADER, corr)
            .timeout(self.config.provision_timeout)
            .json(controller)
            .send()
            .await
            .map_err(|e| transport_error(ErrorCode::PostDeploymentFailed, &url, &e))?;
        decode(resp).await
    }

    /// Deregisters the order's surrogate and disposes of its component.
    pub async fn dispose_order(&self, order_id: &str) -> Result<()> {
        let rec = self
            .order(order_id)
            .filter(|r| r.status == OrderStatus::Registered)
            .ok_or_else(|| {
                Error::new(
                    ErrorCode::ComponentNotFound,
                    format!("no registered order {order_id:?}"),
                )
            })?;
        let component_id = rec.component_id.clone().unwrap_or_default();
        let corr = rec.correlation_id.as_str();
        if let Some(reg) = &rec.registration {
            let controller = self.controller.lock().clone();
            let url = controller.url(&format!("/surrogates/{}", reg.surrogate_id));
            let resp = self
                .client
                .delete(&url)
                .header(CORRELATION_HEADER, corr)
                .timeout(self.config.call_timeout)
                .send()
                .await
                .map_err(|e| transport_error(ErrorCode::Internal, &url, &e))?;
            match decode::<serde_json::Value>(resp).await {
                Ok(_) => {}
                Err(e) if e.code() == ErrorCode::SurrogateNotFound => {}
                Err(e) => return Err(e),
            }
        }
        self.dispose_component(&component_id, corr).await?;
        self.update(order_id, |r| r.status = OrderStatus::Disposed);
        self.detector.lock().uncover(&rec.region);
        Ok(())
    }

    /// DELETE /CDNComponent/{id} at the provider.
    pub async fn dispose_component(&self, component_id: &str, corr: &str) -> Result<()> {
        let url = self
            .config
            .component_provider
            .url(&format!("/CDNComponent/{component_id}"));
        let resp = self
            .client
            .delete(&url)
            .header(CORRELATION_HEADER, corr)
            .timeout(self.config.provision_timeout)
            .send()
            .await
            .map_err(|e| transport_error(ErrorCode::Internal, &url, &e))?;
        let body: DisposeResponse = resp.json().await.map_err(|e| {
            Error::new(ErrorCode::Internal, format!("undecodable dispose response: {e}"))
        })?;
        match (body.success, body.error) {
            (true, _) => Ok(()),
            (false, Some(err)) => Err(err.into()),
            (false, None) => Err(Error::new(ErrorCode::Internal, "dispose failed")),
        }
    }

    /// POST /triggers, GET /orders, GET /orders/{id}, DELETE /orders/{id}
    pub fn router(self: &Arc<Self>) -> Router {
        Router::new()
            .route("/triggers", post(trigger))
            .route("/orders", get(list_orders))
            .route("/orders/{id}", get(get_order))
            .route("/orders/{id}", delete(dispose))
            .with_state(self.clone())
    }
}

impl RequestObserver for CdnDeploymentManager {
    fn on_request(&self, event: &RequestEvent) {
        let mut det = self.detector.lock();
        if let Some(trigger) = det.observe(event) {
            det.mark_in_flight(&trigger.region);
            drop(det);
            self.start_order(trigger, None);
        }
    }
}

async fn trigger(
    State(m): State<Arc<CdnDeploymentManager>>,
    headers: HeaderMap,
    Json(trigger): Json<FlashCrowdTrigger>,
) -> Result<(StatusCode, Json<OrderRecord>)> {
    let corr = correlation(&headers);
    let rec = m.submit(trigger, Some(corr))?;
    Ok((StatusCode::ACCEPTED, Json(rec)))
}

async fn list_orders(State(m): State<Arc<CdnDeploymentManager>>) -> Json<Vec<OrderRecord>> {
    Json(m.orders())
}

async fn get_order(
    State(m): State<Arc<CdnDeploymentManager>>,
    Path(id): Path<String>,
) -> Result<Json<OrderRecord>> {
    m.order(&id)
        .map(Json)
        .ok_or_else(|| Error::new(ErrorCode::ComponentNotFound, format!("no order {id:?}")))
}

async fn dispose(
    State(m): State<Arc<CdnDeploymentManager>>,
    Path(id): Path<String>,
) -> Result<Json<DisposeResponse>> {
    m.dispose_order(&id).await?;
    Ok(Json(DisposeResponse {
        success: true,
        error: None,
    }))
}
