//! JSON-over-HTTP routes.

use std::future::Future;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::{header, Method};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tokio::net::TcpListener;
use tower_http::cors::{Any, CorsLayer};

use crate::analytics::{correction_stats, moderation_flags, CorrectionStats, ModerationFlag};
use crate::attempts::AttemptRecord;
use crate::error::ServiceError;
use crate::validator::{MarketInfo, ValidationResponse};
use crate::Service;

#[derive(Debug, Deserialize)]
struct ValidateRequest {
    market: String,
    text: String,
}

#[derive(Debug, Deserialize)]
struct AttemptRequest {
    session_id: String,
    market: String,
    text: String,
    #[serde(default)]
    submitted: bool,
}

#[derive(Debug, Deserialize)]
struct MarketQuery {
    market: Option<String>,
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload.map(|Json(v)| v).map_err(|e| ServiceError::InvalidRequest(e.body_text()))
}

impl Service {
    fn market_filter(&self, query: Result<Query<MarketQuery>, QueryRejection>) -> Result<Option<String>, ServiceError> {
        let Query(q) = query.map_err(|e| ServiceError::InvalidRequest(e.body_text()))?;
        match q.market {
            Some(m) if !self.validator().has_market(&m) => Err(ServiceError::UnknownMarket(m)),
            other => Ok(other),
        }
    }
}

async fn validate(
    State(service): State<Arc<Service>>,
    payload: Result<Json<ValidateRequest>, JsonRejection>,
) -> Result<Json<ValidationResponse>, ServiceError> {
    let req = body(payload)?;
    service.validator().validate_review(&req.market, &req.text).map(Json)
}

async fn record_attempt(
    State(service): State<Arc<Service>>,
    payload: Result<Json<AttemptRequest>, JsonRejection>,
) -> Result<Json<AttemptRecord>, ServiceError> {
    let req = body(payload)?;
    // scoring and the fsync both block; keep them off the async workers
    tokio::task::spawn_blocking(move || service.record_attempt(&req.session_id, &req.market, &req.text, req.submitted))
        .await
        .map_err(ServiceError::internal)?
        .map(Json)
}

async fn corrections(
    State(service): State<Arc<Service>>,
    query: Result<Query<MarketQuery>, QueryRejection>,
) -> Result<Json<CorrectionStats>, ServiceError> {
    let market = service.market_filter(query)?;
    Ok(Json(correction_stats(&service.log().records(), market.as_deref())))
}

async fn flags(
    State(service): State<Arc<Service>>,
    query: Result<Query<MarketQuery>, QueryRejection>,
) -> Result<Json<Vec<ModerationFlag>>, ServiceError> {
    let market = service.market_filter(query)?;
    Ok(Json(moderation_flags(&service.log().records(), market.as_deref())))
}

async fn markets(State(service): State<Arc<Service>>) -> Json<Vec<MarketInfo>> {
    Json(service.validator().markets())
}

/// All routes, with CORS open so an embedded form script on another origin
/// can call them.
pub fn router(service: Arc<Service>) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/v1/validate", post(validate))
        .route("/v1/attempts", post(record_attempt))
        .route("/v1/stats/corrections", get(corrections))
        .route("/v1/moderation/flags", get(flags))
        .route("/v1/markets", get(markets))
        .layer(cors)
        .with_state(service)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    service: Arc<Service>,
    listener: TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(service)).with_graceful_shutdown(shutdown).await
}
