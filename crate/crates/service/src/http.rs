//! HTTP+JSON surface.

use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, FromRef, FromRequestParts, Path, Query, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use registry_core::family::FamilyError;
use registry_core::{DeploymentStatus, RegistrationSubmission, RegistryIdentifier};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::auth::{AuthOutcome, Credentials, PrincipalRole};
use crate::config::write_snapshot;
use crate::registry::{
    AddVersionRequest, AttestRequest, FineRequest, OpenViolationRequest, Registry, RegistryError, StatusRequest,
    ThirdPartyCheckRequest,
};

pub const MAX_BODY_BYTES: usize = 1 << 20;

#[derive(Clone)]
pub struct AppState {
    pub registry: Arc<RwLock<Registry>>,
    pub credentials: Arc<Credentials>,
    pub snapshots: Option<SnapshotPolicy>,
}

#[derive(Debug, Clone)]
pub struct SnapshotPolicy {
    pub path: PathBuf,
    pub every: u64,
}

impl AppState {
    pub fn new(registry: Registry, credentials: Credentials) -> Self {
        Self {
            registry: Arc::new(RwLock::new(registry)),
            credentials: Arc::new(credentials),
            snapshots: None,
        }
    }

    pub fn with_snapshots(mut self, policy: Option<SnapshotPolicy>) -> Self {
        self.snapshots = policy;
        self
    }

    pub fn read<T>(&self, f: impl FnOnce(&Registry) -> T) -> T {
        f(&self.registry.read().expect("registry lock poisoned"))
    }

    /// Runs a command on the single serialized write path.
    pub fn write<T>(&self, f: impl FnOnce(&mut Registry) -> Result<T, RegistryError>) -> Result<T, ApiError> {
        let mut registry = self.registry.write().expect("registry lock poisoned");
        let before = registry.state().last_sequence;
        let out = f(&mut registry)?;
        if let Some(policy) = &self.snapshots {
            let after = registry.state().last_sequence;
            if policy.every > 0 && after / policy.every > before / policy.every {
                if let Err(e) = write_snapshot(&policy.path, registry.state()) {
                    tracing::warn!(error = %e, "snapshot write failed");
                }
            }
        }
        Ok(out)
    }
}

/// Error body: `{code, message, details}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub details: serde_json::Value,
}

#[derive(Debug)]
pub struct ApiError(pub RegistryError);

impl From<RegistryError> for ApiError {
    fn from(e: RegistryError) -> Self {
        ApiError(e)
    }
}

pub fn status_for(error: &RegistryError) -> StatusCode {
    match error {
        RegistryError::Unauthorized => StatusCode::UNAUTHORIZED,
        RegistryError::Forbidden(_) => StatusCode::FORBIDDEN,
        RegistryError::NotFound(_) => StatusCode::NOT_FOUND,
        RegistryError::BadRequest(_) => StatusCode::BAD_REQUEST,
        RegistryError::Conflict { .. } | RegistryError::Family(FamilyError::DuplicateVersionName(_)) => {
            StatusCode::CONFLICT
        }
        RegistryError::Revoked(_) => StatusCode::GONE,
        RegistryError::Identifier(_)
        | RegistryError::Stamp(_)
        | RegistryError::Log(_)
        | RegistryError::CorruptLog(_) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = status_for(&self.0);
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!(error = %self.0, "request failed");
        }
        let body = ErrorBody {
            code: self.0.code().to_owned(),
            message: self.0.to_string(),
            details: self.0.details(),
        };
        (status, Json(body)).into_response()
    }
}

/// The authenticated principal; no `Authorization` header means `Public`.
pub struct Principal(pub PrincipalRole);

impl<S> FromRequestParts<S> for Principal
where
    AppState: FromRef<S>,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        let app = AppState::from_ref(state);
        let header = match parts.headers.get(header::AUTHORIZATION) {
            None => None,
            Some(v) => Some(v.to_str().map_err(|_| ApiError(RegistryError::Unauthorized))?),
        };
        match app.credentials.authenticate(header) {
            AuthOutcome::Principal(p) => Ok(Principal(p)),
            AuthOutcome::UnknownToken => Err(ApiError(RegistryError::Unauthorized)),
        }
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError(RegistryError::BadRequest(format!("invalid JSON body: {e}"))))
}

fn parse_id(raw: &str) -> Result<RegistryIdentifier, ApiError> {
    RegistryIdentifier::parse(raw).map_err(|_| ApiError(RegistryError::NotFound(raw.to_owned())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusBody {
    #[serde(default)]
    pub expected_sequence: Option<u64>,
    pub to: DeploymentStatus,
    #[serde(default)]
    pub deployment_date: Option<NaiveDate>,
}

#[derive(Debug, Deserialize)]
struct SearchParams {
    #[serde(default)]
    q: String,
    #[serde(default)]
    page: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct OverdueParams {
    #[serde(default)]
    as_of: Option<NaiveDate>,
}

async fn submit(State(app): State<AppState>, Principal(p): Principal, body: Bytes) -> Result<Response, ApiError> {
    let submission: RegistrationSubmission = parse_body(&body)?;
    let receipt = app.write(|r| r.submit_registration(&p, submission))?;
    Ok((StatusCode::CREATED, Json(receipt)).into_response())
}

async fn add_version(
    State(app): State<AppState>,
    Principal(p): Principal,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let id = parse_id(&id)?;
    let request: AddVersionRequest = parse_body(&body)?;
    let receipt = app.write(|r| r.add_version(&p, &id, request))?;
    Ok((StatusCode::CREATED, Json(receipt)).into_response())
}

async fn attest(
    State(app): State<AppState>,
    Principal(p): Principal,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let id = parse_id(&id)?;
    let request: AttestRequest = parse_body(&body)?;
    let receipt = app.write(|r| r.record_attestation(&p, &id, request))?;
    Ok((StatusCode::CREATED, Json(receipt)).into_response())
}

async fn family(
    State(app): State<AppState>,
    Principal(p): Principal,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    Ok(Json(app.read(|r| r.family(&p, &id))?).into_response())
}

async fn record(
    State(app): State<AppState>,
    Principal(p): Principal,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    Ok(Json(app.read(|r| r.read_record(&p, &id))?).into_response())
}

async fn change_status(
    State(app): State<AppState>,
    Principal(p): Principal,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let identifier = parse_id(&id)?;
    let body: StatusBody = parse_body(&body)?;
    let request = StatusRequest {
        expected_sequence: body.expected_sequence,
        identifier,
        to: body.to,
        deployment_date: body.deployment_date,
    };
    Ok(Json(app.write(|r| r.change_status(&p, request))?).into_response())
}

async fn search(State(app): State<AppState>, Query(params): Query<SearchParams>) -> Response {
    let page = params.page.unwrap_or(1);
    Json(app.read(|r| r.search_public(&params.q, page))).into_response()
}

async fn verify(State(app): State<AppState>, Path(id): Path<String>) -> Response {
    Json(app.read(|r| r.verify_public(&id))).into_response()
}

async fn badge(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(app.read(|r| r.badge(&id))?).into_response())
}

async fn public_key(State(app): State<AppState>) -> Response {
    Json(app.read(|r| r.public_key())).into_response()
}

async fn overdue(
    State(app): State<AppState>,
    Principal(p): Principal,
    Query(params): Query<OverdueParams>,
) -> Result<Response, ApiError> {
    Ok(Json(app.read(|r| r.overdue(&p, params.as_of))?).into_response())
}

async fn open_violation(
    State(app): State<AppState>,
    Principal(p): Principal,
    body: Bytes,
) -> Result<Response, ApiError> {
    let request: OpenViolationRequest = parse_body(&body)?;
    let violation = app.write(|r| r.open_violation(&p, request))?;
    Ok((StatusCode::CREATED, Json(violation)).into_response())
}

async fn assess_fine(State(app): State<AppState>, Principal(p): Principal, body: Bytes) -> Result<Response, ApiError> {
    let request: FineRequest = parse_body(&body)?;
    let assessment = app.write(|r| r.assess_fine(&p, request))?;
    Ok((StatusCode::CREATED, Json(assessment)).into_response())
}

async fn third_party_check(
    State(app): State<AppState>,
    Principal(p): Principal,
    body: Bytes,
) -> Result<Response, ApiError> {
    let request: ThirdPartyCheckRequest = parse_body(&body)?;
    let entry = app.write(|r| r.log_third_party_check(&p, request))?;
    Ok((StatusCode::CREATED, Json(entry)).into_response())
}

async fn ledger(State(app): State<AppState>, Principal(p): Principal) -> Result<Response, ApiError> {
    let lines = app.read(|r| r.ledger_json_lines(&p))?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson; charset=utf-8")], lines).into_response())
}

async fn not_found() -> ApiError {
    ApiError(RegistryError::NotFound("route".into()))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/submissions", post(submit))
        .route("/v1/families/{id}", get(family))
        .route("/v1/families/{id}/versions", post(add_version))
        .route("/v1/families/{id}/attestations", post(attest))
        .route("/v1/records/{identifier}", get(record))
        .route("/v1/records/{identifier}/status", post(change_status))
        .route("/v1/public/search", get(search))
        .route("/v1/public/verify/{identifier}", get(verify))
        .route("/v1/public/badge/{identifier}", get(badge))
        .route("/v1/public/key", get(public_key))
        .route("/v1/admin/overdue", get(overdue))
        .route("/v1/admin/violations", post(open_violation))
        .route("/v1/admin/fines", post(assess_fine))
        .route("/v1/admin/ledger", get(ledger))
        .route("/v1/third-party/checks", post(third_party_check))
        .fallback(not_found)
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}
