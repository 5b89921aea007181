//! Command handlers and read models over the event-sourced state.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use chrono::{DateTime, Datelike, NaiveDate};
use rand::rngs::StdRng;
use rand::SeedableRng;
use registry_core::attestation::{attestation_schedule, detect_overdue, window_opening, OverdueAttestation};
use registry_core::compliance::{
    assess_fine, escalate_severity, FineAssessment, FineError, LedgerError, LookupResult, ThirdPartyCheck,
    Violation, ViolationKind, ViolationSubject,
};
use registry_core::family::{
    apply_version, assess_version_registration, FamilyError, ModelFamily, ModelVersion, RegistrationDecision,
    VersionCandidate, VersionKind, VersionRegistrationRequirement,
};
use registry_core::identifier::{allocate_identifier, IdentifierError};
use registry_core::openness::{classify_openness, OpennessError};
use registry_core::stamp::{issue_stamp, verifying_key_to_pem, StampError, StampSubject};
use registry_core::validate::{validate_metrics, validate_submission, ValidationProblem, ValidationReport};
use registry_core::{
    evaluate_qualification, AttestationOutcome, AttestationRecord, CapabilityMetrics, DeploymentStatus,
    QualificationDecision, RegistrationSubmission, RegistryIdentifier, RegistryPolicy, SigningKey,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auth::PrincipalRole;
use crate::business::{verify_business_registration, BusinessCheck, BusinessRegistryClient, FixtureBusinessRegistry};
use crate::events::{
    AttestationRecorded, AttestationUpdate, EventBody, EventLog, FineAssessed, LogError, RegistryEvent,
    StampIssued, StatusChanged, SubmissionAccepted, ThirdPartyCheckLogged, VersionAdded, ViolationOpened,
};
use crate::records::{public_projection, PublicRecord, RegistrationRecord};
use crate::state::{replay_state, FamilyEntry, RegistryState, ReplayError};

pub const PAGE_SIZE: usize = 20;

/// Source of the current time in unix seconds.
pub trait Clock: Send + Sync {
    fn now(&self) -> i64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> i64 {
        chrono::Utc::now().timestamp()
    }
}

/// A settable clock for tests and simulations.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicI64);

impl ManualClock {
    pub fn new(now: i64) -> Self {
        Self(AtomicI64::new(now))
    }

    pub fn at_date(date: NaiveDate) -> Self {
        Self::new(date.and_hms_opt(12, 0, 0).expect("valid time").and_utc().timestamp())
    }

    pub fn set(&self, now: i64) {
        self.0.store(now, Ordering::SeqCst);
    }

    pub fn advance_days(&self, days: i64) {
        self.0.fetch_add(days * 86_400, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> i64 {
        self.0.load(Ordering::SeqCst)
    }
}

impl<C: Clock + ?Sized> Clock for Arc<C> {
    fn now(&self) -> i64 {
        (**self).now()
    }
}

pub fn date_of(timestamp: i64) -> NaiveDate {
    DateTime::from_timestamp(timestamp, 0)
        .map(|t| t.date_naive())
        .unwrap_or(NaiveDate::MIN)
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("authentication required")]
    Unauthorized,
    #[error("not permitted: {0}")]
    Forbidden(String),
    #[error("{0} not found")]
    NotFound(String),
    #[error("submission failed validation with {} problem(s)", .0.len())]
    ValidationFailed(ValidationReport),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error(transparent)]
    Openness(#[from] OpennessError),
    #[error("new registrations must be filed before deployment; status {0} is not accepted")]
    PreDeploymentRequired(DeploymentStatus),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error("family changed since sequence {expected}; current sequence is {current}")]
    Conflict { expected: u64, current: u64 },
    #[error("status cannot change from {from} to {to}")]
    InvalidTransition { from: DeploymentStatus, to: DeploymentStatus },
    #[error("no attestation is currently due for family {0}")]
    NothingDue(RegistryIdentifier),
    #[error("registration {0} is no longer active")]
    Revoked(RegistryIdentifier),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Fine(#[from] FineError),
    #[error(transparent)]
    Identifier(#[from] IdentifierError),
    #[error(transparent)]
    Stamp(#[from] StampError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    CorruptLog(#[from] ReplayError),
}

impl RegistryError {
    pub fn code(&self) -> &'static str {
        match self {
            RegistryError::Unauthorized => "Unauthorized",
            RegistryError::Forbidden(_) => "Forbidden",
            RegistryError::NotFound(_) => "NotFound",
            RegistryError::ValidationFailed(_) => "ValidationFailed",
            RegistryError::BadRequest(_) => "BadRequest",
            RegistryError::Openness(_) => "AmbiguousOpenness",
            RegistryError::PreDeploymentRequired(_) => "PreDeploymentRequired",
            RegistryError::Family(e) => match e {
                FamilyError::EmptyFamily => "EmptyFamily",
                FamilyError::FamilyConsistencyViolation { .. } => "FamilyConsistencyViolation",
                FamilyError::DuplicateVersionName(_) => "DuplicateVersionName",
                FamilyError::NewFamilyRequired => "NewFamilyRequired",
                FamilyError::FullSubmissionRequired(_) => "FullSubmissionRequired",
                FamilyError::FoundingVersionNotFull => "FoundingVersionNotFull",
            },
            RegistryError::Conflict { .. } => "Conflict",
            RegistryError::InvalidTransition { .. } => "InvalidTransition",
            RegistryError::NothingDue(_) => "NothingDue",
            RegistryError::Revoked(_) => "RevokedRegistration",
            RegistryError::Ledger(LedgerError::MissingNonQualificationDeclaration) => {
                "MissingNonQualificationDeclaration"
            }
            RegistryError::Ledger(_) => "InvalidLedgerEntry",
            RegistryError::Fine(_) => "InvalidFineInput",
            RegistryError::Identifier(_) => "IdentifierAllocation",
            RegistryError::Stamp(_) => "StampFailure",
            RegistryError::Log(_) => "StorageFailure",
            RegistryError::CorruptLog(_) => "CorruptLog",
        }
    }

    /// Structured detail for the error body.
    pub fn details(&self) -> serde_json::Value {
        use serde_json::json;
        match self {
            RegistryError::ValidationFailed(report) => json!({ "problems": report }),
            RegistryError::Family(FamilyError::FullSubmissionRequired(reasons)) => json!({ "reasons": reasons }),
            RegistryError::Family(FamilyError::FamilyConsistencyViolation { field, family, version }) => {
                json!({ "field": field, "family": family, "version": version })
            }
            RegistryError::Conflict { expected, current } => {
                json!({ "expected_sequence": expected, "current_sequence": current, "retryable": true })
            }
            RegistryError::InvalidTransition { from, to } => json!({ "from": from, "to": to }),
            _ => serde_json::Value::Null,
        }
    }
}

pub type RegistryResult<T> = Result<T, RegistryError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionReceipt {
    pub identifier: RegistryIdentifier,
    pub family_id: RegistryIdentifier,
    pub qualification: QualificationDecision,
    pub requirement: VersionRegistrationRequirement,
    pub business_check: BusinessCheck,
    pub stamp: Option<String>,
    pub family_sequence: u64,
}

/// A new version of an existing family. Name-only versions carry a
/// `candidate`; full versions carry a `submission`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddVersionRequest {
    #[serde(default)]
    pub expected_sequence: Option<u64>,
    pub version_name: String,
    pub planned_deployment: NaiveDate,
    #[serde(default)]
    pub candidate: Option<CandidateMetrics>,
    #[serde(default)]
    pub submission: Option<RegistrationSubmission>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateMetrics {
    pub metrics: CapabilityMetrics,
    #[serde(default)]
    pub eval_scores: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionReceipt {
    pub identifier: RegistryIdentifier,
    pub family_id: RegistryIdentifier,
    pub requirement: VersionRegistrationRequirement,
    pub kind: VersionKind,
    pub stamp: Option<String>,
    pub family_sequence: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttestRequest {
    #[serde(default)]
    pub expected_sequence: Option<u64>,
    pub attested_by: String,
    /// Replacement disclosure; absent means the entry is confirmed accurate.
    #[serde(default)]
    pub update: Option<AttestationUpdate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttestReceipt {
    pub attestation: AttestationRecord,
    pub reissued_stamps: Vec<RegistryIdentifier>,
    pub family_sequence: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusRequest {
    #[serde(default)]
    pub expected_sequence: Option<u64>,
    pub identifier: RegistryIdentifier,
    pub to: DeploymentStatus,
    #[serde(default)]
    pub deployment_date: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusReceipt {
    pub identifier: RegistryIdentifier,
    pub from: DeploymentStatus,
    pub to: DeploymentStatus,
    pub stamp: Option<String>,
    pub family_sequence: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenViolationRequest {
    pub subject: ViolationSubject,
    pub subject_ref: String,
    pub kind: ViolationKind,
    #[serde(default)]
    pub opened_date: Option<NaiveDate>,
    /// Overrides the escalated severity.
    #[serde(default)]
    pub severity: Option<registry_core::Severity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineRequest {
    pub violation_id: RegistryIdentifier,
    pub annual_turnover: f64,
    /// Defaults to days since the violation opened.
    #[serde(default)]
    pub days_unresolved: Option<u32>,
    /// Defaults to earlier violations of the same subject and kind.
    #[serde(default)]
    pub prior_same_kind: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThirdPartyCheckRequest {
    pub user_ref: String,
    pub claimed_model: String,
    #[serde(default)]
    pub identifier_presented: Option<RegistryIdentifier>,
    #[serde(default)]
    pub non_qualification_declaration: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "view", content = "record")]
pub enum RecordView {
    Full(Box<RegistrationRecord>),
    Public(PublicRecord),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchPage {
    pub query: String,
    pub page: usize,
    pub page_size: usize,
    pub total: usize,
    pub results: Vec<PublicRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyView {
    pub registered: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record: Option<PublicRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BadgeView {
    pub identifier: RegistryIdentifier,
    pub token: String,
    pub iat: i64,
    pub exp: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicKeyView {
    pub algorithm: String,
    pub token_prefix: String,
    pub pem: String,
}

/// Allowed deployment status transitions.
pub fn transition_allowed(from: DeploymentStatus, to: DeploymentStatus) -> bool {
    use DeploymentStatus::*;
    matches!(
        (from, to),
        (PreDeployment, OnMarket)
            | (PreDeployment, Withdrawn)
            | (OnMarket, Recalled)
            | (OnMarket, Withdrawn)
            | (Recalled, OnMarket)
            | (Recalled, Withdrawn)
    )
}

pub struct Registry {
    state: RegistryState,
    log: Box<dyn EventLog>,
    policy: RegistryPolicy,
    signing_key: SigningKey,
    rng: StdRng,
    clock: Arc<dyn Clock>,
    business: Arc<dyn BusinessRegistryClient>,
    stamp_validity_days: u32,
}

pub struct RegistryBuilder {
    policy: RegistryPolicy,
    signing_key: SigningKey,
    rng: StdRng,
    clock: Arc<dyn Clock>,
    business: Arc<dyn BusinessRegistryClient>,
    stamp_validity_days: u32,
    snapshot: Option<RegistryState>,
}

impl RegistryBuilder {
    pub fn new(signing_key: SigningKey) -> Self {
        Self {
            policy: RegistryPolicy::default(),
            signing_key,
            rng: StdRng::from_entropy(),
            clock: Arc::new(SystemClock),
            business: Arc::new(FixtureBusinessRegistry::default()),
            stamp_validity_days: registry_core::stamp::DEFAULT_VALIDITY_DAYS,
            snapshot: None,
        }
    }

    pub fn policy(mut self, policy: RegistryPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.rng = StdRng::seed_from_u64(seed);
        self
    }

    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn business(mut self, business: Arc<dyn BusinessRegistryClient>) -> Self {
        self.business = business;
        self
    }

    pub fn stamp_validity_days(mut self, days: u32) -> Self {
        self.stamp_validity_days = days;
        self
    }

    /// Starts from a saved state; only later events are replayed.
    pub fn snapshot(mut self, snapshot: Option<RegistryState>) -> Self {
        self.snapshot = snapshot;
        self
    }

    /// Rebuilds state from the log. Any gap or malformed event refuses startup.
    pub fn open(self, log: Box<dyn EventLog>) -> RegistryResult<Registry> {
        let events = log.read_all()?;
        let mut state = match self.snapshot {
            Some(s) if events.iter().any(|e| e.sequence == s.last_sequence) || s.last_sequence == 0 => s,
            _ => RegistryState::new(),
        };
        let start = state.last_sequence;
        for (i, event) in events.iter().enumerate() {
            if event.sequence != i as u64 + 1 {
                return Err(ReplayError::SequenceGap {
                    expected: i as u64 + 1,
                    found: event.sequence,
                }
                .into());
            }
        }
        for event in events.iter().skip(start as usize) {
            state.apply(event)?;
        }
        Ok(Registry {
            state,
            log,
            policy: self.policy,
            signing_key: self.signing_key,
            rng: self.rng,
            clock: self.clock,
            business: self.business,
            stamp_validity_days: self.stamp_validity_days,
        })
    }
}

fn require_developer(principal: &PrincipalRole) -> RegistryResult<&str> {
    match principal {
        PrincipalRole::Developer(entity) => Ok(entity),
        PrincipalRole::Public => Err(RegistryError::Unauthorized),
        _ => Err(RegistryError::Forbidden("only developers file registrations".into())),
    }
}

fn require_admin(principal: &PrincipalRole) -> RegistryResult<()> {
    match principal {
        PrincipalRole::RegistryAdmin => Ok(()),
        PrincipalRole::Public => Err(RegistryError::Unauthorized),
        _ => Err(RegistryError::Forbidden("registry administrators only".into())),
    }
}

fn require_government(principal: &PrincipalRole) -> RegistryResult<()> {
    match principal {
        p if p.is_government() => Ok(()),
        PrincipalRole::Public => Err(RegistryError::Unauthorized),
        _ => Err(RegistryError::Forbidden("government readers only".into())),
    }
}

fn check_sequence(entry: &FamilyEntry, expected: Option<u64>) -> RegistryResult<()> {
    match expected {
        Some(expected) if expected != entry.last_sequence => Err(RegistryError::Conflict {
            expected,
            current: entry.last_sequence,
        }),
        _ => Ok(()),
    }
}

fn validated(submission: &RegistrationSubmission) -> RegistryResult<()> {
    let report = validate_submission(submission);
    if report.is_valid() {
        Ok(())
    } else {
        Err(RegistryError::ValidationFailed(report))
    }
}

fn validate_candidate(candidate: &CandidateMetrics) -> RegistryResult<()> {
    let mut report = validate_metrics(&candidate.metrics);
    for (name, score) in &candidate.eval_scores {
        if name.trim().is_empty() {
            report.problems.push(ValidationProblem {
                field_path: "candidate.eval_scores".into(),
                problem: "score names must be non-empty".into(),
            });
        }
        if !(score.is_finite() && (0.0..=1.0).contains(score)) {
            report.problems.push(ValidationProblem {
                field_path: format!("candidate.eval_scores.{name}"),
                problem: "must be within [0, 1]".into(),
            });
        }
    }
    if report.is_valid() {
        Ok(())
    } else {
        Err(RegistryError::ValidationFailed(report))
    }
}

impl Registry {
    pub fn state(&self) -> &RegistryState {
        &self.state
    }

    pub fn policy(&self) -> &RegistryPolicy {
        &self.policy
    }

    pub fn events(&self) -> RegistryResult<Vec<RegistryEvent>> {
        Ok(self.log.read_all()?)
    }

    pub fn now(&self) -> i64 {
        self.clock.now()
    }

    pub fn today(&self) -> NaiveDate {
        date_of(self.clock.now())
    }

    pub fn public_key(&self) -> PublicKeyView {
        PublicKeyView {
            algorithm: "Ed25519".into(),
            token_prefix: registry_core::stamp::TOKEN_PREFIX.into(),
            pem: verifying_key_to_pem(&self.signing_key.verifying_key()).expect("Ed25519 keys always encode"),
        }
    }

    /// Appends events and folds them into state. Commands validate everything
    /// beforehand, so a fold failure here is an internal fault.
    fn commit(&mut self, actor: &PrincipalRole, bodies: Vec<EventBody>) -> RegistryResult<Vec<RegistryEvent>> {
        let timestamp = self.clock.now();
        let events: Vec<RegistryEvent> = bodies
            .into_iter()
            .enumerate()
            .map(|(i, body)| RegistryEvent {
                sequence: self.state.last_sequence + 1 + i as u64,
                timestamp,
                actor: actor.clone(),
                kind: body.kind(),
                body: body.to_value(),
            })
            .collect();
        self.log.append(&events)?;
        for event in &events {
            self.state.apply(event)?;
        }
        Ok(events)
    }

    fn allocate(&mut self, year: i32, reserved: &BTreeSet<RegistryIdentifier>) -> RegistryResult<RegistryIdentifier> {
        let state = &self.state;
        Ok(allocate_identifier(year, &mut self.rng, |id| {
            state.is_identifier_taken(id) || reserved.contains(id)
        })?)
    }

    fn stamp_body(&self, record: &RegistrationRecord, now: i64) -> RegistryResult<EventBody> {
        let subject = StampSubject {
            identifier: record.identifier.clone(),
            developer_legal_name: record.developer_legal_name.clone(),
            family_trade_name: record.family_trade_name.clone(),
            version_name: record.version_name.clone(),
            status: record.status,
        };
        let stamp = issue_stamp(&subject, &self.signing_key, now, self.stamp_validity_days)?;
        Ok(EventBody::StampIssued(StampIssued {
            identifier: record.identifier.clone(),
            token: stamp.token,
            iat: stamp.payload.iat,
            exp: stamp.payload.exp,
        }))
    }

    fn family_entry(&self, family_id: &RegistryIdentifier) -> RegistryResult<&FamilyEntry> {
        self.state
            .families
            .get(family_id)
            .ok_or_else(|| RegistryError::NotFound(format!("family {family_id}")))
    }

    fn owned_family(&self, principal: &PrincipalRole, family_id: &RegistryIdentifier) -> RegistryResult<&FamilyEntry> {
        let developer = require_developer(principal)?;
        let entry = self.family_entry(family_id)?;
        if entry.family.developer_ref != developer {
            return Err(RegistryError::Forbidden(format!("family {family_id} belongs to another developer")));
        }
        Ok(entry)
    }

    /// Files a full registration. A new trade name founds a family; an
    /// existing one is assessed as a further version of that family.
    pub fn submit_registration(
        &mut self,
        principal: &PrincipalRole,
        submission: RegistrationSubmission,
    ) -> RegistryResult<SubmissionReceipt> {
        let developer = require_developer(principal)?.to_owned();
        validated(&submission)?;
        if submission.developer.business_registration_number.trim() != developer {
            return Err(RegistryError::Forbidden(
                "business registration number does not match the authenticated developer".into(),
            ));
        }
        if submission.status != DeploymentStatus::PreDeployment {
            return Err(RegistryError::PreDeploymentRequired(submission.status));
        }
        let openness = classify_openness(&submission.access)?;
        let today = self.today();
        let qualification = evaluate_qualification(&submission.metrics, &submission.risk, &self.policy.thresholds);

        if let Some(entry) = self.state.family_of_developer(&developer, &submission.family_trade_name) {
            let family_id = entry.family.family_id.clone();
            let request = AddVersionRequest {
                expected_sequence: None,
                version_name: submission.version_name.clone(),
                planned_deployment: today,
                candidate: None,
                submission: Some(submission),
            };
            let receipt = self.add_version(principal, &family_id, request)?;
            let business_check = self.state.records[&receipt.identifier].business_check;
            return Ok(SubmissionReceipt {
                identifier: receipt.identifier,
                family_id,
                qualification,
                requirement: receipt.requirement,
                business_check,
                stamp: receipt.stamp,
                family_sequence: receipt.family_sequence,
            });
        }

        let business_check = verify_business_registration(
            self.business.as_ref(),
            &submission.developer.business_registration_number,
            &submission.developer.legal_name,
        );
        let year = today.year();
        let family_id = self.allocate(year, &BTreeSet::new())?;
        let identifier = self.allocate(year, &BTreeSet::from([family_id.clone()]))?;
        let version = ModelVersion {
            identifier: identifier.clone(),
            version_name: submission.version_name.clone(),
            kind: VersionKind::FullSubmission,
            status: DeploymentStatus::PreDeployment,
            deployment_date: None,
            registered_on: today,
            openness,
            security_tier: submission.security.declared_security_tier.clone(),
            candidate: VersionCandidate {
                metrics: submission.metrics,
                eval_scores: submission.evaluations.capability_scores(),
                planned_deployment: today,
            },
        };
        let family = ModelFamily::found(
            family_id.clone(),
            submission.family_trade_name.trim(),
            developer.clone(),
            today,
            version,
        )?;
        let requirement = VersionRegistrationRequirement::founding();
        let record = RegistrationRecord {
            identifier: identifier.clone(),
            family_id: family_id.clone(),
            developer_ref: developer,
            developer_legal_name: submission.developer.legal_name.clone(),
            family_trade_name: submission.family_trade_name.trim().to_owned(),
            version_name: submission.version_name.clone(),
            status: DeploymentStatus::PreDeployment,
            registration_date: today,
            deployment_date: None,
            kind: VersionKind::FullSubmission,
            openness,
            requirement: requirement.clone(),
            submission: Some(submission),
            qualification: Some(qualification.clone()),
            business_check,
        };
        let stamp = self.stamp_body(&record, self.clock.now())?;
        let token = match &stamp {
            EventBody::StampIssued(s) => Some(s.token.clone()),
            _ => None,
        };
        self.commit(
            principal,
            vec![EventBody::SubmissionAccepted(SubmissionAccepted { family, record }), stamp],
        )?;
        Ok(SubmissionReceipt {
            identifier,
            family_sequence: self.state.families[&family_id].last_sequence,
            family_id,
            qualification,
            requirement,
            business_check,
            stamp: token,
        })
    }

    pub fn add_version(
        &mut self,
        principal: &PrincipalRole,
        family_id: &RegistryIdentifier,
        request: AddVersionRequest,
    ) -> RegistryResult<VersionReceipt> {
        let entry = self.owned_family(principal, family_id)?;
        check_sequence(entry, request.expected_sequence)?;
        let family = entry.family.clone();
        let legal_name = entry.developer_legal_name.clone();
        let today = self.today();

        let (kind, openness, tier, candidate, submission, business_check, qualification) = match request.submission {
            Some(submission) => {
                validated(&submission)?;
                if submission.version_name != request.version_name {
                    return Err(RegistryError::BadRequest(
                        "version_name differs from the attached submission".into(),
                    ));
                }
                if submission.family_trade_name.trim() != family.trade_name
                    || submission.developer.business_registration_number.trim() != family.developer_ref
                {
                    return Err(RegistryError::BadRequest(
                        "attached submission names a different family or developer".into(),
                    ));
                }
                if submission.status != DeploymentStatus::PreDeployment {
                    return Err(RegistryError::PreDeploymentRequired(submission.status));
                }
                let openness = classify_openness(&submission.access)?;
                let candidate = VersionCandidate {
                    metrics: submission.metrics,
                    eval_scores: submission.evaluations.capability_scores(),
                    planned_deployment: request.planned_deployment,
                };
                let business_check = verify_business_registration(
                    self.business.as_ref(),
                    &submission.developer.business_registration_number,
                    &submission.developer.legal_name,
                );
                let qualification =
                    evaluate_qualification(&submission.metrics, &submission.risk, &self.policy.thresholds);
                let tier = submission.security.declared_security_tier.clone();
                (
                    VersionKind::FullSubmission,
                    openness,
                    tier,
                    candidate,
                    Some(submission),
                    business_check,
                    Some(qualification),
                )
            }
            None => {
                let c = request.candidate.ok_or_else(|| {
                    RegistryError::BadRequest("a name-only version needs candidate metrics".into())
                })?;
                validate_candidate(&c)?;
                if request.version_name.trim().is_empty() {
                    return Err(RegistryError::BadRequest("version_name must be non-empty".into()));
                }
                let candidate = VersionCandidate {
                    metrics: c.metrics,
                    eval_scores: c.eval_scores,
                    planned_deployment: request.planned_deployment,
                };
                let check = self.family_business_check(&family);
                (
                    VersionKind::NameOnly,
                    family.openness,
                    family.security_tier.clone(),
                    candidate,
                    None,
                    check,
                    None,
                )
            }
        };

        let requirement = assess_version_registration(&family, &candidate, &self.policy.family)?;
        if requirement.decision == RegistrationDecision::NewFamilyRequired {
            return Err(FamilyError::NewFamilyRequired.into());
        }
        let identifier = self.allocate(today.year(), &BTreeSet::new())?;
        let version = ModelVersion {
            identifier: identifier.clone(),
            version_name: request.version_name.clone(),
            kind,
            status: DeploymentStatus::PreDeployment,
            deployment_date: None,
            registered_on: today,
            openness,
            security_tier: tier,
            candidate,
        };
        apply_version(&family, version.clone(), &requirement)?;

        let record = RegistrationRecord {
            identifier: identifier.clone(),
            family_id: family_id.clone(),
            developer_ref: family.developer_ref.clone(),
            developer_legal_name: submission
                .as_ref()
                .map_or(legal_name, |s| s.developer.legal_name.clone()),
            family_trade_name: family.trade_name.clone(),
            version_name: request.version_name,
            status: DeploymentStatus::PreDeployment,
            registration_date: today,
            deployment_date: None,
            kind,
            openness,
            requirement: requirement.clone(),
            submission,
            qualification,
            business_check,
        };
        let stamp = self.stamp_body(&record, self.clock.now())?;
        let token = match &stamp {
            EventBody::StampIssued(s) => Some(s.token.clone()),
            _ => None,
        };
        self.commit(
            principal,
            vec![
                EventBody::VersionAdded(VersionAdded {
                    family_id: family_id.clone(),
                    version,
                    requirement: requirement.clone(),
                    record,
                }),
                stamp,
            ],
        )?;
        Ok(VersionReceipt {
            identifier,
            family_id: family_id.clone(),
            requirement,
            kind,
            stamp: token,
            family_sequence: self.state.families[family_id].last_sequence,
        })
    }

    fn family_business_check(&self, family: &ModelFamily) -> BusinessCheck {
        family
            .versions
            .first()
            .and_then(|v| self.state.records.get(&v.identifier))
            .map_or(BusinessCheck::Unavailable, |r| r.business_check)
    }

    /// The earliest unattested due date whose semester has opened.
    pub fn next_due(&self, family_id: &RegistryIdentifier) -> RegistryResult<Option<NaiveDate>> {
        let entry = self.family_entry(family_id)?;
        let today = self.today();
        let horizon = if today.month() <= 6 {
            NaiveDate::from_ymd_opt(today.year(), 6, 30)
        } else {
            NaiveDate::from_ymd_opt(today.year(), 12, 31)
        }
        .expect("valid date");
        Ok(attestation_schedule(entry.family.registered_at, horizon)
            .into_iter()
            .filter(|d| window_opening(*d) <= today)
            .find(|d| !self.state.is_attested(family_id, *d)))
    }

    pub fn record_attestation(
        &mut self,
        principal: &PrincipalRole,
        family_id: &RegistryIdentifier,
        request: AttestRequest,
    ) -> RegistryResult<AttestReceipt> {
        let entry = self.owned_family(principal, family_id)?;
        check_sequence(entry, request.expected_sequence)?;
        if request.attested_by.trim().is_empty() {
            return Err(RegistryError::BadRequest("attested_by must be non-empty".into()));
        }
        let family = entry.family.clone();
        let due = self
            .next_due(family_id)?
            .ok_or_else(|| RegistryError::NothingDue(family_id.clone()))?;
        let today = self.today();

        let update = match request.update {
            None => None,
            Some(mut update) => {
                let version = family
                    .version_by_id(&update.identifier)
                    .ok_or_else(|| RegistryError::NotFound(format!("version {} in family", update.identifier)))?;
                if version.kind != VersionKind::FullSubmission {
                    return Err(RegistryError::BadRequest(
                        "only full-submission versions carry a disclosure to update".into(),
                    ));
                }
                let record = &self.state.records[&update.identifier];
                update.submission.status = record.status;
                update.submission.deployment_date = record.deployment_date;
                validated(&update.submission)?;
                let s = &update.submission;
                if s.version_name != version.version_name
                    || s.family_trade_name.trim() != family.trade_name
                    || s.developer.business_registration_number.trim() != family.developer_ref
                {
                    return Err(RegistryError::BadRequest(
                        "an update cannot change developer, family or version names".into(),
                    ));
                }
                let openness = classify_openness(&s.access)?;
                if openness != family.openness {
                    return Err(FamilyError::FamilyConsistencyViolation {
                        field: "openness",
                        family: format!("{:?}", family.openness),
                        version: format!("{openness:?}"),
                    }
                    .into());
                }
                if s.security.declared_security_tier != family.security_tier {
                    return Err(FamilyError::FamilyConsistencyViolation {
                        field: "security_tier",
                        family: family.security_tier.clone(),
                        version: s.security.declared_security_tier.clone(),
                    }
                    .into());
                }
                Some(update)
            }
        };
        let attestation = AttestationRecord {
            family_id: family_id.clone(),
            due_date: due,
            completed_date: Some(today),
            attested_by: request.attested_by.trim().to_owned(),
            outcome: if update.is_some() {
                AttestationOutcome::Updated
            } else {
                AttestationOutcome::ConfirmedAccurate
            },
        };
        let now = self.clock.now();
        let mut bodies = vec![EventBody::AttestationRecorded(AttestationRecorded {
            attestation: attestation.clone(),
            update,
        })];
        let mut reissued = Vec::new();
        for version in &family.versions {
            let record = &self.state.records[&version.identifier];
            if record.status.is_active() {
                bodies.push(self.stamp_body(record, now)?);
                reissued.push(record.identifier.clone());
            }
        }
        self.commit(principal, bodies)?;
        Ok(AttestReceipt {
            attestation,
            reissued_stamps: reissued,
            family_sequence: self.state.families[family_id].last_sequence,
        })
    }

    /// Moves a registered version through its deployment lifecycle. Only
    /// versions with an accepted registration can ever reach `OnMarket`.
    pub fn change_status(&mut self, principal: &PrincipalRole, request: StatusRequest) -> RegistryResult<StatusReceipt> {
        let record = self
            .state
            .records
            .get(&request.identifier)
            .ok_or_else(|| RegistryError::NotFound(format!("registration {}", request.identifier)))?;
        match principal {
            PrincipalRole::RegistryAdmin => {}
            PrincipalRole::Developer(d) if *d == record.developer_ref => {}
            PrincipalRole::Public => return Err(RegistryError::Unauthorized),
            _ => return Err(RegistryError::Forbidden("not the registrant of this version".into())),
        }
        let entry = self.family_entry(&record.family_id)?;
        check_sequence(entry, request.expected_sequence)?;
        let from = record.status;
        if !transition_allowed(from, request.to) {
            return Err(RegistryError::InvalidTransition { from, to: request.to });
        }
        let deployment_date = if request.to == DeploymentStatus::OnMarket {
            let date = request.deployment_date.unwrap_or_else(|| self.today());
            if date < record.registration_date {
                return Err(RegistryError::BadRequest(
                    "deployment date precedes registration".into(),
                ));
            }
            if date > entry.family.age_limit_date(&self.policy.family) {
                return Err(FamilyError::NewFamilyRequired.into());
            }
            if from == DeploymentStatus::PreDeployment {
                Some(date)
            } else {
                None
            }
        } else {
            None
        };
        let mut updated = record.clone();
        updated.status = request.to;
        let mut bodies = vec![EventBody::StatusChanged(StatusChanged {
            identifier: request.identifier.clone(),
            from,
            to: request.to,
            deployment_date,
        })];
        let mut token = None;
        if request.to.is_active() {
            let stamp = self.stamp_body(&updated, self.clock.now())?;
            if let EventBody::StampIssued(s) = &stamp {
                token = Some(s.token.clone());
            }
            bodies.push(stamp);
        }
        let family_id = record.family_id.clone();
        self.commit(principal, bodies)?;
        Ok(StatusReceipt {
            identifier: request.identifier,
            from,
            to: request.to,
            stamp: token,
            family_sequence: self.state.families[&family_id].last_sequence,
        })
    }

    pub fn open_violation(&mut self, principal: &PrincipalRole, request: OpenViolationRequest) -> RegistryResult<Violation> {
        require_admin(principal)?;
        if request.subject_ref.trim().is_empty() {
            return Err(RegistryError::BadRequest("subject_ref must be non-empty".into()));
        }
        let opened = request.opened_date.unwrap_or_else(|| self.today());
        let history: Vec<Violation> = self
            .state
            .violations_of(request.subject_ref.trim(), request.kind)
            .into_iter()
            .filter(|v| v.opened_date <= opened)
            .collect();
        let severity = request.severity.unwrap_or_else(|| escalate_severity(&history));
        let violation_id = self.allocate(opened.year(), &BTreeSet::new())?;
        let violation = Violation {
            violation_id,
            subject: request.subject,
            subject_ref: request.subject_ref.trim().to_owned(),
            kind: request.kind,
            severity,
            opened_date: opened,
            resolved_date: None,
        };
        self.commit(
            principal,
            vec![EventBody::ViolationOpened(ViolationOpened {
                violation: violation.clone(),
            })],
        )?;
        Ok(violation)
    }

    pub fn assess_fine(&mut self, principal: &PrincipalRole, request: FineRequest) -> RegistryResult<FineAssessment> {
        require_admin(principal)?;
        let violation = self
            .state
            .violations
            .get(&request.violation_id)
            .ok_or_else(|| RegistryError::NotFound(format!("violation {}", request.violation_id)))?
            .clone();
        let today = self.today();
        let days = request.days_unresolved.unwrap_or_else(|| {
            let end = violation.resolved_date.unwrap_or(today);
            u32::try_from((end - violation.opened_date).num_days().max(0)).unwrap_or(u32::MAX)
        });
        let priors = request.prior_same_kind.unwrap_or_else(|| {
            let earlier = self
                .state
                .violations_of(&violation.subject_ref, violation.kind)
                .into_iter()
                .take_while(|v| v.violation_id != violation.violation_id)
                .count();
            u32::try_from(earlier).unwrap_or(u32::MAX)
        });
        let assessment = assess_fine(&violation, request.annual_turnover, days, priors, &self.policy.fines)?;
        self.commit(
            principal,
            vec![EventBody::FineAssessed(FineAssessed {
                assessment: assessment.clone(),
                annual_turnover: request.annual_turnover,
                days_unresolved: days,
                prior_same_kind: priors,
            })],
        )?;
        Ok(assessment)
    }

    /// What a lookup of the presented identifier shows right now.
    pub fn lookup(&self, request: &ThirdPartyCheckRequest) -> LookupResult {
        match &request.identifier_presented {
            Some(id) => match self.state.records.get(id) {
                Some(r) if r.status.is_active() => LookupResult::Registered,
                _ => LookupResult::NotFound,
            },
            None if request.non_qualification_declaration.is_some() => LookupResult::NotRequired,
            None => LookupResult::NotFound,
        }
    }

    pub fn log_third_party_check(
        &mut self,
        principal: &PrincipalRole,
        request: ThirdPartyCheckRequest,
    ) -> RegistryResult<registry_core::compliance::LedgerEntry> {
        if *principal == PrincipalRole::Public {
            return Err(RegistryError::Unauthorized);
        }
        let lookup_result = self.lookup(&request);
        let check = ThirdPartyCheck {
            user_ref: request.user_ref,
            claimed_model: request.claimed_model,
            identifier_presented: request.identifier_presented,
            lookup_result,
            non_qualification_declaration: request.non_qualification_declaration,
        };
        registry_core::compliance::validate_third_party_check(&check)?;
        let entry = registry_core::compliance::LedgerEntry {
            sequence: self.state.ledger.len() as u64 + 1,
            timestamp: self.clock.now(),
            check,
        };
        self.commit(
            principal,
            vec![EventBody::ThirdPartyCheckLogged(ThirdPartyCheckLogged { entry: entry.clone() })],
        )?;
        Ok(entry)
    }

    pub fn read_record(&self, principal: &PrincipalRole, identifier: &str) -> RegistryResult<RecordView> {
        let id = RegistryIdentifier::parse(identifier)
            .map_err(|_| RegistryError::NotFound(format!("registration {identifier}")))?;
        let record = self
            .state
            .records
            .get(&id)
            .ok_or_else(|| RegistryError::NotFound(format!("registration {id}")))?;
        if principal.is_government() || principal.owns(&record.developer_ref) {
            Ok(RecordView::Full(Box::new(record.clone())))
        } else {
            Ok(RecordView::Public(public_projection(record)))
        }
    }

    pub fn family(&self, principal: &PrincipalRole, family_id: &str) -> RegistryResult<FamilyEntry> {
        let id = RegistryIdentifier::parse(family_id)
            .map_err(|_| RegistryError::NotFound(format!("family {family_id}")))?;
        let entry = self.family_entry(&id)?;
        if principal.is_government() || principal.owns(&entry.family.developer_ref) {
            Ok(entry.clone())
        } else if *principal == PrincipalRole::Public {
            Err(RegistryError::Unauthorized)
        } else {
            Err(RegistryError::Forbidden("not the registrant of this family".into()))
        }
    }

    /// Case-insensitive substring search. An empty query returns nothing.
    pub fn search_public(&self, query: &str, page: usize) -> SearchPage {
        let needle = query.trim().to_lowercase();
        let mut hits: Vec<PublicRecord> = if needle.is_empty() {
            vec![]
        } else {
            self.state
                .records
                .values()
                .map(public_projection)
                .filter(|p| p.matches(&needle))
                .collect()
        };
        hits.sort_by(|a, b| {
            b.registration_date
                .cmp(&a.registration_date)
                .then_with(|| a.identifier.cmp(&b.identifier))
        });
        let total = hits.len();
        let page = page.max(1);
        let results = hits
            .into_iter()
            .skip((page - 1).saturating_mul(PAGE_SIZE))
            .take(PAGE_SIZE)
            .collect();
        SearchPage {
            query: query.to_owned(),
            page,
            page_size: PAGE_SIZE,
            total,
            results,
        }
    }

    pub fn verify_public(&self, identifier: &str) -> VerifyView {
        let record = RegistryIdentifier::parse(identifier)
            .ok()
            .and_then(|id| self.state.records.get(&id))
            .map(public_projection);
        VerifyView {
            registered: record.is_some(),
            record,
        }
    }

    pub fn badge(&self, identifier: &str) -> RegistryResult<BadgeView> {
        let id = RegistryIdentifier::parse(identifier)
            .map_err(|_| RegistryError::NotFound(format!("registration {identifier}")))?;
        let record = self
            .state
            .records
            .get(&id)
            .ok_or_else(|| RegistryError::NotFound(format!("registration {id}")))?;
        if !record.status.is_active() {
            return Err(RegistryError::Revoked(id));
        }
        let stamp = self
            .state
            .stamps
            .get(&id)
            .ok_or_else(|| RegistryError::NotFound(format!("stamp for {id}")))?;
        Ok(BadgeView {
            identifier: id,
            token: stamp.token.clone(),
            iat: stamp.iat,
            exp: stamp.exp,
        })
    }

    pub fn overdue(&self, principal: &PrincipalRole, as_of: Option<NaiveDate>) -> RegistryResult<Vec<OverdueAttestation>> {
        require_government(principal)?;
        let as_of = as_of.unwrap_or_else(|| self.today());
        Ok(detect_overdue(
            self.state.families.values().map(|e| &e.family),
            &self.state.attestations,
            as_of,
        ))
    }

    pub fn ledger_json_lines(&self, principal: &PrincipalRole) -> RegistryResult<String> {
        require_government(principal)?;
        Ok(self.state.ledger.to_json_lines())
    }

    /// Replays the full log from scratch, for audits.
    pub fn replay(&self) -> RegistryResult<RegistryState> {
        Ok(replay_state(&self.log.read_all()?)?)
    }
}
