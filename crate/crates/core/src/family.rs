//! Model families and version registration requirements.
//!
//! A family is represented by its most capable full-submission versions along
//! each measurable dimension. A new version only needs a name-only
//! registration unless it outgrows those maxima, crosses the absolute
//! capability-score threshold, or ships too long after the family was first
//! registered.

use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact;
use crate::identifier::RegistryIdentifier;
use crate::schema::{CapabilityMetrics, DeploymentStatus, OpennessClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttestationPeriod {
    CalendarSemesters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyPolicy {
    pub exceedance_fraction: f64,
    pub eval_exceedance_fraction: f64,
    pub eval_absolute_threshold: f64,
    pub new_family_age_limit_days: u32,
    pub attestation_period: AttestationPeriod,
}

impl Default for FamilyPolicy {
    fn default() -> Self {
        Self {
            exceedance_fraction: 0.20,
            eval_exceedance_fraction: 0.20,
            eval_absolute_threshold: 0.80,
            new_family_age_limit_days: 730,
            attestation_period: AttestationPeriod::CalendarSemesters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FamilyPolicyError {
    #[error("{0} must lie strictly between 0 and 1")]
    Fraction(&'static str),
    #[error("eval_absolute_threshold must lie in (0, 1]")]
    AbsoluteThreshold,
    #[error("new_family_age_limit_days must be positive")]
    AgeLimit,
}

impl FamilyPolicy {
    pub fn validate(&self) -> Result<(), FamilyPolicyError> {
        let unit_open = |x: f64| x > 0.0 && x < 1.0;
        if !unit_open(self.exceedance_fraction) {
            return Err(FamilyPolicyError::Fraction("exceedance_fraction"));
        }
        if !unit_open(self.eval_exceedance_fraction) {
            return Err(FamilyPolicyError::Fraction("eval_exceedance_fraction"));
        }
        if !(self.eval_absolute_threshold > 0.0 && self.eval_absolute_threshold <= 1.0) {
            return Err(FamilyPolicyError::AbsoluteThreshold);
        }
        if self.new_family_age_limit_days == 0 {
            return Err(FamilyPolicyError::AgeLimit);
        }
        Ok(())
    }
}

/// What a prospective version is measured by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionCandidate {
    pub metrics: CapabilityMetrics,
    /// Capability-domain scores in `[0, 1]`.
    #[serde(default)]
    pub eval_scores: BTreeMap<String, f64>,
    pub planned_deployment: NaiveDate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegistrationDecision {
    NameOnly,
    FullSubmission,
    NewFamilyRequired,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequirementReason {
    pub dimension: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionRegistrationRequirement {
    pub decision: RegistrationDecision,
    pub reasons: Vec<RequirementReason>,
}

impl VersionRegistrationRequirement {
    pub fn name_only() -> Self {
        Self {
            decision: RegistrationDecision::NameOnly,
            reasons: vec![],
        }
    }

    /// The first version of a family is a full submission by definition.
    pub fn founding() -> Self {
        Self {
            decision: RegistrationDecision::FullSubmission,
            reasons: vec![RequirementReason {
                dimension: "family".into(),
                detail: "first version of a new family".into(),
            }],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VersionKind {
    FullSubmission,
    NameOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelVersion {
    pub identifier: RegistryIdentifier,
    pub version_name: String,
    pub kind: VersionKind,
    pub status: DeploymentStatus,
    pub deployment_date: Option<NaiveDate>,
    pub registered_on: NaiveDate,
    pub openness: OpennessClass,
    pub security_tier: String,
    pub candidate: VersionCandidate,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DimensionMaxima {
    pub max_total_parameters: u64,
    /// Training plus post-training FLOP.
    pub max_total_compute: f64,
    pub max_training_tokens: u64,
    pub max_eval_scores: BTreeMap<String, f64>,
}

impl DimensionMaxima {
    /// Elementwise maxima over the full-submission versions.
    pub fn recompute<'a>(versions: impl IntoIterator<Item = &'a ModelVersion>) -> Self {
        let mut maxima = DimensionMaxima::default();
        for v in versions
            .into_iter()
            .filter(|v| v.kind == VersionKind::FullSubmission)
        {
            let m = &v.candidate.metrics;
            maxima.max_total_parameters = maxima.max_total_parameters.max(m.total_parameters);
            maxima.max_total_compute = maxima.max_total_compute.max(m.total_compute());
            maxima.max_training_tokens = maxima.max_training_tokens.max(m.training_tokens);
            for (domain, &score) in &v.candidate.eval_scores {
                maxima
                    .max_eval_scores
                    .entry(domain.clone())
                    .and_modify(|best: &mut f64| *best = best.max(score))
                    .or_insert(score);
            }
        }
        maxima
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFamily {
    pub family_id: RegistryIdentifier,
    pub trade_name: String,
    pub developer_ref: String,
    pub registered_at: NaiveDate,
    pub openness: OpennessClass,
    pub security_tier: String,
    pub versions: Vec<ModelVersion>,
    pub dimension_maxima: DimensionMaxima,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FamilyError {
    #[error("family has no full-submission versions to compare against")]
    EmptyFamily,
    #[error("{field} mismatch: family declares {family}, version declares {version}")]
    FamilyConsistencyViolation {
        field: &'static str,
        family: String,
        version: String,
    },
    #[error("version name {0:?} already exists in this family")]
    DuplicateVersionName(String),
    #[error("version must be registered in a new family")]
    NewFamilyRequired,
    #[error("a full submission is required: {}", .0.iter().map(|r| r.dimension.as_str()).collect::<Vec<_>>().join(", "))]
    FullSubmissionRequired(Vec<RequirementReason>),
    #[error("the founding version of a family must be a full submission")]
    FoundingVersionNotFull,
}

impl ModelFamily {
    /// Creates a family around its first, fully submitted version.
    pub fn found(
        family_id: RegistryIdentifier,
        trade_name: impl Into<String>,
        developer_ref: impl Into<String>,
        registered_at: NaiveDate,
        first: ModelVersion,
    ) -> Result<Self, FamilyError> {
        if first.kind != VersionKind::FullSubmission {
            return Err(FamilyError::FoundingVersionNotFull);
        }
        let dimension_maxima = DimensionMaxima::recompute([&first]);
        Ok(Self {
            family_id,
            trade_name: trade_name.into(),
            developer_ref: developer_ref.into(),
            registered_at,
            openness: first.openness,
            security_tier: first.security_tier.clone(),
            versions: vec![first],
            dimension_maxima,
        })
    }

    pub fn version(&self, name: &str) -> Option<&ModelVersion> {
        self.versions.iter().find(|v| v.version_name == name)
    }

    pub fn version_by_id(&self, id: &RegistryIdentifier) -> Option<&ModelVersion> {
        self.versions.iter().find(|v| &v.identifier == id)
    }

    pub fn version_by_id_mut(&mut self, id: &RegistryIdentifier) -> Option<&mut ModelVersion> {
        self.versions.iter_mut().find(|v| &v.identifier == id)
    }

    pub fn has_full_submission(&self) -> bool {
        self.versions
            .iter()
            .any(|v| v.kind == VersionKind::FullSubmission)
    }

    /// Last day on which a version may still deploy inside this family.
    pub fn age_limit_date(&self, policy: &FamilyPolicy) -> NaiveDate {
        self.registered_at
            .checked_add_days(Days::new(u64::from(policy.new_family_age_limit_days)))
            .unwrap_or(NaiveDate::MAX)
    }
}

fn reason(dimension: impl Into<String>, detail: impl Into<String>) -> RequirementReason {
    RequirementReason {
        dimension: dimension.into(),
        detail: detail.into(),
    }
}

/// Decides how a new version of an existing family must be registered.
pub fn assess_version_registration(
    family: &ModelFamily,
    candidate: &VersionCandidate,
    policy: &FamilyPolicy,
) -> Result<VersionRegistrationRequirement, FamilyError> {
    if !family.has_full_submission() {
        return Err(FamilyError::EmptyFamily);
    }
    if candidate.planned_deployment > family.age_limit_date(policy) {
        return Ok(VersionRegistrationRequirement {
            decision: RegistrationDecision::NewFamilyRequired,
            reasons: vec![reason(
                "deployment_age",
                format!(
                    "planned deployment {} is more than {} days after family registration {}",
                    candidate.planned_deployment,
                    policy.new_family_age_limit_days,
                    family.registered_at
                ),
            )],
        });
    }

    let maxima = &family.dimension_maxima;
    let m = &candidate.metrics;
    let mut reasons = Vec::new();
    let fraction = policy.exceedance_fraction;
    let pct = fraction * 100.0;

    if exact::exceeds_by(
        &exact::rational_u64(m.total_parameters),
        &exact::rational_u64(maxima.max_total_parameters),
        fraction,
    ) {
        reasons.push(reason(
            "model_size",
            format!(
                "total_parameters {} exceeds family maximum {} by more than {pct}%",
                m.total_parameters, maxima.max_total_parameters
            ),
        ));
    }
    let compute: BigRational = exact::rational(m.training_flop) + exact::rational(m.post_training_flop);
    if exact::exceeds_by(&compute, &exact::rational(maxima.max_total_compute), fraction) {
        reasons.push(reason(
            "compute",
            format!(
                "total compute {:e} exceeds family maximum {:e} by more than {pct}%",
                m.total_compute(),
                maxima.max_total_compute
            ),
        ));
    }
    if exact::exceeds_by(
        &exact::rational_u64(m.training_tokens),
        &exact::rational_u64(maxima.max_training_tokens),
        fraction,
    ) {
        reasons.push(reason(
            "training_tokens",
            format!(
                "training_tokens {} exceeds family maximum {} by more than {pct}%",
                m.training_tokens, maxima.max_training_tokens
            ),
        ));
    }
    for (domain, &score) in &candidate.eval_scores {
        // A domain the family never reported counts as a previous best of 0.
        let best = maxima.max_eval_scores.get(domain).copied().unwrap_or(0.0);
        let dimension = format!("eval:{domain}");
        if exact::exceeds_by(
            &exact::rational(score),
            &exact::rational(best),
            policy.eval_exceedance_fraction,
        ) {
            reasons.push(reason(
                dimension,
                format!(
                    "score {score} exceeds family best {best} by more than {}%",
                    policy.eval_exceedance_fraction * 100.0
                ),
            ));
        } else if score >= policy.eval_absolute_threshold && best < policy.eval_absolute_threshold {
            reasons.push(reason(
                dimension,
                format!(
                    "score {score} crosses the {} threshold (family best {best})",
                    policy.eval_absolute_threshold
                ),
            ));
        }
    }

    Ok(VersionRegistrationRequirement {
        decision: if reasons.is_empty() {
            RegistrationDecision::NameOnly
        } else {
            RegistrationDecision::FullSubmission
        },
        reasons,
    })
}

/// Appends a version, re-checking family consistency and recomputing maxima.
pub fn apply_version(
    family: &ModelFamily,
    version: ModelVersion,
    requirement: &VersionRegistrationRequirement,
) -> Result<ModelFamily, FamilyError> {
    match requirement.decision {
        RegistrationDecision::NewFamilyRequired => return Err(FamilyError::NewFamilyRequired),
        RegistrationDecision::FullSubmission if version.kind != VersionKind::FullSubmission => {
            return Err(FamilyError::FullSubmissionRequired(requirement.reasons.clone()))
        }
        _ => {}
    }
    if family.version(&version.version_name).is_some() {
        return Err(FamilyError::DuplicateVersionName(version.version_name));
    }
    if version.openness != family.openness {
        return Err(FamilyError::FamilyConsistencyViolation {
            field: "openness",
            family: format!("{:?}", family.openness),
            version: format!("{:?}", version.openness),
        });
    }
    if version.security_tier != family.security_tier {
        return Err(FamilyError::FamilyConsistencyViolation {
            field: "security_tier",
            family: family.security_tier.clone(),
            version: version.security_tier.clone(),
        });
    }
    let mut updated = family.clone();
    updated.versions.push(version);
    updated.dimension_maxima = DimensionMaxima::recompute(&updated.versions);
    Ok(updated)
}
