//! Core domain for a national frontier-model registry.
//!
//! * [`schema`] and [`validate`]: the structured registration submission and
//!   its invariants.
//! * [`openness`] and [`tolerance`]: openness classification and accuracy
//!   checks for reported figures.
//! * [`qualification`]: which models must register.
//! * [`family`] and [`attestation`]: version semantics and the semiannual
//!   attestation duty.
//! * [`compliance`]: fines, severity escalation and the third-party ledger.
//! * [`identifier`] and [`stamp`]: registry identifiers and signed stamps.

pub mod attestation;
pub mod compliance;
pub mod exact;
pub mod family;
pub mod fixtures;
pub mod identifier;
pub mod openness;
pub mod policy;
pub mod qualification;
pub mod schema;
pub mod stamp;
pub mod tolerance;
pub mod validate;

pub use ed25519_dalek::{SigningKey, VerifyingKey};

pub use attestation::{attestation_schedule, detect_overdue, AttestationOutcome, AttestationRecord};
pub use compliance::{assess_fine, escalate_severity, FineAssessment, FinePolicy, Severity, Violation};
pub use family::{
    apply_version, assess_version_registration, FamilyError, FamilyPolicy, ModelFamily, ModelVersion,
    RegistrationDecision, VersionCandidate, VersionRegistrationRequirement,
};
pub use identifier::{allocate_identifier, RegistryIdentifier};
pub use openness::classify_openness;
pub use policy::RegistryPolicy;
pub use qualification::{default_thresholds, evaluate_qualification, QualificationDecision, ThresholdConfig};
pub use schema::{CapabilityMetrics, DeploymentStatus, HighRiskProfile, OpennessClass, RegistrationSubmission};
pub use stamp::{issue_stamp, verify_stamp, RegistrationStamp, StampSubject, StampVerdict};
pub use tolerance::{check_reported_tolerance, ToleranceMetric, ToleranceVerdict};
pub use validate::{validate_submission, ValidationReport};
