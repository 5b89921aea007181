//! Materialized registry state, rebuilt by folding events.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use registry_core::compliance::{FineAssessment, ThirdPartyLedger, Violation, ViolationKind};
use registry_core::family::{DimensionMaxima, ModelFamily};
use registry_core::{AttestationRecord, RegistryIdentifier};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{EventBody, RegistryEvent};
use crate::records::RegistrationRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyEntry {
    pub family: ModelFamily,
    pub developer_legal_name: String,
    /// Sequence of the last event that touched this family.
    pub last_sequence: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StampRecord {
    pub token: String,
    pub iat: i64,
    pub exp: i64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RegistryState {
    pub last_sequence: u64,
    pub families: BTreeMap<RegistryIdentifier, FamilyEntry>,
    pub records: BTreeMap<RegistryIdentifier, RegistrationRecord>,
    pub attestations: Vec<AttestationRecord>,
    pub violations: BTreeMap<RegistryIdentifier, Violation>,
    pub fines: Vec<FineAssessment>,
    pub stamps: BTreeMap<RegistryIdentifier, StampRecord>,
    pub ledger: ThirdPartyLedger,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("corrupt log: expected sequence {expected}, found {found}")]
    SequenceGap { expected: u64, found: u64 },
    #[error("corrupt log at sequence {sequence}: {reason}")]
    Malformed { sequence: u64, reason: String },
}

impl RegistryState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Byte-exact serialization used to compare live and replayed state.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("state serialization is infallible")
    }

    pub fn is_identifier_taken(&self, id: &RegistryIdentifier) -> bool {
        self.families.contains_key(id)
            || self.records.contains_key(id)
            || self.violations.contains_key(id)
    }

    pub fn family_of_developer(&self, developer_ref: &str, trade_name: &str) -> Option<&FamilyEntry> {
        self.families.values().find(|f| {
            f.family.developer_ref == developer_ref && f.family.trade_name.trim() == trade_name.trim()
        })
    }

    pub fn violations_of(&self, subject_ref: &str, kind: ViolationKind) -> Vec<Violation> {
        let mut v: Vec<_> = self
            .violations
            .values()
            .filter(|v| v.subject_ref == subject_ref && v.kind == kind)
            .cloned()
            .collect();
        v.sort_by(|a, b| a.opened_date.cmp(&b.opened_date).then_with(|| a.violation_id.cmp(&b.violation_id)));
        v
    }

    pub fn is_attested(&self, family_id: &RegistryIdentifier, due: NaiveDate) -> bool {
        self.attestations
            .iter()
            .any(|a| &a.family_id == family_id && a.due_date == due && a.completed_date.is_some())
    }

    /// Applies one event. The sequence must directly follow the last one.
    pub fn apply(&mut self, event: &RegistryEvent) -> Result<(), ReplayError> {
        if event.sequence != self.last_sequence + 1 {
            return Err(ReplayError::SequenceGap {
                expected: self.last_sequence + 1,
                found: event.sequence,
            });
        }
        let seq = event.sequence;
        let malformed = |reason: String| ReplayError::Malformed { sequence: seq, reason };
        let body = EventBody::decode(event.kind, &event.body).map_err(|e| malformed(e.to_string()))?;
        match body {
            EventBody::SubmissionAccepted(b) => {
                let id = b.family.family_id.clone();
                if self.families.contains_key(&id) || self.records.contains_key(&b.record.identifier) {
                    return Err(malformed(format!("identifier reuse in family {id}")));
                }
                self.families.insert(
                    id,
                    FamilyEntry {
                        developer_legal_name: b.record.developer_legal_name.clone(),
                        family: b.family,
                        last_sequence: seq,
                    },
                );
                self.records.insert(b.record.identifier.clone(), b.record);
            }
            EventBody::VersionAdded(b) => {
                if self.records.contains_key(&b.record.identifier) {
                    return Err(malformed(format!("identifier reuse {}", b.record.identifier)));
                }
                let entry = self
                    .families
                    .get_mut(&b.family_id)
                    .ok_or_else(|| malformed(format!("unknown family {}", b.family_id)))?;
                entry.family.versions.push(b.version);
                entry.family.dimension_maxima = DimensionMaxima::recompute(&entry.family.versions);
                entry.last_sequence = seq;
                self.records.insert(b.record.identifier.clone(), b.record);
            }
            EventBody::AttestationRecorded(b) => {
                let family_id = b.attestation.family_id.clone();
                let entry = self
                    .families
                    .get_mut(&family_id)
                    .ok_or_else(|| malformed(format!("unknown family {family_id}")))?;
                entry.last_sequence = seq;
                if let Some(update) = b.update {
                    let version = entry
                        .family
                        .version_by_id_mut(&update.identifier)
                        .ok_or_else(|| malformed(format!("unknown version {}", update.identifier)))?;
                    version.candidate.metrics = update.submission.metrics;
                    version.candidate.eval_scores = update.submission.evaluations.capability_scores();
                    entry.family.dimension_maxima = DimensionMaxima::recompute(&entry.family.versions);
                    let record = self
                        .records
                        .get_mut(&update.identifier)
                        .ok_or_else(|| malformed(format!("unknown record {}", update.identifier)))?;
                    record.submission = Some(update.submission);
                }
                self.attestations.push(b.attestation);
            }
            EventBody::StatusChanged(b) => {
                let record = self
                    .records
                    .get_mut(&b.identifier)
                    .ok_or_else(|| malformed(format!("unknown record {}", b.identifier)))?;
                if record.status != b.from {
                    return Err(malformed(format!(
                        "status of {} is {}, event expects {}",
                        b.identifier, record.status, b.from
                    )));
                }
                record.status = b.to;
                if b.deployment_date.is_some() {
                    record.deployment_date = b.deployment_date;
                }
                if let Some(submission) = record.submission.as_mut() {
                    submission.status = b.to;
                    if b.deployment_date.is_some() {
                        submission.deployment_date = b.deployment_date;
                    }
                }
                let family_id = record.family_id.clone();
                let entry = self
                    .families
                    .get_mut(&family_id)
                    .ok_or_else(|| malformed(format!("unknown family {family_id}")))?;
                let version = entry
                    .family
                    .version_by_id_mut(&b.identifier)
                    .ok_or_else(|| malformed(format!("unknown version {}", b.identifier)))?;
                version.status = b.to;
                if b.deployment_date.is_some() {
                    version.deployment_date = b.deployment_date;
                }
                entry.last_sequence = seq;
            }
            EventBody::ViolationOpened(b) => {
                let id = b.violation.violation_id.clone();
                if self.is_identifier_taken(&id) {
                    return Err(malformed(format!("identifier reuse {id}")));
                }
                self.violations.insert(id, b.violation);
            }
            EventBody::FineAssessed(b) => {
                if !self.violations.contains_key(&b.assessment.violation_ref) {
                    return Err(malformed(format!("unknown violation {}", b.assessment.violation_ref)));
                }
                self.fines.push(b.assessment);
            }
            EventBody::StampIssued(b) => {
                let record = self
                    .records
                    .get(&b.identifier)
                    .ok_or_else(|| malformed(format!("unknown record {}", b.identifier)))?;
                let family_id = record.family_id.clone();
                if let Some(entry) = self.families.get_mut(&family_id) {
                    entry.last_sequence = seq;
                }
                self.stamps.insert(
                    b.identifier,
                    StampRecord {
                        token: b.token,
                        iat: b.iat,
                        exp: b.exp,
                    },
                );
            }
            EventBody::ThirdPartyCheckLogged(b) => {
                let expected = self.ledger.len() as u64 + 1;
                if b.entry.sequence != expected {
                    return Err(malformed(format!(
                        "ledger sequence {} where {expected} expected",
                        b.entry.sequence
                    )));
                }
                self.ledger
                    .record_third_party_check(b.entry.check, b.entry.timestamp)
                    .map_err(|e| malformed(e.to_string()))?;
            }
        }
        self.last_sequence = seq;
        Ok(())
    }
}

/// Rebuilds state from a complete event stream starting at sequence 1.
pub fn replay_state<'a>(events: impl IntoIterator<Item = &'a RegistryEvent>) -> Result<RegistryState, ReplayError> {
    let mut state = RegistryState::new();
    for event in events {
        state.apply(event)?;
    }
    Ok(state)
}
