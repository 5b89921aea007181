//! The append-only event log.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use registry_core::compliance::{FineAssessment, LedgerEntry, Violation};
use registry_core::family::{ModelFamily, ModelVersion, VersionRegistrationRequirement};
use registry_core::{AttestationRecord, DeploymentStatus, RegistrationSubmission, RegistryIdentifier};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auth::PrincipalRole;
use crate::records::RegistrationRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    SubmissionAccepted,
    VersionAdded,
    AttestationRecorded,
    StatusChanged,
    ViolationOpened,
    FineAssessed,
    StampIssued,
    ThirdPartyCheckLogged,
}

/// One immutable log entry. `body` is canonical JSON (object keys sorted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEvent {
    pub sequence: u64,
    pub timestamp: i64,
    pub actor: PrincipalRole,
    pub kind: EventKind,
    pub body: serde_json::Value,
}

/// Typed event payloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EventBody {
    SubmissionAccepted(SubmissionAccepted),
    VersionAdded(VersionAdded),
    AttestationRecorded(AttestationRecorded),
    StatusChanged(StatusChanged),
    ViolationOpened(ViolationOpened),
    FineAssessed(FineAssessed),
    StampIssued(StampIssued),
    ThirdPartyCheckLogged(ThirdPartyCheckLogged),
}

/// A new family founded by its first full submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionAccepted {
    pub family: ModelFamily,
    pub record: RegistrationRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionAdded {
    pub family_id: RegistryIdentifier,
    pub version: ModelVersion,
    pub requirement: VersionRegistrationRequirement,
    pub record: RegistrationRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttestationRecorded {
    pub attestation: AttestationRecord,
    /// Replacement disclosure for one of the family's full-submission versions.
    pub update: Option<AttestationUpdate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttestationUpdate {
    pub identifier: RegistryIdentifier,
    pub submission: RegistrationSubmission,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusChanged {
    pub identifier: RegistryIdentifier,
    pub from: DeploymentStatus,
    pub to: DeploymentStatus,
    pub deployment_date: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationOpened {
    pub violation: Violation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineAssessed {
    pub assessment: FineAssessment,
    pub annual_turnover: f64,
    pub days_unresolved: u32,
    pub prior_same_kind: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StampIssued {
    pub identifier: RegistryIdentifier,
    pub token: String,
    pub iat: i64,
    pub exp: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThirdPartyCheckLogged {
    pub entry: LedgerEntry,
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::SubmissionAccepted(_) => EventKind::SubmissionAccepted,
            EventBody::VersionAdded(_) => EventKind::VersionAdded,
            EventBody::AttestationRecorded(_) => EventKind::AttestationRecorded,
            EventBody::StatusChanged(_) => EventKind::StatusChanged,
            EventBody::ViolationOpened(_) => EventKind::ViolationOpened,
            EventBody::FineAssessed(_) => EventKind::FineAssessed,
            EventBody::StampIssued(_) => EventKind::StampIssued,
            EventBody::ThirdPartyCheckLogged(_) => EventKind::ThirdPartyCheckLogged,
        }
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("event bodies always serialize")
    }

    /// Decodes a stored body according to its declared kind.
    pub fn decode(kind: EventKind, body: &serde_json::Value) -> Result<Self, serde_json::Error> {
        use serde_json::from_value as de;
        let b = body.clone();
        Ok(match kind {
            EventKind::SubmissionAccepted => EventBody::SubmissionAccepted(de(b)?),
            EventKind::VersionAdded => EventBody::VersionAdded(de(b)?),
            EventKind::AttestationRecorded => EventBody::AttestationRecorded(de(b)?),
            EventKind::StatusChanged => EventBody::StatusChanged(de(b)?),
            EventKind::ViolationOpened => EventBody::ViolationOpened(de(b)?),
            EventKind::FineAssessed => EventBody::FineAssessed(de(b)?),
            EventKind::StampIssued => EventBody::StampIssued(de(b)?),
            EventKind::ThirdPartyCheckLogged => EventBody::ThirdPartyCheckLogged(de(b)?),
        })
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("event log I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt event log: {0}")]
    Corrupt(String),
}

/// Durable, append-only storage of events.
pub trait EventLog: Send + Sync {
    fn append(&mut self, events: &[RegistryEvent]) -> Result<(), LogError>;
    fn read_all(&self) -> Result<Vec<RegistryEvent>, LogError>;
}

#[derive(Debug, Default, Clone)]
pub struct MemoryLog {
    events: Vec<RegistryEvent>,
}

impl MemoryLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events(&self) -> &[RegistryEvent] {
        &self.events
    }
}

impl EventLog for MemoryLog {
    fn append(&mut self, events: &[RegistryEvent]) -> Result<(), LogError> {
        self.events.extend_from_slice(events);
        Ok(())
    }

    fn read_all(&self) -> Result<Vec<RegistryEvent>, LogError> {
        Ok(self.events.clone())
    }
}

/// JSON Lines file, one event per line, synced after every append.
#[derive(Debug)]
pub struct FileLog {
    path: PathBuf,
    file: File,
}

impl FileLog {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LogError> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl EventLog for FileLog {
    fn append(&mut self, events: &[RegistryEvent]) -> Result<(), LogError> {
        let mut buf = Vec::new();
        for e in events {
            serde_json::to_writer(&mut buf, e).map_err(|e| LogError::Corrupt(e.to_string()))?;
            buf.push(b'\n');
        }
        self.file.write_all(&buf)?;
        self.file.sync_data()?;
        Ok(())
    }

    fn read_all(&self) -> Result<Vec<RegistryEvent>, LogError> {
        let reader = BufReader::new(File::open(&self.path)?);
        let mut events = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let event = serde_json::from_str(&line)
                .map_err(|e| LogError::Corrupt(format!("line {}: {e}", n + 1)))?;
            events.push(event);
        }
        Ok(events)
    }
}
