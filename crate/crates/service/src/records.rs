//! Stored registration records and their public projection.

use chrono::NaiveDate;
use registry_core::family::{VersionKind, VersionRegistrationRequirement};
use registry_core::{
    DeploymentStatus, OpennessClass, QualificationDecision, RegistrationSubmission, RegistryIdentifier,
};
use serde::{Deserialize, Serialize};

use crate::business::BusinessCheck;

/// Everything the registry holds about one registered model version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationRecord {
    pub identifier: RegistryIdentifier,
    pub family_id: RegistryIdentifier,
    pub developer_ref: String,
    pub developer_legal_name: String,
    pub family_trade_name: String,
    pub version_name: String,
    pub status: DeploymentStatus,
    pub registration_date: NaiveDate,
    pub deployment_date: Option<NaiveDate>,
    pub kind: VersionKind,
    pub openness: OpennessClass,
    pub requirement: VersionRegistrationRequirement,
    /// Present for full submissions.
    pub submission: Option<RegistrationSubmission>,
    pub qualification: Option<QualificationDecision>,
    pub business_check: BusinessCheck,
}

/// The only view of a record served to the public.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublicRecord {
    pub identifier: RegistryIdentifier,
    pub developer_legal_name: String,
    pub family_trade_name: String,
    pub version_name: String,
    pub status: String,
    pub registration_date: NaiveDate,
}

pub const PUBLIC_FIELDS: [&str; 6] = [
    "identifier",
    "developer_legal_name",
    "family_trade_name",
    "version_name",
    "status",
    "registration_date",
];

pub fn public_projection(record: &RegistrationRecord) -> PublicRecord {
    PublicRecord {
        identifier: record.identifier.clone(),
        developer_legal_name: record.developer_legal_name.clone(),
        family_trade_name: record.family_trade_name.clone(),
        version_name: record.version_name.clone(),
        status: record.status.as_str().to_owned(),
        registration_date: record.registration_date,
    }
}

impl PublicRecord {
    /// Case-insensitive substring match against the searchable fields.
    pub fn matches(&self, needle_lower: &str) -> bool {
        [
            self.developer_legal_name.as_str(),
            self.family_trade_name.as_str(),
            self.version_name.as_str(),
            self.identifier.as_str(),
        ]
        .iter()
        .any(|field| field.to_lowercase().contains(needle_lower))
    }
}
