//! The shared JSON policy file: inclusion thresholds, family rules and fines.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compliance::{FinePolicy, FinePolicyError};
use crate::family::{FamilyPolicy, FamilyPolicyError};
use crate::qualification::{ThresholdConfig, ThresholdConfigError};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RegistryPolicy {
    #[serde(default)]
    pub thresholds: ThresholdConfig,
    #[serde(default)]
    pub family: FamilyPolicy,
    #[serde(default)]
    pub fines: FinePolicy,
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("cannot read policy file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse policy file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Thresholds(#[from] ThresholdConfigError),
    #[error(transparent)]
    Family(#[from] FamilyPolicyError),
    #[error(transparent)]
    Fines(#[from] FinePolicyError),
}

impl RegistryPolicy {
    pub fn validate(&self) -> Result<(), PolicyError> {
        self.thresholds.validate()?;
        self.family.validate()?;
        self.fines.validate()?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        let policy: Self = serde_json::from_str(text)?;
        policy.validate()?;
        Ok(policy)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PolicyError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Reads thresholds from either a bare threshold config or a full policy file.
pub fn load_thresholds(text: &str) -> Result<ThresholdConfig, PolicyError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let config: ThresholdConfig = match value.get("thresholds") {
        Some(inner) => serde_json::from_value(inner.clone())?,
        None => serde_json::from_value(value)?,
    };
    config.validate()?;
    Ok(config)
}
