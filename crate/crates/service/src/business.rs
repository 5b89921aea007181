//! Business-register lookups for developer entities.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BusinessCheck {
    Confirmed,
    Mismatch,
    /// The register could not answer; the check stays pending and never blocks.
    Unavailable,
}

pub trait BusinessRegistryClient: Send + Sync {
    /// Registered legal name for a registration number, or `None` when the
    /// register cannot answer.
    fn lookup(&self, registration_number: &str) -> Option<String>;
}

/// Fixture-backed stand-in for a national business register.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FixtureBusinessRegistry {
    entries: BTreeMap<String, String>,
}

impl FixtureBusinessRegistry {
    pub fn new(entries: impl IntoIterator<Item = (String, String)>) -> Self {
        Self {
            entries: entries.into_iter().collect(),
        }
    }

    /// Reads a JSON object mapping registration numbers to legal names.
    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

impl BusinessRegistryClient for FixtureBusinessRegistry {
    fn lookup(&self, registration_number: &str) -> Option<String> {
        self.entries.get(registration_number.trim()).cloned()
    }
}

fn normalize(name: &str) -> String {
    name.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

pub fn verify_business_registration(
    client: &dyn BusinessRegistryClient,
    registration_number: &str,
    legal_name: &str,
) -> BusinessCheck {
    match client.lookup(registration_number) {
        None => BusinessCheck::Unavailable,
        Some(name) if normalize(&name) == normalize(legal_name) => BusinessCheck::Confirmed,
        Some(_) => BusinessCheck::Mismatch,
    }
}
