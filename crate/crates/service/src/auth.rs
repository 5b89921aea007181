//! Principals and bearer-token credentials.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Who is asking. Unauthenticated requests are `Public`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "role", content = "entity")]
pub enum PrincipalRole {
    /// A developer, identified by its business registration number.
    Developer(String),
    RegistryAdmin,
    GovernmentReader,
    Public,
}

impl PrincipalRole {
    pub fn developer(entity: impl Into<String>) -> Self {
        PrincipalRole::Developer(entity.into())
    }

    /// Full-record readers.
    pub fn is_government(&self) -> bool {
        matches!(self, PrincipalRole::RegistryAdmin | PrincipalRole::GovernmentReader)
    }

    pub fn is_admin(&self) -> bool {
        matches!(self, PrincipalRole::RegistryAdmin)
    }

    pub fn owns(&self, developer_ref: &str) -> bool {
        matches!(self, PrincipalRole::Developer(e) if e == developer_ref)
    }
}

/// Maps opaque bearer tokens to principals.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Credentials {
    pub tokens: BTreeMap<String, PrincipalRole>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuthOutcome {
    Principal(PrincipalRole),
    UnknownToken,
}

impl Credentials {
    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn with(mut self, token: impl Into<String>, principal: PrincipalRole) -> Self {
        self.tokens.insert(token.into(), principal);
        self
    }

    /// Resolves an `Authorization` header value. No header means `Public`.
    pub fn authenticate(&self, header: Option<&str>) -> AuthOutcome {
        let Some(value) = header else {
            return AuthOutcome::Principal(PrincipalRole::Public);
        };
        let token = value.strip_prefix("Bearer ").unwrap_or(value).trim();
        match self.tokens.get(token) {
            Some(p) => AuthOutcome::Principal(p.clone()),
            None => AuthOutcome::UnknownToken,
        }
    }
}
