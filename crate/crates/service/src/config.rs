//! Environment configuration, key files and state snapshots.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use registry_core::stamp::{generate_signing_key, signing_key_from_pem, signing_key_to_pem, verifying_key_to_pem};
use registry_core::{RegistryPolicy, SigningKey};
use thiserror::Error;

use crate::auth::Credentials;
use crate::business::FixtureBusinessRegistry;
use crate::events::FileLog;
use crate::http::{AppState, SnapshotPolicy};
use crate::registry::{RegistryBuilder, RegistryError};
use crate::state::RegistryState;

pub const EVENTS_FILE: &str = "events.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const SIGNING_KEY_FILE: &str = "signing_key.pem";
pub const VERIFICATION_KEY_FILE: &str = "verification_key.pem";
pub const CREDENTIALS_FILE: &str = "credentials.json";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub data_dir: PathBuf,
    pub policy_file: Option<PathBuf>,
    pub signing_key: PathBuf,
    pub credentials: PathBuf,
    pub business_fixture: Option<PathBuf>,
    /// Write a snapshot every this many events; 0 disables snapshots.
    pub snapshot_every: u64,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{name}: {reason}")]
    Invalid { name: &'static str, reason: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("policy: {0}")]
    Policy(#[from] registry_core::policy::PolicyError),
    #[error("signing key: {0}")]
    Key(#[from] registry_core::stamp::KeyError),
    #[error("snapshot: {0}")]
    Snapshot(serde_json::Error),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ConfigError + '_ {
    move |source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl ServiceConfig {
    /// Reads `MR_BIND`, `MR_DATA_DIR`, `MR_POLICY_FILE`, `MR_SIGNING_KEY`,
    /// `MR_CREDENTIALS`, `MR_BUSINESS_FIXTURE` and `MR_SNAPSHOT_EVERY`.
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let bind = get("MR_BIND")
            .unwrap_or_else(|| "127.0.0.1:8080".into())
            .parse()
            .map_err(|e: std::net::AddrParseError| ConfigError::Invalid {
                name: "MR_BIND",
                reason: e.to_string(),
            })?;
        let data_dir = PathBuf::from(get("MR_DATA_DIR").unwrap_or_else(|| "./registry-data".into()));
        let snapshot_every = match get("MR_SNAPSHOT_EVERY") {
            None => 1000,
            Some(v) => v.parse().map_err(|_| ConfigError::Invalid {
                name: "MR_SNAPSHOT_EVERY",
                reason: format!("not a non-negative integer: {v}"),
            })?,
        };
        Ok(Self {
            bind,
            policy_file: get("MR_POLICY_FILE").map(PathBuf::from),
            signing_key: get("MR_SIGNING_KEY")
                .map(PathBuf::from)
                .unwrap_or_else(|| data_dir.join(SIGNING_KEY_FILE)),
            credentials: get("MR_CREDENTIALS")
                .map(PathBuf::from)
                .unwrap_or_else(|| data_dir.join(CREDENTIALS_FILE)),
            business_fixture: get("MR_BUSINESS_FIXTURE").map(PathBuf::from),
            data_dir,
            snapshot_every,
        })
    }
}

pub fn read_signing_key(path: &Path) -> Result<SigningKey, ConfigError> {
    let pem = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(signing_key_from_pem(&pem)?)
}

/// Writes a fresh PKCS#8 signing key and the matching SPKI verification key.
pub fn generate_key_files(signing_path: &Path, verification_path: &Path) -> Result<SigningKey, ConfigError> {
    if signing_path.exists() {
        return Err(ConfigError::Invalid {
            name: "signing key",
            reason: format!("{} already exists", signing_path.display()),
        });
    }
    let key = generate_signing_key(&mut rand::rngs::OsRng);
    write_private(signing_path, signing_key_to_pem(&key)?.as_bytes())?;
    std::fs::write(verification_path, verifying_key_to_pem(&key.verifying_key())?).map_err(io_err(verification_path))?;
    Ok(key)
}

fn write_private(path: &Path, bytes: &[u8]) -> Result<(), ConfigError> {
    let mut options = std::fs::OpenOptions::new();
    options.write(true).create_new(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        options.mode(0o600);
    }
    let mut file = options.open(path).map_err(io_err(path))?;
    file.write_all(bytes).map_err(io_err(path))
}

/// Atomically replaces the snapshot file.
pub fn write_snapshot(path: &Path, state: &RegistryState) -> Result<(), ConfigError> {
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, state.canonical_bytes()).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn read_snapshot(path: &Path) -> Result<Option<RegistryState>, ConfigError> {
    match std::fs::read(path) {
        Ok(bytes) => serde_json::from_slice(&bytes).map(Some).map_err(ConfigError::Snapshot),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_err(path)(e)),
    }
}

/// Opens the data directory and rebuilds the registry from its event log.
pub fn build_app(config: &ServiceConfig) -> Result<AppState, ConfigError> {
    std::fs::create_dir_all(&config.data_dir).map_err(io_err(&config.data_dir))?;
    let policy = match &config.policy_file {
        Some(path) => RegistryPolicy::load(path)?,
        None => RegistryPolicy::default(),
    };
    let key = read_signing_key(&config.signing_key)?;
    let verification_path = config.data_dir.join(VERIFICATION_KEY_FILE);
    std::fs::write(&verification_path, verifying_key_to_pem(&key.verifying_key())?)
        .map_err(io_err(&verification_path))?;
    let credentials = if config.credentials.exists() {
        Credentials::load(&config.credentials).map_err(io_err(&config.credentials))?
    } else {
        tracing::warn!(path = %config.credentials.display(), "no credentials file; only public endpoints are usable");
        Credentials::default()
    };
    let business = match &config.business_fixture {
        Some(path) => FixtureBusinessRegistry::load(path).map_err(io_err(path))?,
        None => FixtureBusinessRegistry::default(),
    };
    let snapshot_path = config.data_dir.join(SNAPSHOT_FILE);
    let snapshot = if config.snapshot_every > 0 {
        read_snapshot(&snapshot_path)?
    } else {
        None
    };
    let events_path = config.data_dir.join(EVENTS_FILE);
    let log = FileLog::open(&events_path).map_err(|e| ConfigError::Registry(e.into()))?;
    let registry = RegistryBuilder::new(key)
        .policy(policy)
        .business(Arc::new(business))
        .snapshot(snapshot)
        .open(Box::new(log))?;
    let snapshots = (config.snapshot_every > 0).then_some(SnapshotPolicy {
        path: snapshot_path,
        every: config.snapshot_every,
    });
    Ok(AppState::new(registry, credentials).with_snapshots(snapshots))
}
