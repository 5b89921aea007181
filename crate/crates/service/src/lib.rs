//! The registry service: an append-only event log, state materialized from
//! it, role-gated commands and reads, and the HTTP API.

pub mod auth;
pub mod business;
pub mod config;
pub mod events;
pub mod http;
pub mod records;
pub mod registry;
pub mod state;

pub use auth::{Credentials, PrincipalRole};
pub use events::{EventKind, EventLog, FileLog, MemoryLog, RegistryEvent};
pub use http::{router, AppState};
pub use records::{public_projection, PublicRecord, RegistrationRecord};
pub use registry::{Registry, RegistryBuilder, RegistryError};
pub use state::{replay_state, RegistryState};
