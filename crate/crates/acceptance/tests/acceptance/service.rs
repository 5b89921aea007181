//! Criteria exercised through the registry service: random operation
//! sequences, replay, and the public HTTP surface.

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use axum::http::{Request, StatusCode};
use chrono::{Days, NaiveDate};
use http_body_util::BodyExt;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use registry_core::compliance::{ViolationKind, ViolationSubject};
use registry_core::fixtures::sample_submission;
use registry_core::{validate_submission, DeploymentStatus, RegistrationSubmission, RegistryIdentifier, SigningKey};
use registry_service::events::AttestationUpdate;
use registry_service::registry::{
    AddVersionRequest, AttestRequest, CandidateMetrics, FineRequest, ManualClock, OpenViolationRequest, StatusRequest,
    ThirdPartyCheckRequest,
};
use registry_service::{
    public_projection, replay_state, router, AppState, Credentials, EventKind, FileLog, MemoryLog, PrincipalRole,
    Registry, RegistryBuilder,
};
use serde_json::Value;
use tower::ServiceExt;

use crate::{ensure, Outcome};

const DEVELOPERS: [(&str, &str); 3] = [
    ("BRN-0042-7781", "Northwind Intelligence Ltd"),
    ("BRN-1100-0001", "Ardent Labs plc"),
    ("BRN-2200-0002", "Brightwater Models GmbH"),
];
const TRADE_NAMES: [&str; 5] = ["Kestrel", "Heron", "Plover", "Curlew", "Dunlin"];
const STATUSES: [DeploymentStatus; 4] = [
    DeploymentStatus::PreDeployment,
    DeploymentStatus::OnMarket,
    DeploymentStatus::Recalled,
    DeploymentStatus::Withdrawn,
];

fn start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2025, 2, 10).unwrap()
}

fn open_registry(seed: u64, clock: Arc<ManualClock>, log: Box<dyn registry_service::EventLog>) -> Registry {
    RegistryBuilder::new(SigningKey::from_bytes(&[seed as u8 | 1; 32]))
        .seed(seed)
        .clock(clock)
        .open(log)
        .expect("fresh registry opens")
}

/// A registry driven by random API calls.
struct World {
    registry: Registry,
    clock: Arc<ManualClock>,
    rng: StdRng,
    /// Identifiers of every version the registry accepted, per the receipts.
    accepted: BTreeSet<RegistryIdentifier>,
    ops: usize,
}

impl World {
    fn new(seed: u64, log: Box<dyn registry_service::EventLog>) -> Self {
        let clock = Arc::new(ManualClock::at_date(start_date()));
        Self {
            registry: open_registry(seed, clock.clone(), log),
            clock,
            rng: StdRng::seed_from_u64(seed),
            accepted: BTreeSet::new(),
            ops: 0,
        }
    }

    fn developer(&mut self) -> (PrincipalRole, &'static str, &'static str) {
        let (brn, name) = *DEVELOPERS.choose(&mut self.rng).unwrap();
        (PrincipalRole::developer(brn), brn, name)
    }

    fn principal(&mut self, owner: &str) -> PrincipalRole {
        match self.rng.gen_range(0..10) {
            0 => PrincipalRole::RegistryAdmin,
            1 => PrincipalRole::Public,
            2 => PrincipalRole::GovernmentReader,
            3 => self.developer().0,
            _ => PrincipalRole::developer(owner),
        }
    }

    fn submission(&mut self, brn: &str, legal_name: &str) -> RegistrationSubmission {
        let mut s = sample_submission();
        s.developer.business_registration_number = brn.into();
        s.developer.legal_name = legal_name.into();
        s.family_trade_name = (*TRADE_NAMES.choose(&mut self.rng).unwrap()).into();
        s.version_name = format!("{}-{}", s.family_trade_name.to_lowercase(), self.rng.gen_range(1..30));
        let scale = self.rng.gen_range(0.5..2.0);
        s.metrics.total_parameters = (s.metrics.total_parameters as f64 * scale) as u64;
        s.metrics.active_parameters_avg = s.metrics.total_parameters / 4;
        s.metrics.training_flop *= self.rng.gen_range(0.5..5.0);
        s.metrics.training_tokens = (s.metrics.training_tokens as f64 * self.rng.gen_range(0.5..1.5)) as u64;
        s.training_data.token_count = s.metrics.training_tokens;
        if self.rng.gen_bool(0.1) {
            s.access.weights_public = true;
        }
        s
    }

    fn some_family(&mut self) -> Option<(RegistryIdentifier, String, u64)> {
        let families: Vec<_> = self.registry.state().families.values().collect();
        families
            .choose(&mut self.rng)
            .map(|e| (e.family.family_id.clone(), e.family.developer_ref.clone(), e.last_sequence))
    }

    fn some_identifier(&mut self) -> RegistryIdentifier {
        let known: Vec<_> = self.registry.state().records.keys().cloned().collect();
        if !known.is_empty() && self.rng.gen_bool(0.8) {
            known.choose(&mut self.rng).unwrap().clone()
        } else {
            let payload: [u32; 10] = std::array::from_fn(|_| self.rng.gen_range(0..32));
            RegistryIdentifier::from_parts(2025, &payload).unwrap()
        }
    }

    fn step(&mut self) {
        self.ops += 1;
        match self.rng.gen_range(0..100) {
            0..=24 => {
                let (dev, brn, name) = self.developer();
                let s = self.submission(brn, name);
                if let Ok(r) = self.registry.submit_registration(&dev, s) {
                    self.accepted.insert(r.identifier);
                }
            }
            25..=29 => {
                // Registering a model that is already on the market is refused.
                let (dev, brn, name) = self.developer();
                let mut s = self.submission(brn, name);
                s.status = DeploymentStatus::OnMarket;
                s.deployment_date = Some(self.registry.today());
                if let Ok(r) = self.registry.submit_registration(&dev, s) {
                    self.accepted.insert(r.identifier);
                }
            }
            30..=44 => {
                let Some((family_id, owner, seq)) = self.some_family() else { return };
                let principal = self.principal(&owner);
                let maxima = self.registry.state().families[&family_id].family.dimension_maxima.clone();
                let full = self.rng.gen_bool(0.3);
                let version_name = format!("v{}", self.rng.gen_range(1..40));
                let planned = self.registry.today() + Days::new(self.rng.gen_range(0..900));
                let mut request = AddVersionRequest {
                    expected_sequence: self.rng.gen_bool(0.8).then_some(seq).or(Some(seq.saturating_sub(1))),
                    version_name: version_name.clone(),
                    planned_deployment: planned,
                    candidate: None,
                    submission: None,
                };
                if full {
                    let legal = DEVELOPERS.iter().find(|d| d.0 == owner).map_or("x", |d| d.1);
                    let mut s = self.submission(&owner, legal);
                    s.family_trade_name = self.registry.state().families[&family_id].family.trade_name.clone();
                    s.version_name = version_name;
                    request.submission = Some(s);
                } else {
                    let mut m = sample_submission().metrics;
                    m.total_parameters = (maxima.max_total_parameters as f64 * self.rng.gen_range(0.5..1.4)) as u64;
                    m.active_parameters_avg = m.total_parameters / 4;
                    m.training_flop = maxima.max_total_compute * self.rng.gen_range(0.3..0.9);
                    m.post_training_flop = 0.0;
                    m.training_tokens = maxima.max_training_tokens;
                    request.candidate = Some(CandidateMetrics { metrics: m, eval_scores: Default::default() });
                }
                if let Ok(r) = self.registry.add_version(&principal, &family_id, request) {
                    self.accepted.insert(r.identifier);
                }
            }
            45..=69 => {
                let identifier = self.some_identifier();
                let owner = self
                    .registry
                    .state()
                    .records
                    .get(&identifier)
                    .map_or_else(|| DEVELOPERS[0].0.to_string(), |r| r.developer_ref.clone());
                let principal = self.principal(&owner);
                let to = *STATUSES.choose(&mut self.rng).unwrap();
                let deployment_date = self
                    .rng
                    .gen_bool(0.3)
                    .then(|| start_date() + Days::new(self.rng.gen_range(0..1_500)));
                let _ = self.registry.change_status(
                    &principal,
                    StatusRequest { expected_sequence: None, identifier, to, deployment_date },
                );
            }
            70..=79 => self.clock.advance_days(self.rng.gen_range(0..150)),
            80..=87 => {
                let Some((family_id, owner, seq)) = self.some_family() else { return };
                let principal = self.principal(&owner);
                let update = if self.rng.gen_bool(0.3) {
                    let entry = &self.registry.state().families[&family_id];
                    entry.family.versions.iter().find(|v| v.kind == registry_core::family::VersionKind::FullSubmission).and_then(|v| {
                        let record = self.registry.state().records.get(&v.identifier)?;
                        let mut s = record.submission.clone()?;
                        s.status = record.status;
                        s.deployment_date = record.deployment_date;
                        s.metrics.training_tokens += 1;
                        Some(AttestationUpdate { identifier: v.identifier.clone(), submission: s })
                    })
                } else {
                    None
                };
                let _ = self.registry.record_attestation(
                    &principal,
                    &family_id,
                    AttestRequest { expected_sequence: Some(seq), attested_by: "Chief Compliance Officer".into(), update },
                );
            }
            88..=94 => {
                let (_, brn, _) = self.developer();
                let request = OpenViolationRequest {
                    subject: ViolationSubject::Developer,
                    subject_ref: brn.into(),
                    kind: *[ViolationKind::OverdueAttestation, ViolationKind::InaccurateReport].choose(&mut self.rng).unwrap(),
                    opened_date: None,
                    severity: None,
                };
                if let Ok(v) = self.registry.open_violation(&PrincipalRole::RegistryAdmin, request) {
                    let turnover = if self.rng.gen_bool(0.3) { 0.0 } else { self.rng.gen_range(1e6..1e11) };
                    let _ = self.registry.assess_fine(
                        &PrincipalRole::RegistryAdmin,
                        FineRequest { violation_id: v.violation_id, annual_turnover: turnover, days_unresolved: None, prior_same_kind: None },
                    );
                }
            }
            _ => {
                let identifier_presented = self.rng.gen_bool(0.8).then(|| self.some_identifier());
                let request = ThirdPartyCheckRequest {
                    user_ref: format!("user-{}", self.rng.gen_range(0..20)),
                    claimed_model: "Kestrel".into(),
                    non_qualification_declaration: identifier_presented.is_none().then(|| "below every threshold".into()),
                    identifier_presented,
                };
                let _ = self.registry.log_third_party_check(&PrincipalRole::GovernmentReader, request);
            }
        }
    }

    /// Every OnMarket version was accepted first, per both the receipts and the log.
    fn gate_holds(&self) -> Result<(), String> {
        for (id, record) in &self.registry.state().records {
            if record.status == DeploymentStatus::OnMarket {
                ensure!(self.accepted.contains(id), "{id} is OnMarket without an accepted registration receipt");
            }
        }
        let mut registered = HashSet::new();
        for event in self.registry.events().map_err(|e| e.to_string())? {
            match event.kind {
                EventKind::SubmissionAccepted | EventKind::VersionAdded => {
                    registered.insert(event.body["record"]["identifier"].as_str().unwrap_or_default().to_owned());
                }
                EventKind::StatusChanged if event.body["to"] == "OnMarket" => {
                    let id = event.body["identifier"].as_str().unwrap_or_default();
                    ensure!(registered.contains(id), "event {} moves {id} OnMarket before it was registered", event.sequence);
                }
                _ => {}
            }
        }
        Ok(())
    }
}

const GATE_SEQUENCES: u64 = 1_000;
const GATE_STEPS: usize = 24;

pub fn predeployment_gate() -> Outcome {
    let mut on_market = 0;
    let mut ops = 0;
    for seed in 0..GATE_SEQUENCES {
        let mut world = World::new(seed, Box::new(MemoryLog::new()));
        for _ in 0..GATE_STEPS {
            world.step();
            world.gate_holds().map_err(|e| format!("sequence {seed}, step {}: {e}", world.ops))?;
        }
        ops += world.ops;
        on_market += world.registry.state().records.values().filter(|r| r.status == DeploymentStatus::OnMarket).count();
    }
    ensure!(on_market > 0, "no sequence ever reached OnMarket; the gate was not exercised");
    Ok(format!("{GATE_SEQUENCES} sequences, {ops} calls, {on_market} OnMarket versions, 0 violations"))
}

const REPLAY_OPS: usize = 500;
const REPLAY_BUDGET: Duration = Duration::from_secs(30);

pub fn replay_determinism() -> Outcome {
    let started = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("events.jsonl");
    let mut world = World::new(0x5eed, Box::new(FileLog::open(&path).map_err(|e| e.to_string())?));
    for _ in 0..REPLAY_OPS {
        world.step();
    }
    let live = world.registry.state().canonical_bytes();
    let events = world.registry.events().map_err(|e| e.to_string())?;
    let replayed = replay_state(&events).map_err(|e| e.to_string())?.canonical_bytes();
    ensure!(replayed == live, "replay differs from live state");
    let reopened = open_registry(0x5eed, world.clock.clone(), Box::new(FileLog::open(&path).map_err(|e| e.to_string())?));
    ensure!(reopened.state().canonical_bytes() == live, "state rebuilt from the on-disk log differs");
    let elapsed = started.elapsed();
    ensure!(elapsed < REPLAY_BUDGET, "took {elapsed:?}, budget {REPLAY_BUDGET:?}");
    Ok(format!(
        "{REPLAY_OPS} operations, {} events, {} state bytes identical ({:.1}s < {}s)",
        events.len(),
        live.len(),
        elapsed.as_secs_f64(),
        REPLAY_BUDGET.as_secs()
    ))
}

const LEAK_RECORDS: usize = 500;
const PUBLIC_PATHS: [&str; 3] = ["/developer/legal_name", "/family_trade_name", "/version_name"];

fn string_leaves(value: &Value, path: String, out: &mut Vec<String>) {
    match value {
        Value::String(_) => out.push(path),
        Value::Array(items) => items.iter().enumerate().for_each(|(i, v)| string_leaves(v, format!("{path}/{i}"), out)),
        Value::Object(map) => map.iter().for_each(|(k, v)| string_leaves(v, format!("{path}/{k}"), out)),
        _ => {}
    }
}

type Template = fn(&str) -> String;
const TEMPLATES: [Template; 3] = [
    |s| s.to_string(),
    |s| format!("{s}@example.org"),
    |s| format!("https://example.org/{s}"),
];

/// KPI thresholds must name a declared KPI, so these take one shared sentinel.
const LINKED: [[&str; 2]; 1] = [["/monitoring/safety_kpis/0", "/monitoring/kpi_thresholds/0/kpi"]];

/// Free-text confidential fields of a submission, grouped where validation
/// ties them together, each with a template that embeds a sentinel and still
/// passes validation.
fn confidential_fields() -> (Vec<(Vec<String>, Template)>, usize) {
    let base = serde_json::to_value(sample_submission()).unwrap();
    let mut leaves = Vec::new();
    string_leaves(&base, String::new(), &mut leaves);
    let mut groups: Vec<Vec<String>> = LINKED.iter().map(|g| g.iter().map(|p| p.to_string()).collect()).collect();
    groups.extend(
        leaves
            .into_iter()
            .filter(|p| !PUBLIC_PATHS.contains(&p.as_str()) && !LINKED.iter().flatten().any(|l| l == p))
            .map(|p| vec![p]),
    );
    let mut fields = Vec::new();
    let mut skipped = 0;
    for group in groups {
        let accepted = TEMPLATES.into_iter().find(|t| {
            let mut v = base.clone();
            for path in &group {
                *v.pointer_mut(path).unwrap() = Value::String(t("zq0123456789abcdefx"));
            }
            serde_json::from_value::<RegistrationSubmission>(v).is_ok_and(|s| validate_submission(&s).is_valid())
        });
        match accepted {
            Some(t) => fields.push((group, t)),
            // Enumerations such as legal_structure cannot carry free text.
            None => skipped += 1,
        }
    }
    (fields, skipped)
}

/// Any `zq` followed by eight or more lowercase hex digits counts as a leak,
/// so truncated sentinels are caught too.
fn find_sentinel(bytes: &[u8]) -> Option<String> {
    bytes.windows(10).position(|w| w.starts_with(b"zq") && w[2..].iter().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(b))).map(
        |i| String::from_utf8_lossy(&bytes[i..(i + 19).min(bytes.len())]).into_owned(),
    )
}

fn random_name(rng: &mut StdRng) -> String {
    // No 'q' or 'z', so public names cannot resemble a sentinel.
    const LETTERS: &[u8] = b"abcdeghijklmnoprstuvwy";
    let len = rng.gen_range(3..9);
    let mut name: String = (0..len).map(|_| *LETTERS.choose(rng).unwrap() as char).collect();
    name[..1].make_ascii_uppercase();
    name
}

pub fn leak_test() -> Outcome {
    let (fields, skipped) = confidential_fields();
    let mut rng = StdRng::seed_from_u64(0x1ea4);
    let clock = Arc::new(ManualClock::at_date(start_date()));
    let mut registry = open_registry(77, clock.clone(), Box::new(MemoryLog::new()));
    let mut planted = HashSet::new();
    let mut ids = Vec::new();
    let mut queries = BTreeSet::new();
    for i in 0..LEAK_RECORDS {
        let mut value = serde_json::to_value(sample_submission()).unwrap();
        for (group, template) in &fields {
            let sentinel = format!("zq{:016x}x", rng.gen::<u64>());
            ensure!(planted.insert(sentinel.clone()), "duplicate sentinel");
            for path in group {
                *value.pointer_mut(path).unwrap() = Value::String(template(&sentinel));
            }
        }
        let mut s: RegistrationSubmission = serde_json::from_value(value).map_err(|e| e.to_string())?;
        s.developer.legal_name = format!("{} {}", random_name(&mut rng), ["Ltd", "LLC", "GmbH"].choose(&mut rng).unwrap());
        s.family_trade_name = format!("{}{i}", random_name(&mut rng));
        s.version_name = format!("{}-{}", random_name(&mut rng).to_lowercase(), rng.gen_range(1..9));
        s.metrics.total_parameters = rng.gen_range(1_000_000..2_000_000_000_000);
        s.metrics.active_parameters_avg = s.metrics.total_parameters / 2;
        s.metrics.training_flop = 10f64.powf(rng.gen_range(20.0..27.0));
        queries.insert(s.family_trade_name[..3].to_lowercase());
        let dev = PrincipalRole::developer(s.developer.business_registration_number.clone());
        let receipt = registry.submit_registration(&dev, s).map_err(|e| format!("record {i}: {e}"))?;
        let to = match rng.gen_range(0..4) {
            0 => None,
            1 => Some(DeploymentStatus::Withdrawn),
            _ => Some(DeploymentStatus::OnMarket),
        };
        if let Some(to) = to {
            registry
                .change_status(&dev, StatusRequest { expected_sequence: None, identifier: receipt.identifier.clone(), to, deployment_date: None })
                .map_err(|e| e.to_string())?;
        }
        ids.push(receipt.identifier);
        if i % 50 == 0 {
            clock.advance_days(3);
        }
    }

    // The detector must see every sentinel in the confidential view.
    let full = serde_json::to_vec(&registry.read_record(&PrincipalRole::GovernmentReader, ids[0].as_str()).unwrap()).unwrap();
    let full_text = String::from_utf8_lossy(&full);
    let visible = planted.iter().filter(|s| full_text.contains(s.as_str())).count();
    ensure!(visible == fields.len() && find_sentinel(&full).is_some(), "only {visible} sentinels visible in the full record");

    let mut served = Vec::new();
    for record in registry.state().records.values() {
        served.extend(serde_json::to_vec(&public_projection(record)).unwrap());
    }
    let app = router(AppState::new(registry, Credentials::default()));
    let runtime = tokio::runtime::Builder::new_current_thread().build().map_err(|e| e.to_string())?;
    let mut requests = 0;
    let mut search_hits = 0;
    runtime.block_on(async {
        let get = |uri: String| {
            let app = app.clone();
            async move {
                let response = app.oneshot(Request::get(uri).body(Body::empty()).unwrap()).await.unwrap();
                let status = response.status();
                (status, response.into_body().collect().await.unwrap().to_bytes().to_vec())
            }
        };
        for id in &ids {
            for uri in [format!("/v1/public/verify/{id}"), format!("/v1/public/badge/{id}")] {
                let (_, body) = get(uri).await;
                served.extend(&body);
                requests += 1;
            }
        }
        for q in &queries {
            for page in 1.. {
                let (status, body) = get(format!("/v1/public/search?q={q}&page={page}")).await;
                requests += 1;
                assert_eq!(status, StatusCode::OK);
                let parsed: Value = serde_json::from_slice(&body).unwrap();
                let results = parsed["results"].as_array().map_or(0, Vec::len);
                search_hits += results;
                served.extend(&body);
                if results == 0 {
                    break;
                }
            }
        }
    });
    // Badge tokens carry their payload base64-encoded; scan it decoded as well.
    let decoded: Vec<u8> = String::from_utf8_lossy(&served)
        .split('"')
        .filter(|s| s.starts_with("mrs1."))
        .filter_map(|t| t.split('.').nth(1))
        .flat_map(|p| URL_SAFE_NO_PAD.decode(p).unwrap_or_default())
        .collect();
    ensure!(!decoded.is_empty(), "no badge payloads were served");
    if let Some(leak) = find_sentinel(&served).or_else(|| find_sentinel(&decoded)) {
        return Err(format!("sentinel {leak} served publicly"));
    }
    ensure!(search_hits >= LEAK_RECORDS, "search surfaced only {search_hits} results");
    Ok(format!(
        "{LEAK_RECORDS} records x {} confidential text fields ({} enum fields skipped), {requests} public requests, {} bytes, 0 leaks",
        fields.iter().map(|(g, _)| g.len()).sum::<usize>(),
        skipped,
        served.len() + decoded.len()
    ))
}
