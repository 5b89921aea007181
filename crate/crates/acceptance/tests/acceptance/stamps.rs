use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use registry_core::stamp::{generate_signing_key, verifying_key_to_pem, InvalidReason, TOKEN_PREFIX};
use registry_core::{allocate_identifier, issue_stamp, verify_stamp, DeploymentStatus, SigningKey, StampSubject, StampVerdict};
use serde_json::{json, Value};

use crate::{ensure, Outcome};

const RECORDS: usize = 1_000;
const MUTATED_TOKENS: usize = 100;
const BUDGET: Duration = Duration::from_secs(60);
const BASE64URL: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";

fn random_text(rng: &mut StdRng) -> String {
    let len = rng.gen_range(1..40);
    (0..len)
        .map(|_| if rng.gen_bool(0.8) { rng.gen_range('a'..='z') } else { rng.gen::<char>() })
        .collect()
}

fn random_subject(rng: &mut StdRng) -> StampSubject {
    StampSubject {
        identifier: allocate_identifier(rng.gen_range(2024..2100), rng, |_| false).unwrap(),
        developer_legal_name: random_text(rng),
        family_trade_name: random_text(rng),
        version_name: random_text(rng),
        status: if rng.gen() { DeploymentStatus::OnMarket } else { DeploymentStatus::PreDeployment },
    }
}

/// Replaces the byte at `i` with a different one of the same class, so the
/// mutation reaches the deepest check it can.
fn mutate(token: &str, i: usize, rng: &mut StdRng) -> String {
    let mut bytes = token.as_bytes().to_vec();
    let old = bytes[i];
    let pool: &[u8] = if BASE64URL.contains(&old) { BASE64URL } else { b".!~0aZ" };
    bytes[i] = *pool.iter().filter(|&&b| b != old).copied().collect::<Vec<u8>>().choose(rng).unwrap();
    String::from_utf8(bytes).unwrap()
}

pub fn round_trip_and_tamper() -> Outcome {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(0x57a4);
    let key = generate_signing_key(&mut rng);
    let other = generate_signing_key(&mut rng);
    let mut mutations = 0;
    for n in 0..RECORDS {
        let subject = random_subject(&mut rng);
        let iat = rng.gen_range(1_700_000_000..2_000_000_000);
        let days = rng.gen_range(1..1_000);
        let stamp = issue_stamp(&subject, &key, iat, days).map_err(|e| e.to_string())?;
        let p = &stamp.payload;
        ensure!(
            p.id == subject.identifier
                && p.dev == subject.developer_legal_name
                && p.fam == subject.family_trade_name
                && p.ver == subject.version_name
                && p.status == subject.status.as_str()
                && p.iat == iat
                && p.exp == iat + i64::from(days) * 86_400,
            "payload does not reflect its record: {p:?}"
        );
        let now = rng.gen_range(iat..=p.exp);
        ensure!(
            verify_stamp(&stamp.token, &key.verifying_key(), now) == StampVerdict::Valid(stamp.payload.clone()),
            "round trip failed for record {n}"
        );
        ensure!(
            verify_stamp(&stamp.token, &other.verifying_key(), now) == StampVerdict::Invalid(InvalidReason::BadSignature),
            "token verified under an unrelated key"
        );
        if n < MUTATED_TOKENS {
            for i in 0..stamp.token.len() {
                let tampered = mutate(&stamp.token, i, &mut rng);
                ensure!(
                    matches!(verify_stamp(&tampered, &key.verifying_key(), now), StampVerdict::Invalid(_)),
                    "mutation at byte {i} accepted: {tampered}"
                );
                mutations += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < BUDGET, "took {elapsed:?}, budget {BUDGET:?}");
    Ok(format!(
        "{RECORDS} round trips, {mutations} single-byte mutations rejected, cross-key rejected ({:.1}s < {}s)",
        elapsed.as_secs_f64(),
        BUDGET.as_secs()
    ))
}

pub fn vectors_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("test-vectors").join("stamp_vectors.json")
}

/// The shared verification vectors: a fixed key and one token per verdict.
///
/// `expected_verdict` is the offline verdict. The revoked case carries a
/// genuine, unexpired token whose registration has since been withdrawn, so
/// only a verifier that also consults `/v1/public/verify` reports it revoked.
pub fn vectors() -> Value {
    let key = SigningKey::from_bytes(&[7u8; 32]);
    let subject = |status: DeploymentStatus| StampSubject {
        identifier: registry_core::RegistryIdentifier::from_parts(2025, &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10]).unwrap(),
        developer_legal_name: "Northwind Intelligence Ltd".into(),
        family_trade_name: "Kestrel".into(),
        version_name: "kestrel-1".into(),
        status,
    };
    let iat = 1_750_000_000;
    let stamp = issue_stamp(&subject(DeploymentStatus::OnMarket), &key, iat, 365).unwrap();
    let exp = stamp.payload.exp;
    let token = stamp.token;
    let dot = token.rfind('.').unwrap();
    let mut tampered = token.clone().into_bytes();
    tampered[dot + 5] = if tampered[dot + 5] == b'A' { b'B' } else { b'A' };
    let tampered = String::from_utf8(tampered).unwrap();
    json!({
        "format": TOKEN_PREFIX,
        "verification_key_pem": verifying_key_to_pem(&key.verifying_key()).unwrap(),
        "vectors": [
            {"name": "valid", "token": token, "now": iat + 86_400, "expected_verdict": "Valid",
             "registry_status": "OnMarket", "expected_display": "Valid"},
            {"name": "tampered", "token": tampered, "now": iat + 86_400, "expected_verdict": "Invalid",
             "registry_status": "OnMarket", "expected_display": "Invalid"},
            {"name": "expired", "token": token, "now": exp + 1, "expected_verdict": "Expired",
             "registry_status": "OnMarket", "expected_display": "Expired"},
            {"name": "revoked", "token": token, "now": iat + 86_400, "expected_verdict": "Valid",
             "registry_status": "Withdrawn", "expected_display": "Revoked"},
        ],
    })
}
