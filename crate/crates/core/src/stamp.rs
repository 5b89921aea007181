//! Signed registration stamps.
//!
//! Token layout: `mrs1.<base64url(payload)>.<base64url(signature)>`, unpadded.
//! The payload is compact JSON with keys in lexicographic order; the signature
//! is Ed25519 over the exact payload bytes. `mrs1` pins the scheme; any other
//! prefix is rejected.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use ed25519_dalek::pkcs8::{DecodePrivateKey, DecodePublicKey, EncodePrivateKey, EncodePublicKey};
use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identifier::RegistryIdentifier;
use crate::schema::DeploymentStatus;

pub const TOKEN_PREFIX: &str = "mrs1";
pub const DEFAULT_VALIDITY_DAYS: u32 = 400;
const SECONDS_PER_DAY: i64 = 86_400;

/// Stamp claims. Field order is lexicographic so serialization is canonical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StampPayload {
    pub dev: String,
    pub exp: i64,
    pub fam: String,
    pub iat: i64,
    pub id: RegistryIdentifier,
    pub status: String,
    pub ver: String,
}

impl StampPayload {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("payload serialization is infallible")
    }
}

/// The registered version a stamp attests to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StampSubject {
    pub identifier: RegistryIdentifier,
    pub developer_legal_name: String,
    pub family_trade_name: String,
    pub version_name: String,
    pub status: DeploymentStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistrationStamp {
    pub token: String,
    pub payload: StampPayload,
}

#[derive(Debug, Error)]
pub enum StampError {
    #[error("registration {0} is no longer active")]
    RevokedRegistration(RegistryIdentifier),
    #[error("validity must be at least one day")]
    InvalidValidity,
    #[error("signing failed: {0}")]
    SigningFailure(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InvalidReason {
    Malformed,
    UnknownVersion,
    BadEncoding,
    BadSignature,
    BadPayload,
}

impl InvalidReason {
    pub fn as_str(self) -> &'static str {
        match self {
            InvalidReason::Malformed => "malformed",
            InvalidReason::UnknownVersion => "unknown version prefix",
            InvalidReason::BadEncoding => "bad base64",
            InvalidReason::BadSignature => "signature mismatch",
            InvalidReason::BadPayload => "bad payload",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "detail")]
pub enum StampVerdict {
    Valid(StampPayload),
    Invalid(InvalidReason),
    Expired(StampPayload),
}

impl StampVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, StampVerdict::Valid(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            StampVerdict::Valid(_) => "Valid",
            StampVerdict::Invalid(_) => "Invalid",
            StampVerdict::Expired(_) => "Expired",
        }
    }
}

/// Signs a stamp for an active registration, valid from `issued_at` for `validity_days`.
pub fn issue_stamp(
    subject: &StampSubject,
    signing_key: &SigningKey,
    issued_at: i64,
    validity_days: u32,
) -> Result<RegistrationStamp, StampError> {
    if !subject.status.is_active() {
        return Err(StampError::RevokedRegistration(subject.identifier.clone()));
    }
    if validity_days == 0 {
        return Err(StampError::InvalidValidity);
    }
    let exp = issued_at
        .checked_add(i64::from(validity_days) * SECONDS_PER_DAY)
        .ok_or_else(|| StampError::SigningFailure("expiry overflows".into()))?;
    let payload = StampPayload {
        dev: subject.developer_legal_name.clone(),
        exp,
        fam: subject.family_trade_name.clone(),
        iat: issued_at,
        id: subject.identifier.clone(),
        status: subject.status.as_str().to_owned(),
        ver: subject.version_name.clone(),
    };
    let bytes = payload.canonical_bytes();
    let signature = signing_key
        .try_sign(&bytes)
        .map_err(|e| StampError::SigningFailure(e.to_string()))?;
    let token = format!(
        "{TOKEN_PREFIX}.{}.{}",
        URL_SAFE_NO_PAD.encode(&bytes),
        URL_SAFE_NO_PAD.encode(signature.to_bytes())
    );
    Ok(RegistrationStamp { token, payload })
}

/// Offline verification. Never fails: every problem is an `Invalid` verdict.
pub fn verify_stamp(token: &str, verification_key: &VerifyingKey, now: i64) -> StampVerdict {
    match decode_verified(token, verification_key) {
        Err(reason) => StampVerdict::Invalid(reason),
        Ok(payload) if now > payload.exp => StampVerdict::Expired(payload),
        Ok(payload) => StampVerdict::Valid(payload),
    }
}

fn decode_verified(token: &str, key: &VerifyingKey) -> Result<StampPayload, InvalidReason> {
    let mut segments = token.split('.');
    let (Some(prefix), Some(body), Some(sig), None) =
        (segments.next(), segments.next(), segments.next(), segments.next())
    else {
        return Err(InvalidReason::Malformed);
    };
    if prefix != TOKEN_PREFIX {
        return Err(InvalidReason::UnknownVersion);
    }
    if body.is_empty() || sig.is_empty() {
        return Err(InvalidReason::Malformed);
    }
    let payload_bytes = URL_SAFE_NO_PAD
        .decode(body)
        .map_err(|_| InvalidReason::BadEncoding)?;
    let sig_bytes = URL_SAFE_NO_PAD
        .decode(sig)
        .map_err(|_| InvalidReason::BadEncoding)?;
    let sig_array: [u8; 64] = sig_bytes
        .as_slice()
        .try_into()
        .map_err(|_| InvalidReason::BadEncoding)?;
    let signature = Signature::from_bytes(&sig_array);
    key.verify_strict(&payload_bytes, &signature)
        .map_err(|_| InvalidReason::BadSignature)?;
    let payload: StampPayload =
        serde_json::from_slice(&payload_bytes).map_err(|_| InvalidReason::BadPayload)?;
    if payload.iat >= payload.exp {
        return Err(InvalidReason::BadPayload);
    }
    Ok(payload)
}

#[derive(Debug, Error)]
pub enum KeyError {
    #[error("invalid key PEM: {0}")]
    Pem(String),
}

pub fn generate_signing_key<R: rand::CryptoRng + rand::RngCore>(rng: &mut R) -> SigningKey {
    SigningKey::generate(rng)
}

/// PKCS#8 PEM encoding of a signing key.
pub fn signing_key_to_pem(key: &SigningKey) -> Result<String, KeyError> {
    key.to_pkcs8_pem(Default::default())
        .map(|pem| pem.to_string())
        .map_err(|e| KeyError::Pem(e.to_string()))
}

pub fn signing_key_from_pem(pem: &str) -> Result<SigningKey, KeyError> {
    SigningKey::from_pkcs8_pem(pem).map_err(|e| KeyError::Pem(e.to_string()))
}

/// SubjectPublicKeyInfo PEM encoding of the verification key.
pub fn verifying_key_to_pem(key: &VerifyingKey) -> Result<String, KeyError> {
    key.to_public_key_pem(Default::default())
        .map_err(|e| KeyError::Pem(e.to_string()))
}

pub fn verifying_key_from_pem(pem: &str) -> Result<VerifyingKey, KeyError> {
    VerifyingKey::from_public_key_pem(pem).map_err(|e| KeyError::Pem(e.to_string()))
}
