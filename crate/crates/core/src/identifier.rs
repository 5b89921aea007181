//! Registry identifiers: `MR-<year>-<10 payload chars>-<check char>`.
//!
//! The payload alphabet is base-32 without the easily confused `0 O 1 I`.
//! The check character is the position-weighted sum of payload values modulo
//! 31, written with the first 31 alphabet symbols. Weights 1..=10 are all
//! units modulo the prime 31, so a single substitution goes undetected only
//! when it swaps the two symbols whose values differ by exactly 31 (`2` and
//! `Z`).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ALPHABET: &[u8; 32] = b"23456789ABCDEFGHJKLMNPQRSTUVWXYZ";
pub const PAYLOAD_LEN: usize = 10;
pub const MAX_ALLOCATION_ATTEMPTS: usize = 16;
pub const MIN_YEAR: i32 = 2024;
const PREFIX: &str = "MR-";
const CHECK_MODULUS: u32 = 31;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentifierError {
    #[error("identifier must look like MR-YYYY-XXXXXXXXXX-C")]
    Malformed,
    #[error("identifier contains a character outside the registry alphabet")]
    BadCharacter,
    #[error("identifier check character does not match")]
    BadCheck,
    #[error("year {0} is outside the registry range")]
    BadYear(i32),
    #[error("no fresh identifier after {MAX_ALLOCATION_ATTEMPTS} consecutive collisions")]
    ExhaustedRetries,
}

/// A validated, upper-case registry identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct RegistryIdentifier(String);

fn value_of(c: u8) -> Option<u32> {
    let c = c.to_ascii_uppercase();
    ALPHABET.iter().position(|&a| a == c).map(|p| p as u32)
}

/// Check character for a payload given as alphabet values.
pub fn check_value(payload: &[u32]) -> u32 {
    payload
        .iter()
        .enumerate()
        .map(|(i, v)| (i as u32 + 1) * v)
        .sum::<u32>()
        % CHECK_MODULUS
}

impl RegistryIdentifier {
    /// Builds an identifier from a year and payload values (each `< 32`).
    pub fn from_parts(year: i32, payload: &[u32; PAYLOAD_LEN]) -> Result<Self, IdentifierError> {
        if !(MIN_YEAR..=9999).contains(&year) {
            return Err(IdentifierError::BadYear(year));
        }
        let mut s = format!("{PREFIX}{year:04}-");
        for &v in payload {
            s.push(*ALPHABET.get(v as usize).ok_or(IdentifierError::BadCharacter)? as char);
        }
        s.push('-');
        s.push(ALPHABET[check_value(payload) as usize] as char);
        Ok(Self(s))
    }

    pub fn parse(input: &str) -> Result<Self, IdentifierError> {
        let upper = input.trim().to_ascii_uppercase();
        let bytes = upper.as_bytes();
        // MR- YYYY - payload - check
        if bytes.len() != 3 + 4 + 1 + PAYLOAD_LEN + 1 + 1
            || !upper.starts_with(PREFIX)
            || bytes[7] != b'-'
            || bytes[8 + PAYLOAD_LEN] != b'-'
        {
            return Err(IdentifierError::Malformed);
        }
        let year_str = &upper[3..7];
        if !year_str.bytes().all(|b| b.is_ascii_digit()) {
            return Err(IdentifierError::Malformed);
        }
        let year: i32 = year_str.parse().map_err(|_| IdentifierError::Malformed)?;
        if year < MIN_YEAR {
            return Err(IdentifierError::BadYear(year));
        }
        let payload = bytes[8..8 + PAYLOAD_LEN]
            .iter()
            .map(|&b| value_of(b).ok_or(IdentifierError::BadCharacter))
            .collect::<Result<Vec<_>, _>>()?;
        let check = value_of(bytes[9 + PAYLOAD_LEN]).ok_or(IdentifierError::BadCharacter)?;
        if check != check_value(&payload) {
            return Err(IdentifierError::BadCheck);
        }
        Ok(Self(upper))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn year(&self) -> i32 {
        self.0[3..7].parse().expect("validated year")
    }
}

impl fmt::Display for RegistryIdentifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for RegistryIdentifier {
    type Err = IdentifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl TryFrom<String> for RegistryIdentifier {
    type Error = IdentifierError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::parse(&value)
    }
}

impl From<RegistryIdentifier> for String {
    fn from(id: RegistryIdentifier) -> Self {
        id.0
    }
}

/// Draws fresh identifiers until one is not already taken.
pub fn allocate_identifier<R: Rng + ?Sized>(
    year: i32,
    rng: &mut R,
    mut is_taken: impl FnMut(&RegistryIdentifier) -> bool,
) -> Result<RegistryIdentifier, IdentifierError> {
    if year < MIN_YEAR {
        return Err(IdentifierError::BadYear(year));
    }
    for _ in 0..MAX_ALLOCATION_ATTEMPTS {
        let mut payload = [0u32; PAYLOAD_LEN];
        for v in &mut payload {
            *v = rng.gen_range(0..32);
        }
        let id = RegistryIdentifier::from_parts(year, &payload)?;
        if !is_taken(&id) {
            return Ok(id);
        }
    }
    Err(IdentifierError::ExhaustedRetries)
}
