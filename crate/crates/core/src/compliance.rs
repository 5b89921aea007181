//! Violations, graduated fines and the third-party verification ledger.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identifier::RegistryIdentifier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationSubject {
    Developer,
    ThirdPartyUser,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViolationKind {
    UnregisteredQualifyingModel,
    OverdueAttestation,
    InaccurateReport,
    UnverifiedThirdPartyUse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    Minor,
    Major,
    Egregious,
}

impl Severity {
    pub const ALL: [Severity; 3] = [Severity::Minor, Severity::Major, Severity::Egregious];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub violation_id: RegistryIdentifier,
    pub subject: ViolationSubject,
    pub subject_ref: String,
    pub kind: ViolationKind,
    pub severity: Severity,
    pub opened_date: NaiveDate,
    pub resolved_date: Option<NaiveDate>,
}

impl Violation {
    pub fn is_well_formed(&self) -> bool {
        self.resolved_date.is_none_or(|r| r >= self.opened_date)
    }
}

/// Severity for the next violation given the subject's prior ones of the same kind.
pub fn escalate_severity(history: &[Violation]) -> Severity {
    match history.len() {
        0 => Severity::Minor,
        1 | 2 => Severity::Major,
        _ => Severity::Egregious,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinePolicy {
    pub turnover_fraction_by_severity: BTreeMap<Severity, f64>,
    /// Currency units per unresolved day.
    pub daily_fixed_fine: f64,
    pub turnover_cap_fraction: f64,
    /// Factor applied once per prior violation of the same kind.
    pub repeat_multiplier: f64,
    /// When third-party obligations phase in; informational.
    #[serde(default)]
    pub effective_date: Option<NaiveDate>,
}

impl Default for FinePolicy {
    fn default() -> Self {
        Self {
            turnover_fraction_by_severity: [
                (Severity::Minor, 0.005),
                (Severity::Major, 0.02),
                (Severity::Egregious, 0.04),
            ]
            .into(),
            daily_fixed_fine: 10_000.0,
            turnover_cap_fraction: 0.04,
            repeat_multiplier: 1.5,
            effective_date: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FinePolicyError {
    #[error("no turnover fraction configured for {0:?}")]
    MissingSeverity(Severity),
    #[error("{0} must lie in (0, 1]")]
    Fraction(String),
    #[error("fraction for {0:?} exceeds the turnover cap")]
    AboveCap(Severity),
    #[error("repeat_multiplier must be finite and at least 1")]
    Multiplier,
    #[error("daily_fixed_fine must be finite and non-negative")]
    DailyFine,
}

impl FinePolicy {
    pub fn validate(&self) -> Result<(), FinePolicyError> {
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        if !unit(self.turnover_cap_fraction) {
            return Err(FinePolicyError::Fraction("turnover_cap_fraction".into()));
        }
        for severity in Severity::ALL {
            let f = *self
                .turnover_fraction_by_severity
                .get(&severity)
                .ok_or(FinePolicyError::MissingSeverity(severity))?;
            if !unit(f) {
                return Err(FinePolicyError::Fraction(format!("{severity:?} fraction")));
            }
            if f > self.turnover_cap_fraction {
                return Err(FinePolicyError::AboveCap(severity));
            }
        }
        if !(self.repeat_multiplier.is_finite() && self.repeat_multiplier >= 1.0) {
            return Err(FinePolicyError::Multiplier);
        }
        if !(self.daily_fixed_fine.is_finite() && self.daily_fixed_fine >= 0.0) {
            return Err(FinePolicyError::DailyFine);
        }
        Ok(())
    }

    fn fraction(&self, severity: Severity) -> f64 {
        self.turnover_fraction_by_severity
            .get(&severity)
            .copied()
            .unwrap_or(self.turnover_cap_fraction)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FineBasis {
    TurnoverPercentage,
    DailyFixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineAssessment {
    pub violation_ref: RegistryIdentifier,
    pub basis: FineBasis,
    pub amount: f64,
    /// Space-separated `key=value` factors; every number round-trips exactly.
    pub computation_trace: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FineError {
    #[error("annual turnover must be finite and non-negative, got {0}")]
    InvalidTurnover(f64),
}

/// `multiplier^priors` by repeated multiplication, so the factor never
/// decreases as priors grow.
fn repeat_factor(multiplier: f64, priors: u32) -> f64 {
    (0..priors).fold(1.0, |acc, _| acc * multiplier)
}

/// Proposes a fine for a violation.
///
/// With a positive turnover the fine is a severity-dependent share of it,
/// escalated per prior violation of the same kind and capped. Without a known
/// turnover a fixed fine accrues per unresolved day.
pub fn assess_fine(
    violation: &Violation,
    annual_turnover: f64,
    days_unresolved: u32,
    prior_same_kind: u32,
    policy: &FinePolicy,
) -> Result<FineAssessment, FineError> {
    if !annual_turnover.is_finite() || annual_turnover < 0.0 {
        return Err(FineError::InvalidTurnover(annual_turnover));
    }
    let mut trace = String::new();
    let (basis, amount) = if annual_turnover > 0.0 {
        let fraction = policy.fraction(violation.severity);
        let factor = repeat_factor(policy.repeat_multiplier, prior_same_kind);
        let uncapped = fraction * factor * annual_turnover;
        let cap = policy.turnover_cap_fraction * annual_turnover;
        let amount = uncapped.min(cap);
        let _ = write!(
            trace,
            "basis=TurnoverPercentage severity={:?} fraction={fraction} multiplier={} priors={prior_same_kind} \
             factor={factor} turnover={annual_turnover} uncapped={uncapped} cap_fraction={} cap={cap} amount={amount}",
            violation.severity, policy.repeat_multiplier, policy.turnover_cap_fraction,
        );
        (FineBasis::TurnoverPercentage, amount)
    } else {
        let amount = policy.daily_fixed_fine * f64::from(days_unresolved);
        let _ = write!(
            trace,
            "basis=DailyFixed severity={:?} daily_fine={} days={days_unresolved} amount={amount}",
            violation.severity, policy.daily_fixed_fine,
        );
        (FineBasis::DailyFixed, amount)
    };
    Ok(FineAssessment {
        violation_ref: violation.violation_id.clone(),
        basis,
        amount,
        computation_trace: trace,
    })
}

/// Parses a computation trace back into its factors.
pub fn parse_trace(trace: &str) -> BTreeMap<String, String> {
    trace
        .split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.to_owned(), v.to_owned()))
        .collect()
}

/// Recomputes the amount from a trace alone.
pub fn amount_from_trace(trace: &str) -> Option<f64> {
    let f = parse_trace(trace);
    let num = |k: &str| f.get(k)?.parse::<f64>().ok();
    match f.get("basis")?.as_str() {
        "TurnoverPercentage" => {
            let priors: u32 = f.get("priors")?.parse().ok()?;
            let factor = repeat_factor(num("multiplier")?, priors);
            let turnover = num("turnover")?;
            let uncapped = num("fraction")? * factor * turnover;
            Some(uncapped.min(num("cap_fraction")? * turnover))
        }
        "DailyFixed" => Some(num("daily_fine")? * f64::from(f.get("days")?.parse::<u32>().ok()?)),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LookupResult {
    Registered,
    NotFound,
    NotRequired,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThirdPartyCheck {
    pub user_ref: String,
    pub claimed_model: String,
    #[serde(default)]
    pub identifier_presented: Option<RegistryIdentifier>,
    pub lookup_result: LookupResult,
    /// Statement that the model does not meet any inclusion criterion.
    #[serde(default)]
    pub non_qualification_declaration: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub sequence: u64,
    pub timestamp: i64,
    #[serde(flatten)]
    pub check: ThirdPartyCheck,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("{0} must be non-empty")]
    MissingField(&'static str),
    #[error("NotRequired needs a declaration that the model does not qualify")]
    MissingNonQualificationDeclaration,
}

/// Append-only record of third-party verification checks.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThirdPartyLedger {
    entries: Vec<LedgerEntry>,
}

/// Validates a check before it is appended.
pub fn validate_third_party_check(check: &ThirdPartyCheck) -> Result<(), LedgerError> {
    if check.user_ref.trim().is_empty() {
        return Err(LedgerError::MissingField("user_ref"));
    }
    if check.claimed_model.trim().is_empty() {
        return Err(LedgerError::MissingField("claimed_model"));
    }
    if check.lookup_result == LookupResult::NotRequired
        && check
            .non_qualification_declaration
            .as_deref()
            .is_none_or(|d| d.trim().is_empty())
    {
        return Err(LedgerError::MissingNonQualificationDeclaration);
    }
    Ok(())
}

impl ThirdPartyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends a validated check with the next ledger sequence number.
    pub fn record_third_party_check(
        &mut self,
        check: ThirdPartyCheck,
        timestamp: i64,
    ) -> Result<&LedgerEntry, LedgerError> {
        validate_third_party_check(&check)?;
        let sequence = self.entries.len() as u64 + 1;
        self.entries.push(LedgerEntry {
            sequence,
            timestamp,
            check,
        });
        Ok(self.entries.last().expect("just pushed"))
    }

    /// One JSON object per line.
    pub fn to_json_lines(&self) -> String {
        self.entries
            .iter()
            .map(|e| serde_json::to_string(e).expect("ledger entry serialization") + "\n")
            .collect()
    }
}
