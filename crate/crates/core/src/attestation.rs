//! Semiannual attestation schedule.
//!
//! Due dates are fixed calendar semester ends (June 30, December 31). A due
//! date within 90 days of initial registration is skipped.

use std::collections::BTreeSet;

use chrono::{Datelike, Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::family::ModelFamily;
use crate::identifier::RegistryIdentifier;

pub const GRACE_DAYS: u64 = 90;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttestationOutcome {
    ConfirmedAccurate,
    Updated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttestationRecord {
    pub family_id: RegistryIdentifier,
    pub due_date: NaiveDate,
    pub completed_date: Option<NaiveDate>,
    pub attested_by: String,
    pub outcome: AttestationOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverdueAttestation {
    pub family_id: RegistryIdentifier,
    pub due_date: NaiveDate,
    pub days_overdue: i64,
}

fn semester_ends(year: i32) -> [NaiveDate; 2] {
    [
        NaiveDate::from_ymd_opt(year, 6, 30).expect("valid date"),
        NaiveDate::from_ymd_opt(year, 12, 31).expect("valid date"),
    ]
}

/// Whether `date` is a semester end.
pub fn is_due_date(date: NaiveDate) -> bool {
    semester_ends(date.year()).contains(&date)
}

/// First day of the semester that ends on `due_date`.
pub fn window_opening(due_date: NaiveDate) -> NaiveDate {
    let month = if due_date.month() <= 6 { 1 } else { 7 };
    NaiveDate::from_ymd_opt(due_date.year(), month, 1).expect("valid date")
}

/// Due dates in `(registered_at + 90 days, horizon_end]`, ascending.
pub fn attestation_schedule(registered_at: NaiveDate, horizon_end: NaiveDate) -> Vec<NaiveDate> {
    let Some(start) = registered_at.checked_add_days(Days::new(GRACE_DAYS)) else {
        return vec![];
    };
    if start >= horizon_end {
        return vec![];
    }
    (start.year()..=horizon_end.year())
        .flat_map(semester_ends)
        .filter(|&d| d > start && d <= horizon_end)
        .collect()
}

impl AttestationRecord {
    /// Completion must fall on or after the opening of the due date's semester.
    pub fn is_well_formed(&self) -> bool {
        self.completed_date
            .is_none_or(|c| c >= window_opening(self.due_date))
    }
}

/// Due dates on or before `as_of` without a completed attestation, most overdue first.
pub fn detect_overdue<'a>(
    families: impl IntoIterator<Item = &'a ModelFamily>,
    attestations: &[AttestationRecord],
    as_of: NaiveDate,
) -> Vec<OverdueAttestation> {
    let completed: BTreeSet<(&RegistryIdentifier, NaiveDate)> = attestations
        .iter()
        .filter(|a| a.completed_date.is_some())
        .map(|a| (&a.family_id, a.due_date))
        .collect();
    let mut overdue: Vec<OverdueAttestation> = families
        .into_iter()
        .flat_map(|family| {
            attestation_schedule(family.registered_at, as_of)
                .into_iter()
                .filter(|due| !completed.contains(&(&family.family_id, *due)))
                .map(|due| OverdueAttestation {
                    family_id: family.family_id.clone(),
                    due_date: due,
                    days_overdue: (as_of - due).num_days(),
                })
                .collect::<Vec<_>>()
        })
        .collect();
    overdue.sort_by(|a, b| {
        b.days_overdue
            .cmp(&a.days_overdue)
            .then_with(|| a.family_id.cmp(&b.family_id))
    });
    overdue
}
