//! Reported-value accuracy checks against an independent assessment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ToleranceMetric {
    TotalParameters,
    TrainingTokens,
    TrainingFlop,
}

impl ToleranceMetric {
    pub const ALL: [ToleranceMetric; 3] = [
        ToleranceMetric::TotalParameters,
        ToleranceMetric::TrainingTokens,
        ToleranceMetric::TrainingFlop,
    ];

    /// Largest accepted relative error.
    pub fn allowed(self) -> f64 {
        match self {
            ToleranceMetric::TotalParameters => 0.10,
            ToleranceMetric::TrainingTokens => 0.05,
            ToleranceMetric::TrainingFlop => 0.10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceVerdict {
    pub metric: ToleranceMetric,
    pub reported: f64,
    pub assessed: f64,
    /// `|reported - assessed| / assessed`, rounded to `f64`.
    pub relative_error: f64,
    pub allowed: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ToleranceError {
    #[error("assessed value must be finite and positive, got {0}")]
    InvalidAssessment(f64),
    #[error("reported value must be finite and non-negative, got {0}")]
    InvalidReport(f64),
}

/// Compares a developer-reported value with the assessor's value.
///
/// The pass decision is exact: a relative error of precisely the allowed
/// fraction passes, one unit more fails, regardless of `f64` rounding in the
/// reported `relative_error`.
pub fn check_reported_tolerance(
    metric: ToleranceMetric,
    reported: f64,
    assessed: f64,
) -> Result<ToleranceVerdict, ToleranceError> {
    if !assessed.is_finite() || assessed <= 0.0 {
        return Err(ToleranceError::InvalidAssessment(assessed));
    }
    if !reported.is_finite() || reported < 0.0 {
        return Err(ToleranceError::InvalidReport(reported));
    }
    let allowed = metric.allowed();
    Ok(ToleranceVerdict {
        metric,
        reported,
        assessed,
        relative_error: (reported - assessed).abs() / assessed,
        allowed,
        pass: exact::within_relative(reported, assessed, allowed),
    })
}
