//! Mandatory-registration qualification.
//!
//! A model must register when any one of four inclusion rules fires. All
//! comparisons are inclusive, and training compute counts post-training work.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact;
use crate::schema::{CapabilityMetrics, HighRiskProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    /// Training compute bar, FLOP.
    pub flop_threshold: f64,
    pub token_threshold: f64,
    pub active_param_threshold: f64,
    /// Lowered compute bar for models touching a high-risk domain, FLOP.
    pub high_risk_flop_threshold: f64,
    pub effective_date: NaiveDate,
    pub config_version: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThresholdConfigError {
    #[error("threshold {0} must be finite and positive")]
    NonPositive(&'static str),
    #[error("high_risk_flop_threshold must not exceed flop_threshold")]
    HighRiskAboveGeneral,
    #[error("config_version must be non-empty")]
    MissingVersion,
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<(), ThresholdConfigError> {
        for (name, value) in [
            ("flop_threshold", self.flop_threshold),
            ("token_threshold", self.token_threshold),
            ("active_param_threshold", self.active_param_threshold),
            ("high_risk_flop_threshold", self.high_risk_flop_threshold),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(ThresholdConfigError::NonPositive(name));
            }
        }
        if self.high_risk_flop_threshold > self.flop_threshold {
            return Err(ThresholdConfigError::HighRiskAboveGeneral);
        }
        if self.config_version.trim().is_empty() {
            return Err(ThresholdConfigError::MissingVersion);
        }
        Ok(())
    }
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        default_thresholds()
    }
}

/// The published inclusion thresholds.
pub fn default_thresholds() -> ThresholdConfig {
    ThresholdConfig {
        flop_threshold: 1e26,
        token_threshold: 1e14,
        active_param_threshold: 1e12,
        high_risk_flop_threshold: 1e23,
        effective_date: NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date"),
        config_version: "baseline-2024".into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QualificationRule {
    FlopRule,
    TokenRule,
    ActiveParamRule,
    HighRiskFlopRule,
}

impl QualificationRule {
    pub const ALL: [QualificationRule; 4] = [
        QualificationRule::FlopRule,
        QualificationRule::TokenRule,
        QualificationRule::ActiveParamRule,
        QualificationRule::HighRiskFlopRule,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualificationInputs {
    pub metrics: CapabilityMetrics,
    pub risk: HighRiskProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualificationDecision {
    pub qualifies: bool,
    pub triggered_rules: BTreeSet<QualificationRule>,
    pub inputs_echo: QualificationInputs,
    pub config_version: String,
}

/// Evaluates a single rule in isolation.
pub fn rule_fires(
    rule: QualificationRule,
    metrics: &CapabilityMetrics,
    risk: &HighRiskProfile,
    config: &ThresholdConfig,
) -> bool {
    let compute_at_least =
        |threshold| exact::sum_at_least(metrics.training_flop, metrics.post_training_flop, threshold);
    match rule {
        QualificationRule::FlopRule => compute_at_least(config.flop_threshold),
        QualificationRule::TokenRule => {
            exact::rational_u64(metrics.training_tokens) >= exact::rational(config.token_threshold)
        }
        QualificationRule::ActiveParamRule => {
            exact::rational_u64(metrics.active_parameters_avg)
                >= exact::rational(config.active_param_threshold)
        }
        QualificationRule::HighRiskFlopRule => {
            !risk.domains.is_empty() && compute_at_least(config.high_risk_flop_threshold)
        }
    }
}

pub fn evaluate_qualification(
    metrics: &CapabilityMetrics,
    risk: &HighRiskProfile,
    config: &ThresholdConfig,
) -> QualificationDecision {
    let triggered_rules: BTreeSet<_> = QualificationRule::ALL
        .into_iter()
        .filter(|&rule| rule_fires(rule, metrics, risk, config))
        .collect();
    QualificationDecision {
        qualifies: !triggered_rules.is_empty(),
        triggered_rules,
        inputs_echo: QualificationInputs {
            metrics: *metrics,
            risk: risk.clone(),
        },
        config_version: config.config_version.clone(),
    }
}
