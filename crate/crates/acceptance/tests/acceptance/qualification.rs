use registry_core::qualification::QualificationRule;
use registry_core::schema::{HighRiskBasis, HighRiskDomain};
use registry_core::{default_thresholds, evaluate_qualification, CapabilityMetrics, HighRiskProfile};

use crate::{ensure, Outcome};

const RELATIVE_STEP: f64 = 1e-6;

fn zero_metrics() -> CapabilityMetrics {
    CapabilityMetrics {
        total_parameters: 0,
        active_parameters_avg: 0,
        training_flop: 0.0,
        post_training_flop: 0.0,
        training_tokens: 0,
    }
}

/// Metrics and risk profile putting exactly one rule's input at `value`.
fn probe(rule: QualificationRule, value: f64) -> (CapabilityMetrics, HighRiskProfile) {
    let mut m = zero_metrics();
    let mut risk = HighRiskProfile::none();
    match rule {
        QualificationRule::FlopRule => m.training_flop = value,
        QualificationRule::TokenRule => m.training_tokens = value as u64,
        QualificationRule::ActiveParamRule => {
            m.active_parameters_avg = value as u64;
            m.total_parameters = value as u64;
        }
        QualificationRule::HighRiskFlopRule => {
            m.training_flop = value;
            risk = HighRiskProfile::with(
                HighRiskDomain::ChemicalWeapons,
                HighRiskBasis::DemonstratedCapability,
            );
        }
    }
    (m, risk)
}

/// Each rule at its anchor, just under it, and just over it.
pub fn threshold_boundaries() -> Outcome {
    let anchors = [
        (QualificationRule::FlopRule, 1e26),
        (QualificationRule::TokenRule, 1e14),
        (QualificationRule::ActiveParamRule, 1e12),
        (QualificationRule::HighRiskFlopRule, 1e23),
    ];
    let config = default_thresholds();
    let mut cases = 0;
    for (rule, anchor) in anchors {
        for (factor, fires) in [(1.0, true), (1.0 - RELATIVE_STEP, false), (1.0 + RELATIVE_STEP, true)] {
            let value = anchor * factor;
            let (m, risk) = probe(rule, value);
            let d = evaluate_qualification(&m, &risk, &config);
            ensure!(
                d.triggered_rules.contains(&rule) == fires && d.qualifies == fires,
                "{rule:?} at {value:e}: expected fires={fires}, got {:?}",
                d.triggered_rules
            );
            cases += 1;
        }
    }
    ensure!(cases == 12, "ran {cases} cases");
    Ok(format!("{cases}/12 boundary cases exact"))
}

pub fn exemplars() -> Outcome {
    let config = default_thresholds();

    let mut ultra = zero_metrics();
    ultra.training_flop = 1e25;
    ultra.total_parameters = 500_000_000_000;
    ultra.active_parameters_avg = 500_000_000_000;
    ultra.training_tokens = 10_000_000_000_000;
    let d = evaluate_qualification(&ultra, &HighRiskProfile::none(), &config);
    ensure!(!d.qualifies, "1e25 FLOP model qualified via {:?}", d.triggered_rules);

    let mut moe = zero_metrics();
    moe.total_parameters = 1_600_000_000_000;
    moe.active_parameters_avg = 200_000_000_000;
    let d = evaluate_qualification(&moe, &HighRiskProfile::none(), &config);
    ensure!(
        !d.triggered_rules.contains(&QualificationRule::ActiveParamRule) && !d.qualifies,
        "1.6e12/2e11 mixture-of-experts model qualified via {:?}",
        d.triggered_rules
    );

    let mut bio = zero_metrics();
    bio.training_flop = 1e23;
    let risk = HighRiskProfile::with(
        HighRiskDomain::BiologicalWeaponsOrDesignTools,
        HighRiskBasis::PrimaryTrainingData,
    );
    let d = evaluate_qualification(&bio, &risk, &config);
    ensure!(
        d.qualifies && d.triggered_rules.iter().eq([&QualificationRule::HighRiskFlopRule]),
        "1e23 FLOP biological-data model: {:?}",
        d.triggered_rules
    );
    Ok("3/3 exemplars classified".into())
}
