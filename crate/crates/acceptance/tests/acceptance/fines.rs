use chrono::NaiveDate;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use registry_core::compliance::{amount_from_trace, FineBasis, ViolationKind, ViolationSubject};
use registry_core::{assess_fine, FinePolicy, RegistryIdentifier, Severity, Violation};

use crate::{ensure, Outcome};

const SAMPLES: usize = 10_000;

fn violation(severity: Severity) -> Violation {
    Violation {
        violation_id: RegistryIdentifier::from_parts(2025, &[4; 10]).unwrap(),
        subject: ViolationSubject::Developer,
        subject_ref: "BRN-1".into(),
        kind: ViolationKind::OverdueAttestation,
        severity,
        opened_date: NaiveDate::from_ymd_opt(2025, 7, 1).unwrap(),
        resolved_date: None,
    }
}

fn fine(severity: Severity, turnover: f64, days: u32, priors: u32) -> f64 {
    assess_fine(&violation(severity), turnover, days, priors, &FinePolicy::default())
        .unwrap()
        .amount
}

fn worked_examples() -> Result<(), String> {
    let cases = [
        (Severity::Egregious, 1e9, 0, 0, FineBasis::TurnoverPercentage, 4e7),
        (Severity::Minor, 0.0, 30, 0, FineBasis::DailyFixed, 300_000.0),
        (Severity::Major, 1e9, 0, 3, FineBasis::TurnoverPercentage, 4e7),
        (Severity::Minor, 0.0, 0, 0, FineBasis::DailyFixed, 0.0),
    ];
    for (severity, turnover, days, priors, basis, amount) in cases {
        let a = assess_fine(&violation(severity), turnover, days, priors, &FinePolicy::default()).unwrap();
        ensure!(
            a.basis == basis && a.amount == amount,
            "{severity:?} turnover={turnover} days={days} priors={priors}: got {:?} {}",
            a.basis,
            a.amount
        );
    }
    Ok(())
}

pub fn properties() -> Outcome {
    worked_examples()?;
    let policy = FinePolicy::default();
    let mut rng = StdRng::seed_from_u64(0xf1_4e);
    for _ in 0..SAMPLES {
        let rank = rng.gen_range(0..3);
        let severity = Severity::ALL[rank];
        let turnover = if rng.gen_bool(0.2) { 0.0 } else { 10f64.powf(rng.gen_range(0.0..13.0)) };
        let days = rng.gen_range(0..2_000);
        let priors = rng.gen_range(0..12);
        let base = fine(severity, turnover, days, priors);

        if rank < 2 {
            ensure!(fine(Severity::ALL[rank + 1], turnover, days, priors) >= base, "severity not monotone at {turnover} {days} {priors}");
        }
        ensure!(fine(severity, turnover, days + rng.gen_range(1..500), priors) >= base, "days not monotone");
        ensure!(fine(severity, turnover, days, priors + 1) >= base, "priors not monotone");
        // A zero turnover selects the daily basis, so turnover is compared
        // within the percentage basis.
        if turnover > 0.0 {
            let higher = turnover * rng.gen_range(1.0..10.0);
            ensure!(fine(severity, higher, days, priors) >= base, "turnover not monotone at {turnover}");
            let cap = policy.turnover_cap_fraction * turnover;
            ensure!(base <= cap, "fine {base} exceeds cap {cap}");
            // Same bound against the decimal 4%, allowing one rounding of the product.
            ensure!(base <= turnover * 0.04 * (1.0 + f64::EPSILON), "fine {base} above 4% of {turnover}");
        }
        let a = assess_fine(&violation(severity), turnover, days, priors, &policy).unwrap();
        ensure!(amount_from_trace(&a.computation_trace) == Some(a.amount), "trace does not reproduce {}", a.amount);
    }
    Ok(format!("{SAMPLES} samples monotone and capped, worked examples exact"))
}
