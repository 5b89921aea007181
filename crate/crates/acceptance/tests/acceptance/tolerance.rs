use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use registry_core::{check_reported_tolerance, ToleranceMetric};

use crate::{ensure, Outcome};

/// Allowed error in percent, per metric.
fn percent(metric: ToleranceMetric) -> u128 {
    match metric {
        ToleranceMetric::TotalParameters => 10,
        ToleranceMetric::TrainingTokens => 5,
        ToleranceMetric::TrainingFlop => 10,
    }
}

/// Integer oracle: `|r - a| * 100 <= pct * a`. Inputs are integral f64s.
fn oracle(reported: f64, assessed: f64, pct: u128) -> bool {
    let (r, a) = (reported as u128, assessed as u128);
    r.abs_diff(a) * 100 <= pct * a
}

/// The next integral f64 above (`+1`) or below (`-1`) an integral `x`.
fn adjacent_integer(x: f64, direction: f64) -> f64 {
    let next = if direction > 0.0 { x.next_up() } else { x.next_down() };
    if next.fract() == 0.0 {
        next
    } else {
        x + direction
    }
}

fn pass(metric: ToleranceMetric, reported: f64, assessed: f64) -> bool {
    check_reported_tolerance(metric, reported, assessed).unwrap().pass
}

pub fn flip_points() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x70_1e);
    let mut checks = 0;
    for metric in ToleranceMetric::ALL {
        let pct = percent(metric);
        ensure!(
            (metric.allowed() * 100.0).round() as u128 == pct,
            "{metric:?} allows {}",
            metric.allowed()
        );
        // The fixed anchor plus random assessments, all chosen so both
        // boundaries are representable: a = 100 * j * 2^e.
        let mut points = vec![(1u64 << 30, 0u32)];
        for _ in 0..200 {
            let e = if metric == ToleranceMetric::TrainingFlop { rng.gen_range(0..=40) } else { rng.gen_range(0..=8) };
            points.push((rng.gen_range(1..1u64 << 32), e));
        }
        for (j, e) in points {
            let unit = (j as f64) * 2f64.powi(e as i32);
            let assessed = 100.0 * unit;
            let upper = (100 + pct) as f64 * unit;
            let lower = (100 - pct) as f64 * unit;
            for (reported, expected) in [
                (upper, true),
                (adjacent_integer(upper, 1.0), false),
                (lower, true),
                (adjacent_integer(lower, -1.0), false),
                (assessed, true),
            ] {
                ensure!(oracle(reported, assessed, pct) == expected, "oracle disagrees at {reported:e}/{assessed:e}");
                ensure!(
                    pass(metric, reported, assessed) == expected,
                    "{metric:?}: reported {reported:e} vs assessed {assessed:e} expected pass={expected}"
                );
                checks += 1;
            }
        }
    }
    Ok(format!("{checks} boundary checks flip at 10%/5%/10% inclusive"))
}
