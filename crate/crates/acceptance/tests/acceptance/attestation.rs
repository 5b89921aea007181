use chrono::{Datelike, Days, Months, NaiveDate};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use registry_core::attestation_schedule;

use crate::{ensure, Outcome};

const REGISTRATIONS: usize = 50;
/// Window starts checked per registration, one per day.
const STARTS: u64 = 3 * 366;

fn oracle_is_due(d: NaiveDate) -> bool {
    (d.month(), d.day()) == (6, 30) || (d.month(), d.day()) == (12, 31)
}

pub fn density() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0xa7_7e57);
    let first = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
    let span = (NaiveDate::from_ymd_opt(2030, 12, 31).unwrap() - first).num_days() as u64;
    let mut windows = 0u64;
    for _ in 0..REGISTRATIONS {
        let registered = first + Days::new(rng.gen_range(0..=span));
        let grace_end = registered + Days::new(90);
        let horizon = grace_end + Days::new(STARTS) + Months::new(12);
        let schedule = attestation_schedule(registered, horizon);
        ensure!(
            schedule.iter().all(|&d| oracle_is_due(d) && d > grace_end),
            "registered {registered}: schedule {schedule:?} has a non-due or in-grace date"
        );
        for offset in 0..STARTS {
            let start = grace_end + Days::new(offset);
            let end = start + Months::new(12);
            let in_schedule = schedule.iter().filter(|&&d| d > start && d <= end).count();
            let by_hand = start.iter_days().skip(1).take_while(|&d| d <= end).filter(|&d| oracle_is_due(d)).count();
            ensure!(
                in_schedule == 2 && by_hand == 2,
                "registered {registered}, window ({start}, {end}]: schedule has {in_schedule}, calendar has {by_hand}"
            );
            windows += 1;
        }
    }
    Ok(format!("{windows} windows over {REGISTRATIONS} registrations, each with exactly 2 due dates"))
}
