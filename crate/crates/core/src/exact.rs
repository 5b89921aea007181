//! Exact comparisons over `f64` inputs.
//!
//! Threshold and tolerance boundaries are inclusive and must flip at the exact
//! stated fraction, so sums and scaled products are evaluated over the exact
//! binary rationals the `f64` inputs denote rather than in rounded floating
//! point.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;

/// Exact rational value of a finite `f64`. Non-finite input is a caller bug.
pub fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("exact comparison on a non-finite value")
}

pub fn rational_u64(x: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

/// `a + b >= threshold`, exactly.
pub fn sum_at_least(a: f64, b: f64, threshold: f64) -> bool {
    rational(a) + rational(b) >= rational(threshold)
}

/// `value > (1 + fraction) * base`, exactly.
pub fn exceeds_by(value: &BigRational, base: &BigRational, fraction: f64) -> bool {
    let one = BigRational::from_integer(BigInt::from(1));
    *value > (one + rational(fraction)) * base
}

/// `|reported - assessed| <= allowed * assessed`, exactly.
pub fn within_relative(reported: f64, assessed: f64, allowed: f64) -> bool {
    let a = rational(assessed);
    (rational(reported) - &a).abs() <= rational(allowed) * a
}
