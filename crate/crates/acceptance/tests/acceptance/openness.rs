use registry_core::openness::classify_flags;
use registry_core::schema::AccessDisclosure;
use registry_core::{classify_openness, OpennessClass};

use crate::{ensure, Outcome};

/// The three published rules, written out independently. `None` means no
/// rule covers the combination.
fn oracle(weights: bool, data: bool, source: bool) -> Option<OpennessClass> {
    if !weights && !source && !data {
        Some(OpennessClass::ClosedSource)
    } else if weights && !source {
        Some(OpennessClass::OpenWeights)
    } else if weights && source {
        Some(OpennessClass::OpenSource)
    } else {
        None
    }
}

pub fn truth_table() -> Outcome {
    let mut ambiguous = 0;
    for bits in 0u8..8 {
        let (w, d, s) = (bits & 1 != 0, bits & 2 != 0, bits & 4 != 0);
        let access = AccessDisclosure {
            license_summary: "test".into(),
            weights_public: w,
            training_data_public: d,
            source_code_public: s,
            open_subcomponents: vec![],
        };
        let expected = oracle(w, d, s);
        let got = classify_openness(&access).ok();
        ensure!(
            got == expected && classify_flags(w, d, s) == expected,
            "weights={w} data={d} source={s}: expected {expected:?}, got {got:?}"
        );
        ambiguous += usize::from(expected.is_none());
    }
    // Weights withheld with data and/or source public leaves three rows
    // uncovered, not two.
    ensure!(ambiguous == 3, "{ambiguous} ambiguous rows");
    Ok("8/8 rows match, 3 AmbiguousOpenness".into())
}
