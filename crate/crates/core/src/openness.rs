//! Openness classification from access disclosures.

use thiserror::Error;

use crate::schema::{AccessDisclosure, OpennessClass};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OpennessError {
    /// Training data or source code is public while weights are not; no rule
    /// covers this, so the registrar must classify by hand.
    #[error("ambiguous openness for {component}: weights withheld but data or source code public")]
    AmbiguousOpenness { component: String },
}

/// Classifies one set of access flags.
pub fn classify_flags(
    weights_public: bool,
    training_data_public: bool,
    source_code_public: bool,
) -> Option<OpennessClass> {
    match (weights_public, source_code_public, training_data_public) {
        (true, true, _) => Some(OpennessClass::OpenSource),
        (true, false, _) => Some(OpennessClass::OpenWeights),
        (false, false, false) => Some(OpennessClass::ClosedSource),
        (false, _, _) => None,
    }
}

/// Classifies the model as the most open of itself and its listed subcomponents.
pub fn classify_openness(access: &AccessDisclosure) -> Result<OpennessClass, OpennessError> {
    let model = classify_flags(
        access.weights_public,
        access.training_data_public,
        access.source_code_public,
    )
    .ok_or_else(|| OpennessError::AmbiguousOpenness {
        component: "model".into(),
    })?;
    access.open_subcomponents.iter().try_fold(model, |best, sub| {
        classify_flags(sub.weights_public, sub.training_data_public, sub.source_code_public)
            .map(|class| best.max(class))
            .ok_or_else(|| OpennessError::AmbiguousOpenness {
                component: sub.name.clone(),
            })
    })
}
