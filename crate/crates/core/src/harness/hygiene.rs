use serde::{Deserialize, Serialize};

use super::data::{Artifacts, AspectPair};
use super::HarnessError;
use crate::decade::Period;
use crate::vectors::{Role, Slice, TargetKey};

/// What the hygiene check inspected for one aspect pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HygieneReport {
    pub context: String,
    pub time: String,
    pub slices: Vec<String>,
    pub matrix_rows: usize,
    pub held_out_compounds: usize,
}

/// Verifies that nothing from the validation or test decades leaked into
/// the matrices, embeddings or training positives of an aspect pair.
pub fn check_temporal_hygiene(artifacts: &Artifacts, aspects: AspectPair) -> Result<HygieneReport, HarnessError> {
    let layout = &artifacts.layout;
    let set = artifacts.matrices(aspects)?;
    let store = artifacts.store(aspects)?;
    let allowed = |s: Slice| match s {
        Slice::All => true,
        Slice::Decade(d) => layout.is_training(d),
    };
    for m in &set.matrices {
        if !allowed(m.slice) {
            return Err(HarnessError::Hygiene(format!("matrix slice {} is outside the training decades", m.slice)));
        }
    }
    for t in store.tables() {
        if !allowed(t.slice) {
            return Err(HarnessError::Hygiene(format!("embedding slice {} is outside the training decades", t.slice)));
        }
    }
    let splits = &artifacts.index.splits;
    let counts = &artifacts.index.counts;
    for c in &splits.train {
        let first = counts.decades_of(c).and_then(|d| d.keys().next().copied());
        if first.and_then(|d| layout.period(d)) != Some(Period::Training) {
            return Err(HarnessError::Hygiene(format!("training compound {} first attested outside training", c.bigram())));
        }
    }
    for (name, set_, period) in [
        ("validation", &splits.validation, Period::Validation),
        ("test", &splits.test, Period::Test),
    ] {
        for c in set_ {
            let decades = counts.decades_of(c).ok_or_else(|| {
                HarnessError::Hygiene(format!("{name} compound {} has no counts", c.bigram()))
            })?;
            if decades.keys().next().and_then(|&d| layout.period(d)) != Some(period) {
                return Err(HarnessError::Hygiene(format!(
                    "{name} compound {} attested before its period",
                    c.bigram()
                )));
            }
        }
    }
    let mut held_out = 0;
    for c in splits.validation.iter().chain(&splits.test) {
        held_out += 1;
        let key = TargetKey::new(c.bigram(), Role::CompoundBigram);
        if set.matrices.iter().any(|m| m.row_of(&key).is_some()) {
            return Err(HarnessError::Hygiene(format!("held-out compound {} has a matrix row", c.bigram())));
        }
    }
    Ok(HygieneReport {
        context: aspects.0.label().to_string(),
        time: aspects.1.label().to_string(),
        slices: set.matrices.iter().map(|m| m.slice.to_string()).collect(),
        matrix_rows: set.matrices.iter().map(|m| m.n_rows()).sum(),
        held_out_compounds: held_out,
    })
}
