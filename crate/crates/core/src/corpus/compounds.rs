//! Noun-noun compound extraction and temporal splitting.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::lemma::lemmatise_head;
use super::ngram::{NgramRecord, Pos};
use crate::decade::{Decade, DecadeLayout, Period};

/// A (modifier, head) pair. The modifier is lowercased, the head is
/// lowercased and lemmatised.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Compound {
    pub modifier: String,
    pub head: String,
}

impl Compound {
    pub fn new(modifier: impl Into<String>, head: impl Into<String>) -> Self {
        Compound {
            modifier: modifier.into(),
            head: head.into(),
        }
    }

    /// Row key for the compound bigram: `"modifier head"`.
    pub fn bigram(&self) -> String {
        format!("{} {}", self.modifier, self.head)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompoundOccurrence {
    pub compound: Compound,
    pub decade: Decade,
    pub count: u64,
}

/// Token positions `(i, i + 1)` of every N-N pair in the record that is not
/// flanked by another noun inside the window and whose tokens are purely
/// alphabetic. Tokens at the window edge have unknown outside neighbours and
/// are treated as flanked by non-nouns.
pub fn compound_positions(record: &NgramRecord) -> Vec<usize> {
    let toks = &record.tokens;
    let is_noun = |i: usize| toks.get(i).is_some_and(|t| t.pos == Pos::Noun);
    (0..toks.len().saturating_sub(1))
        .filter(|&i| {
            is_noun(i)
                && is_noun(i + 1)
                && !(i > 0 && is_noun(i - 1))
                && !is_noun(i + 2)
                && toks[i].is_alphabetic()
                && toks[i + 1].is_alphabetic()
        })
        .collect()
}

/// The compound at position `i` (as returned by [`compound_positions`]).
pub fn compound_at(record: &NgramRecord, i: usize) -> Compound {
    Compound::new(
        record.tokens[i].surface.to_lowercase(),
        lemmatise_head(&record.tokens[i + 1].surface),
    )
}

/// Extracts every isolated N-N compound from a 5-gram. Records whose year
/// falls outside the layout's corpus range produce nothing.
pub fn extract_compounds(record: &NgramRecord, layout: &DecadeLayout) -> Vec<CompoundOccurrence> {
    let Some(decade) = layout.decade_of(record.year) else {
        return Vec::new();
    };
    compound_positions(record)
        .into_iter()
        .map(|i| CompoundOccurrence {
            compound: compound_at(record, i),
            decade,
            count: record.match_count,
        })
        .collect()
}

/// Per-decade counts of every attested compound. Merging is commutative.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompoundCounts {
    counts: BTreeMap<Compound, BTreeMap<Decade, u64>>,
}

impl CompoundCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, occ: &CompoundOccurrence) {
        *self
            .counts
            .entry(occ.compound.clone())
            .or_default()
            .entry(occ.decade)
            .or_insert(0) += occ.count;
    }

    pub fn merge(&mut self, other: CompoundCounts) {
        for (compound, decades) in other.counts {
            let slot = self.counts.entry(compound).or_default();
            for (decade, c) in decades {
                *slot.entry(decade).or_insert(0) += c;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn contains(&self, compound: &Compound) -> bool {
        self.counts.contains_key(compound)
    }

    pub fn decades_of(&self, compound: &Compound) -> Option<&BTreeMap<Decade, u64>> {
        self.counts.get(compound)
    }

    pub fn count(&self, compound: &Compound, decade: Decade) -> u64 {
        self.counts
            .get(compound)
            .and_then(|d| d.get(&decade))
            .copied()
            .unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Compound, &BTreeMap<Decade, u64>)> {
        self.counts.iter()
    }

    /// Flattened occurrences in (compound, decade) order.
    pub fn occurrences(&self) -> impl Iterator<Item = CompoundOccurrence> + '_ {
        self.counts.iter().flat_map(|(c, decades)| {
            decades.iter().map(move |(&decade, &count)| CompoundOccurrence {
                compound: c.clone(),
                decade,
                count,
            })
        })
    }

    /// Every attested compound regardless of decade; the forbidden set for
    /// negative sampling.
    pub fn attested(&self) -> HashSet<Compound> {
        self.counts.keys().cloned().collect()
    }
}

/// Positive compounds for each period of the temporal holdout.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompoundSplits {
    pub train: BTreeSet<Compound>,
    pub validation: BTreeSet<Compound>,
    pub test: BTreeSet<Compound>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitThresholds {
    /// Minimum summed count over the training decades for a training positive.
    pub min_train_count: u64,
    /// Minimum count in the validation decade for a validation positive.
    pub min_validation_count: u64,
    /// Minimum count in the test decade for a novel (test) compound.
    pub min_novel_count: u64,
}

impl Default for SplitThresholds {
    fn default() -> Self {
        SplitThresholds {
            min_train_count: 3,
            min_validation_count: 3,
            min_novel_count: 3,
        }
    }
}

/// Splits compounds by the decade of first attestation.
///
/// `known` holds every lexeme attested before the test decade; compounds
/// with a constituent outside it are dropped. Compounds first attested in a
/// decade outside every period are ignored.
pub fn split_compounds_by_first_attestation(
    counts: &CompoundCounts,
    layout: &DecadeLayout,
    thresholds: &SplitThresholds,
    known: &HashSet<String>,
) -> CompoundSplits {
    let mut splits = CompoundSplits::default();
    for (compound, decades) in counts.iter() {
        if !known.contains(&compound.modifier) || !known.contains(&compound.head) {
            continue;
        }
        let Some((&first, _)) = decades.iter().next() else {
            continue;
        };
        match layout.period(first) {
            Some(Period::Training) => {
                let total: u64 = decades
                    .iter()
                    .filter(|(d, _)| layout.is_training(**d))
                    .map(|(_, c)| *c)
                    .sum();
                if total >= thresholds.min_train_count {
                    splits.train.insert(compound.clone());
                }
            }
            Some(Period::Validation) => {
                if decades[&first] >= thresholds.min_validation_count {
                    splits.validation.insert(compound.clone());
                }
            }
            Some(Period::Test) => {
                if decades[&first] >= thresholds.min_novel_count {
                    splits.test.insert(compound.clone());
                }
            }
            None => {}
        }
    }
    splits
}

/// Lexemes (lowercased, plus the noun lemma of noun tokens) seen in any
/// decade before the test decade.
#[derive(Debug, Clone, Default)]
pub struct KnownLexemes {
    seen: HashSet<String>,
}

impl KnownLexemes {
    pub fn observe(&mut self, record: &NgramRecord, layout: &DecadeLayout) {
        match layout.decade_of(record.year) {
            Some(d) if d < layout.test() => {}
            _ => return,
        }
        for tok in &record.tokens {
            if !tok.is_alphabetic() {
                continue;
            }
            let lower = tok.surface.to_lowercase();
            if tok.pos == Pos::Noun {
                let lemma = lemmatise_head(&lower);
                if lemma != lower {
                    self.seen.insert(lemma);
                }
            }
            self.seen.insert(lower);
        }
    }

    pub fn merge(&mut self, other: KnownLexemes) {
        self.seen.extend(other.seen);
    }

    pub fn into_set(self) -> HashSet<String> {
        self.seen
    }

    pub fn as_set(&self) -> &HashSet<String> {
        &self.seen
    }
}

/// Distinct modifiers and heads of a compound set together with their
/// summed counts, used as replacement pools for negative sampling and as the
/// constituent inventory for candidate generation.
pub fn constituent_frequencies(
    compounds: &BTreeSet<Compound>,
    counts: &CompoundCounts,
    layout: &DecadeLayout,
) -> (BTreeMap<String, u64>, BTreeMap<String, u64>) {
    let mut modifiers = BTreeMap::new();
    let mut heads = BTreeMap::new();
    for c in compounds {
        let total: u64 = counts
            .decades_of(c)
            .map(|d| {
                d.iter()
                    .filter(|(dec, _)| layout.is_training(**dec))
                    .map(|(_, n)| *n)
                    .sum()
            })
            .unwrap_or(0);
        *modifiers.entry(c.modifier.clone()).or_insert(0) += total;
        *heads.entry(c.head.clone()).or_insert(0) += total;
    }
    (modifiers, heads)
}

/// First-attestation decade of every compound.
pub fn first_attestation(counts: &CompoundCounts) -> HashMap<Compound, Decade> {
    counts
        .iter()
        .filter_map(|(c, d)| d.keys().next().map(|&first| (c.clone(), first)))
        .collect()
}
