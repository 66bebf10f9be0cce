//! Context vocabulary: the most frequent content words.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ngram::{NgramRecord, Pos};
use crate::decade::DecadeLayout;

pub const DEFAULT_VOCAB_CAP: usize = 50_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub lexeme: String,
    pub pos: Pos,
    pub total_count: u64,
}

/// Ranked context words with a lexeme -> column index.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextVocabulary {
    entries: Vec<VocabEntry>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl ContextVocabulary {
    pub fn from_entries(entries: Vec<VocabEntry>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.lexeme.clone(), i))
            .collect();
        ContextVocabulary { entries, index }
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Column of a lowercased lexeme.
    pub fn column(&self, lexeme: &str) -> Option<usize> {
        self.index.get(lexeme).copied()
    }

    /// Column of a raw surface form (lowercased before lookup).
    pub fn column_of_surface(&self, surface: &str) -> Option<usize> {
        if surface.chars().any(char::is_uppercase) {
            self.column(&surface.to_lowercase())
        } else {
            self.column(surface)
        }
    }

    pub fn lexeme(&self, column: usize) -> &str {
        &self.entries[column].lexeme
    }

    /// Rebuilds the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.lexeme.clone(), i))
            .collect();
    }
}

/// Accumulates unigram counts of content words over the training decades.
/// Shards can be merged in any order.
#[derive(Debug, Clone)]
pub struct VocabularyBuilder {
    layout: DecadeLayout,
    counts: HashMap<String, HashMap<Pos, u64>>,
}

impl VocabularyBuilder {
    pub fn new(layout: DecadeLayout) -> Self {
        VocabularyBuilder {
            layout,
            counts: HashMap::new(),
        }
    }

    pub fn add(&mut self, record: &NgramRecord) {
        let Some(decade) = self.layout.decade_of(record.year) else {
            return;
        };
        if !self.layout.is_training(decade) {
            return;
        }
        for tok in &record.tokens {
            if tok.pos.is_content() && tok.is_alphabetic() {
                *self
                    .counts
                    .entry(tok.surface.to_lowercase())
                    .or_default()
                    .entry(tok.pos)
                    .or_insert(0) += record.match_count;
            }
        }
    }

    pub fn merge(&mut self, other: VocabularyBuilder) {
        for (lexeme, by_pos) in other.counts {
            let slot = self.counts.entry(lexeme).or_default();
            for (pos, c) in by_pos {
                *slot.entry(pos).or_insert(0) += c;
            }
        }
    }

    /// Ranks lexemes by summed count (descending, ties lexicographic) and
    /// keeps the first `cap`. A lexeme's tag is its most frequent content tag.
    pub fn finish(self, cap: usize) -> ContextVocabulary {
        let mut entries: Vec<VocabEntry> = self
            .counts
            .into_iter()
            .map(|(lexeme, by_pos)| {
                let total_count = by_pos.values().sum();
                let pos = by_pos
                    .iter()
                    .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                    .map(|(p, _)| *p)
                    .unwrap_or(Pos::Noun);
                VocabEntry {
                    lexeme,
                    pos,
                    total_count,
                }
            })
            .collect();
        entries.sort_by(|a, b| {
            b.total_count
                .cmp(&a.total_count)
                .then_with(|| a.lexeme.cmp(&b.lexeme))
        });
        entries.truncate(cap);
        ContextVocabulary::from_entries(entries)
    }
}

/// Builds the context vocabulary from a stream of unigram records.
pub fn build_context_vocabulary<'a>(
    records: impl IntoIterator<Item = &'a NgramRecord>,
    layout: &DecadeLayout,
    cap: usize,
) -> ContextVocabulary {
    let mut builder = VocabularyBuilder::new(layout.clone());
    for r in records {
        builder.add(r);
    }
    builder.finish(cap)
}
