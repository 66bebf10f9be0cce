//! Corpus ingestion: ngram parsing, compound extraction, the context
//! vocabulary and the temporal split of compounds.

mod artifacts;
mod compounds;
pub mod io;
mod lemma;
mod ngram;
mod vocab;

use std::collections::HashSet;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use artifacts::ArtifactError;
pub use compounds::{
    compound_at, compound_positions, constituent_frequencies, extract_compounds,
    first_attestation, split_compounds_by_first_attestation, Compound, CompoundCounts,
    CompoundOccurrence, CompoundSplits, KnownLexemes, SplitThresholds,
};
pub use lemma::lemmatise_head;
pub use ngram::{parse_ngram_line, NgramRecord, ParseError, Pos, Token};
pub use vocab::{
    build_context_vocabulary, ContextVocabulary, VocabEntry, VocabularyBuilder,
    DEFAULT_VOCAB_CAP,
};

use crate::decade::DecadeLayout;
use io::ReadStats;

/// Everything derived from one pass over the corpus.
#[derive(Debug, Clone)]
pub struct CorpusIndex {
    pub counts: CompoundCounts,
    pub vocabulary: ContextVocabulary,
    pub known: HashSet<String>,
    pub splits: CompoundSplits,
    pub stats: IngestStats,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub unigram_lines: u64,
    pub fivegram_lines: u64,
    pub malformed_lines: u64,
    pub compound_tokens: u64,
    pub compound_types: u64,
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub layout: DecadeLayout,
    pub vocab_cap: usize,
    pub thresholds: SplitThresholds,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            layout: DecadeLayout::default(),
            vocab_cap: DEFAULT_VOCAB_CAP,
            thresholds: SplitThresholds::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Partial state of one ingestion shard.
struct Shard {
    counts: CompoundCounts,
    vocab: VocabularyBuilder,
    known: KnownLexemes,
    stats: IngestStats,
}

impl Shard {
    fn new(layout: &DecadeLayout) -> Self {
        Shard {
            counts: CompoundCounts::new(),
            vocab: VocabularyBuilder::new(layout.clone()),
            known: KnownLexemes::default(),
            stats: IngestStats::default(),
        }
    }

    fn add_fivegram(&mut self, rec: &NgramRecord, layout: &DecadeLayout) {
        self.stats.fivegram_lines += 1;
        for occ in extract_compounds(rec, layout) {
            self.stats.compound_tokens += occ.count;
            self.counts.add(&occ);
        }
        self.known.observe(rec, layout);
    }

    fn add_unigram(&mut self, rec: &NgramRecord, layout: &DecadeLayout) {
        self.stats.unigram_lines += 1;
        self.vocab.add(rec);
        self.known.observe(rec, layout);
    }

    fn merge(mut self, other: Shard) -> Shard {
        self.counts.merge(other.counts);
        self.vocab.merge(other.vocab);
        self.known.merge(other.known);
        self.stats.unigram_lines += other.stats.unigram_lines;
        self.stats.fivegram_lines += other.stats.fivegram_lines;
        self.stats.malformed_lines += other.stats.malformed_lines;
        self.stats.compound_tokens += other.stats.compound_tokens;
        self
    }

    fn finish(self, opts: &IngestOptions) -> CorpusIndex {
        let known = self.known.into_set();
        let splits = split_compounds_by_first_attestation(
            &self.counts,
            &opts.layout,
            &opts.thresholds,
            &known,
        );
        let mut stats = self.stats;
        stats.compound_types = self.counts.len() as u64;
        CorpusIndex {
            counts: self.counts,
            vocabulary: self.vocab.finish(opts.vocab_cap),
            known,
            splits,
            stats,
        }
    }
}

impl CorpusIndex {
    /// Builds the index from in-memory records.
    pub fn from_records<'a>(
        fivegrams: impl IntoIterator<Item = &'a NgramRecord>,
        unigrams: impl IntoIterator<Item = &'a NgramRecord>,
        opts: &IngestOptions,
    ) -> CorpusIndex {
        let mut shard = Shard::new(&opts.layout);
        for r in fivegrams {
            shard.add_fivegram(r, &opts.layout);
        }
        for r in unigrams {
            shard.add_unigram(r, &opts.layout);
        }
        shard.finish(opts)
    }

    /// Builds the index from files, one shard per file processed in
    /// parallel and merged by count addition.
    pub fn from_files(
        fivegram_files: &[PathBuf],
        unigram_files: &[PathBuf],
        opts: &IngestOptions,
    ) -> Result<CorpusIndex, IngestError> {
        let jobs: Vec<(&PathBuf, usize)> = fivegram_files
            .iter()
            .map(|p| (p, 5))
            .chain(unigram_files.iter().map(|p| (p, 1)))
            .collect();
        let shards = jobs
            .par_iter()
            .map(|&(path, n)| {
                let mut shard = Shard::new(&opts.layout);
                let stats: ReadStats = io::for_each_record(path, n, |rec| {
                    if n == 5 {
                        shard.add_fivegram(&rec, &opts.layout)
                    } else {
                        shard.add_unigram(&rec, &opts.layout)
                    }
                })
                .map_err(|source| IngestError::Io {
                    path: path.clone(),
                    source,
                })?;
                shard.stats.malformed_lines += stats.malformed;
                Ok(shard)
            })
            .collect::<Result<Vec<_>, IngestError>>()?;
        let merged = shards
            .into_iter()
            .fold(Shard::new(&opts.layout), Shard::merge);
        Ok(merged.finish(opts))
    }
}
