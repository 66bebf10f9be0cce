//! On-disk form of a [`CorpusIndex`].
//!
//! `compounds.csv` holds `modifier,head,decade,count` rows; the vocabulary,
//! splits and stats are JSON; `known.txt` lists one lexeme per line.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{CompoundCounts, CompoundOccurrence, CompoundSplits, ContextVocabulary, CorpusIndex, IngestStats};
use super::Compound;
use crate::decade::Decade;

pub const COMPOUNDS_FILE: &str = "compounds.csv";
pub const VOCABULARY_FILE: &str = "vocabulary.json";
pub const SPLITS_FILE: &str = "splits.json";
pub const KNOWN_FILE: &str = "known.txt";
pub const STATS_FILE: &str = "stats.json";

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn fmt_err(path: &Path, e: impl std::fmt::Display) -> ArtifactError {
    ArtifactError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

impl CorpusIndex {
    pub fn save(&self, dir: &Path) -> Result<(), ArtifactError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(COMPOUNDS_FILE);
        let mut w = csv::Writer::from_path(&path).map_err(|e| fmt_err(&path, e))?;
        w.write_record(["modifier", "head", "decade", "count"])
            .map_err(|e| fmt_err(&path, e))?;
        for occ in self.counts.occurrences() {
            w.write_record([
                occ.compound.modifier.as_str(),
                occ.compound.head.as_str(),
                &occ.decade.year().to_string(),
                &occ.count.to_string(),
            ])
            .map_err(|e| fmt_err(&path, e))?;
        }
        w.flush().map_err(io_err(&path))?;

        let write_json = |name: &str, value: serde_json::Result<Vec<u8>>| -> Result<(), ArtifactError> {
            let path = dir.join(name);
            let bytes = value.map_err(|e| fmt_err(&path, e))?;
            fs::write(&path, bytes).map_err(io_err(&path))
        };
        write_json(VOCABULARY_FILE, serde_json::to_vec(&self.vocabulary))?;
        write_json(SPLITS_FILE, serde_json::to_vec_pretty(&self.splits))?;
        write_json(STATS_FILE, serde_json::to_vec_pretty(&self.stats))?;

        let mut known: Vec<&String> = self.known.iter().collect();
        known.sort();
        let path = dir.join(KNOWN_FILE);
        let text: String = known.iter().map(|k| format!("{k}\n")).collect();
        fs::write(&path, text).map_err(io_err(&path))
    }

    pub fn load(dir: &Path) -> Result<CorpusIndex, ArtifactError> {
        let path = dir.join(COMPOUNDS_FILE);
        let mut r = csv::Reader::from_path(&path).map_err(|e| fmt_err(&path, e))?;
        let mut counts = CompoundCounts::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| fmt_err(&path, e))?;
            if rec.len() != 4 {
                return Err(fmt_err(&path, format!("expected 4 fields, got {}", rec.len())));
            }
            let decade: u16 = rec[2].parse().map_err(|e| fmt_err(&path, e))?;
            let count: u64 = rec[3].parse().map_err(|e| fmt_err(&path, e))?;
            counts.add(&CompoundOccurrence {
                compound: Compound::new(&rec[0], &rec[1]),
                decade: Decade(decade),
                count,
            });
        }
        let read = |name: &str| -> Result<(PathBuf, Vec<u8>), ArtifactError> {
            let path = dir.join(name);
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            Ok((path, bytes))
        };
        let (p, bytes) = read(VOCABULARY_FILE)?;
        let mut vocabulary: ContextVocabulary = serde_json::from_slice(&bytes).map_err(|e| fmt_err(&p, e))?;
        vocabulary.reindex();
        let (p, bytes) = read(SPLITS_FILE)?;
        let splits: CompoundSplits = serde_json::from_slice(&bytes).map_err(|e| fmt_err(&p, e))?;
        let (p, bytes) = read(STATS_FILE)?;
        let stats: IngestStats = serde_json::from_slice(&bytes).map_err(|e| fmt_err(&p, e))?;
        let (p, bytes) = read(KNOWN_FILE)?;
        let known: HashSet<String> = String::from_utf8(bytes)
            .map_err(|e| fmt_err(&p, e))?
            .lines()
            .map(str::to_string)
            .collect();
        Ok(CorpusIndex {
            counts,
            vocabulary,
            known,
            splits,
            stats,
        })
    }
}
