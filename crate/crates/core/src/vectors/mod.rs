//! Role-sensitive co-occurrence matrices and their truncated SVD embeddings.

mod contexts;
mod matrix;
mod store;
mod svd;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use contexts::{collect_contexts, ContextHit};
pub use matrix::{build_matrices, CooccurrenceMatrix, MatrixBuilder, MatrixSet};
pub use store::{
    build_store, embedding_sequence, EmbeddingStore, EmbeddingTable, SequenceStep, StoreError,
};
pub use svd::{truncated_svd, SvdError, TruncatedSvd, Weighting};

use crate::corpus::lemmatise_head;
use crate::decade::Decade;

/// What a row of a co-occurrence matrix stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    HeadOfCompound,
    ModifierOfCompound,
    StandaloneWord,
    CompoundBigram,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::HeadOfCompound => "head",
            Role::ModifierOfCompound => "modifier",
            Role::StandaloneWord => "word",
            Role::CompoundBigram => "compound",
        }
    }
}

/// How constituent contexts are collected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ContextAspect {
    /// Constituents are described by their usage inside compounds, separately
    /// per role.
    CompoundCentric,
    /// Constituents are described by ordinary window contexts.
    CompoundAgnostic,
}

/// Whether counts are kept per decade or aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TimeAspect {
    DecadeCentric,
    DecadeAgnostic,
}

/// Which side of a compound a constituent sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Modifier,
    Head,
}

impl ContextAspect {
    pub const ALL: [ContextAspect; 2] = [ContextAspect::CompoundCentric, ContextAspect::CompoundAgnostic];

    pub fn as_str(self) -> &'static str {
        match self {
            ContextAspect::CompoundCentric => "compound-centric",
            ContextAspect::CompoundAgnostic => "compound-agnostic",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ContextAspect::CompoundCentric => "CompoundCentric",
            ContextAspect::CompoundAgnostic => "CompoundAgnostic",
        }
    }

    /// Row key describing a constituent on the given side under this aspect.
    pub fn constituent_key(self, lexeme: &str, side: Side) -> TargetKey {
        match (self, side) {
            (ContextAspect::CompoundCentric, Side::Modifier) => {
                TargetKey::new(lexeme, Role::ModifierOfCompound)
            }
            (ContextAspect::CompoundCentric, Side::Head) => {
                TargetKey::new(lexeme, Role::HeadOfCompound)
            }
            (ContextAspect::CompoundAgnostic, _) => {
                TargetKey::new(lemmatise_head(lexeme), Role::StandaloneWord)
            }
        }
    }

    pub fn roles(self) -> &'static [Role] {
        match self {
            ContextAspect::CompoundCentric => &[
                Role::HeadOfCompound,
                Role::ModifierOfCompound,
                Role::CompoundBigram,
            ],
            ContextAspect::CompoundAgnostic => &[Role::StandaloneWord, Role::CompoundBigram],
        }
    }
}

impl TimeAspect {
    pub const ALL: [TimeAspect; 2] = [TimeAspect::DecadeCentric, TimeAspect::DecadeAgnostic];

    pub fn as_str(self) -> &'static str {
        match self {
            TimeAspect::DecadeCentric => "decade-centric",
            TimeAspect::DecadeAgnostic => "decade-agnostic",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TimeAspect::DecadeCentric => "DecadeCentric",
            TimeAspect::DecadeAgnostic => "DecadeAgnostic",
        }
    }
}

impl FromStr for ContextAspect {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "compound-centric" | "compoundcentric" | "cc" => Ok(ContextAspect::CompoundCentric),
            "compound-agnostic" | "compoundagnostic" | "ca" => Ok(ContextAspect::CompoundAgnostic),
            _ => Err(format!("unknown context aspect {s:?}")),
        }
    }
}

impl FromStr for TimeAspect {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "decade-centric" | "decadecentric" | "dc" => Ok(TimeAspect::DecadeCentric),
            "decade-agnostic" | "decadeagnostic" | "da" => Ok(TimeAspect::DecadeAgnostic),
            _ => Err(format!("unknown time aspect {s:?}")),
        }
    }
}

impl fmt::Display for ContextAspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for TimeAspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A matrix row: a lexeme (or `"modifier head"` bigram) in a role.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TargetKey {
    pub lexeme: String,
    pub role: Role,
}

impl TargetKey {
    pub fn new(lexeme: impl Into<String>, role: Role) -> Self {
        TargetKey {
            lexeme: lexeme.into(),
            role,
        }
    }
}

/// A decade slice or the aggregate over all training decades.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slice {
    Decade(Decade),
    All,
}

impl fmt::Display for Slice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slice::Decade(d) => write!(f, "{d}"),
            Slice::All => f.write_str("all"),
        }
    }
}

impl FromStr for Slice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "all" {
            return Ok(Slice::All);
        }
        s.parse::<u16>()
            .map(|y| Slice::Decade(Decade(y)))
            .map_err(|_| format!("bad slice {s:?}"))
    }
}

impl Serialize for Slice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Slice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
