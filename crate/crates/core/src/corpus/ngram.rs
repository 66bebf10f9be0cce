//! Google Books Ngram (V2) line parsing.
//!
//! Each line is `ngram TAB year TAB match_count TAB volume_count`, and every
//! token of the ngram carries a universal part-of-speech suffix, e.g.
//! `water_NOUN cycle_NOUN\t1905\t17\t12`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Universal part-of-speech tags as used by the Google Books Ngram corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pos {
    Noun,
    Verb,
    Adj,
    Adv,
    Pron,
    Det,
    Adp,
    Num,
    Conj,
    Prt,
    Punct,
    X,
}

impl Pos {
    pub fn as_str(self) -> &'static str {
        match self {
            Pos::Noun => "NOUN",
            Pos::Verb => "VERB",
            Pos::Adj => "ADJ",
            Pos::Adv => "ADV",
            Pos::Pron => "PRON",
            Pos::Det => "DET",
            Pos::Adp => "ADP",
            Pos::Num => "NUM",
            Pos::Conj => "CONJ",
            Pos::Prt => "PRT",
            Pos::Punct => ".",
            Pos::X => "X",
        }
    }

    /// Content-word classes admitted as distributional contexts.
    pub fn is_content(self) -> bool {
        matches!(self, Pos::Noun | Pos::Adj | Pos::Verb | Pos::Adv)
    }
}

impl FromStr for Pos {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "NOUN" => Pos::Noun,
            "VERB" => Pos::Verb,
            "ADJ" => Pos::Adj,
            "ADV" => Pos::Adv,
            "PRON" => Pos::Pron,
            "DET" => Pos::Det,
            "ADP" => Pos::Adp,
            "NUM" => Pos::Num,
            "CONJ" => Pos::Conj,
            "PRT" => Pos::Prt,
            "." => Pos::Punct,
            "X" => Pos::X,
            _ => return Err(()),
        })
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub pos: Pos,
}

impl Token {
    pub fn new(surface: impl Into<String>, pos: Pos) -> Self {
        Token {
            surface: surface.into(),
            pos,
        }
    }

    pub fn is_alphabetic(&self) -> bool {
        !self.surface.is_empty() && self.surface.chars().all(char::is_alphabetic)
    }
}

/// One parsed corpus line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramRecord {
    pub tokens: Vec<Token>,
    pub year: u16,
    pub match_count: u64,
}

impl NgramRecord {
    pub fn new(tokens: Vec<Token>, year: u16, match_count: u64) -> Self {
        NgramRecord {
            tokens,
            year,
            match_count,
        }
    }

    /// Renders the record back into the V2 line layout. The volume count is
    /// not kept, so it is written as the match count.
    pub fn to_line(&self) -> String {
        let ngram: Vec<String> = self
            .tokens
            .iter()
            .map(|t| format!("{}_{}", t.surface, t.pos))
            .collect();
        format!(
            "{}\t{}\t{}\t{}",
            ngram.join(" "),
            self.year,
            self.match_count,
            self.match_count
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("expected at least 3 tab-separated fields, found {0}")]
    FieldCount(usize),
    #[error("expected {expected} tokens, found {found}")]
    TokenCount { expected: usize, found: usize },
    #[error("token {0:?} has no part-of-speech suffix")]
    MissingPos(String),
    #[error("invalid year {0:?}")]
    Year(String),
    #[error("invalid match count {0:?}")]
    MatchCount(String),
    #[error("invalid volume count {0:?}")]
    VolumeCount(String),
    #[error("ngram order must be 1..=5, got {0}")]
    Order(usize),
}

fn parse_token(raw: &str) -> Result<Token, ParseError> {
    let (surface, tag) = raw
        .rsplit_once('_')
        .ok_or_else(|| ParseError::MissingPos(raw.to_string()))?;
    let pos = tag
        .parse::<Pos>()
        .map_err(|_| ParseError::MissingPos(raw.to_string()))?;
    if surface.is_empty() {
        return Err(ParseError::MissingPos(raw.to_string()));
    }
    Ok(Token::new(surface, pos))
}

/// Parses one line of an order-`n` ngram file.
pub fn parse_ngram_line(line: &str, n: usize) -> Result<NgramRecord, ParseError> {
    if !(1..=5).contains(&n) {
        return Err(ParseError::Order(n));
    }
    let line = line.trim_end_matches(['\n', '\r']);
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() < 3 {
        return Err(ParseError::FieldCount(fields.len()));
    }
    let raw_tokens: Vec<&str> = fields[0].split_whitespace().collect();
    if raw_tokens.len() != n {
        return Err(ParseError::TokenCount {
            expected: n,
            found: raw_tokens.len(),
        });
    }
    let tokens = raw_tokens
        .into_iter()
        .map(parse_token)
        .collect::<Result<Vec<_>, _>>()?;
    let year = fields[1]
        .trim()
        .parse::<u16>()
        .map_err(|_| ParseError::Year(fields[1].to_string()))?;
    let match_count = fields[2]
        .trim()
        .parse::<u64>()
        .ok()
        .filter(|&c| c >= 1)
        .ok_or_else(|| ParseError::MatchCount(fields[2].to_string()))?;
    if let Some(volumes) = fields.get(3) {
        volumes
            .trim()
            .parse::<u64>()
            .map_err(|_| ParseError::VolumeCount(volumes.to_string()))?;
    }
    Ok(NgramRecord::new(tokens, year, match_count))
}
