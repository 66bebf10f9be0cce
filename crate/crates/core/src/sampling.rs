//! Corrupted negative tuples and balanced labeled datasets.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Compound;

/// Draws allowed per corrupted tuple before giving up.
pub const RETRY_BUDGET: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    CorruptHead,
    CorruptModifier,
}

impl Scenario {
    pub const ALL: [Scenario; 2] = [Scenario::CorruptHead, Scenario::CorruptModifier];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::CorruptHead => "head",
            Scenario::CorruptModifier => "modifier",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Scenario::CorruptHead => "CorruptHead",
            Scenario::CorruptModifier => "CorruptMod",
        }
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "head" | "corrupthead" | "corrupt-head" => Ok(Scenario::CorruptHead),
            "modifier" | "mod" | "corruptmodifier" | "corruptmod" | "corrupt-modifier" => {
                Ok(Scenario::CorruptModifier)
            }
            _ => Err(format!("unknown corruption scenario {s:?} (head, modifier)")),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Attested,
    Corrupted,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Attested
    }
}

/// Which constituent (if any) was replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Corruption {
    None,
    CorruptHead,
    CorruptModifier,
}

impl Corruption {
    pub fn as_str(self) -> &'static str {
        match self {
            Corruption::None => "none",
            Corruption::CorruptHead => "head",
            Corruption::CorruptModifier => "modifier",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CandidateTuple {
    pub modifier: String,
    pub head: String,
    pub label: Label,
    pub corruption: Corruption,
    pub source_seed: u64,
}

impl CandidateTuple {
    pub fn attested(c: &Compound, seed: u64) -> Self {
        CandidateTuple {
            modifier: c.modifier.clone(),
            head: c.head.clone(),
            label: Label::Attested,
            corruption: Corruption::None,
            source_seed: seed,
        }
    }

    pub fn compound(&self) -> Compound {
        Compound::new(self.modifier.clone(), self.head.clone())
    }
}

/// How replacement constituents are drawn from a pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolWeighting {
    /// Uniform over distinct types.
    #[default]
    Uniform,
    /// Proportional to token frequency.
    Frequency,
}

impl FromStr for PoolWeighting {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(PoolWeighting::Uniform),
            "frequency" => Ok(PoolWeighting::Frequency),
            _ => Err(format!("unknown pool weighting {s:?} (uniform, frequency)")),
        }
    }
}

impl fmt::Display for PoolWeighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PoolWeighting::Uniform => "uniform",
            PoolWeighting::Frequency => "frequency",
        })
    }
}

/// Replacement candidates for one side of a compound.
#[derive(Debug, Clone)]
pub struct ConstituentPool {
    items: Vec<String>,
    weights: Option<WeightedIndex<u64>>,
}

impl ConstituentPool {
    /// Pool over the keys of a frequency map (sorted, so draws are
    /// reproducible).
    pub fn new(freqs: &BTreeMap<String, u64>, weighting: PoolWeighting) -> Self {
        let items: Vec<String> = freqs.keys().cloned().collect();
        let weights = match weighting {
            PoolWeighting::Uniform => None,
            PoolWeighting::Frequency => {
                WeightedIndex::new(freqs.values().map(|&c| c.max(1))).ok()
            }
        };
        ConstituentPool { items, weights }
    }

    pub fn uniform(items: impl IntoIterator<Item = String>) -> Self {
        let mut items: Vec<String> = items.into_iter().collect();
        items.sort();
        items.dedup();
        ConstituentPool {
            items,
            weights: None,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    fn draw<'a, R: Rng>(&'a self, rng: &mut R) -> &'a str {
        let i = match &self.weights {
            Some(w) => w.sample(rng),
            None => rng.random_range(0..self.items.len()),
        };
        &self.items[i]
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SamplingError {
    #[error("no replacement for ({modifier}, {head}) found in {draws} draws")]
    Exhausted {
        modifier: String,
        head: String,
        draws: usize,
    },
    #[error("cannot assemble datasets from an empty positive set")]
    NoPositives,
}

/// Replaces the head (or modifier) of an attested pair with a random pool
/// member so that the result differs from the original and is not in
/// `forbidden`.
pub fn corrupt<R: Rng>(
    positive: &Compound,
    scenario: Scenario,
    head_pool: &ConstituentPool,
    modifier_pool: &ConstituentPool,
    forbidden: &HashSet<Compound>,
    rng: &mut R,
    seed: u64,
) -> Result<CandidateTuple, SamplingError> {
    corrupt_excluding(positive, scenario, head_pool, modifier_pool, forbidden, &HashSet::new(), rng, seed)
}

#[allow(clippy::too_many_arguments)]
fn corrupt_excluding<R: Rng>(
    positive: &Compound,
    scenario: Scenario,
    head_pool: &ConstituentPool,
    modifier_pool: &ConstituentPool,
    forbidden: &HashSet<Compound>,
    taken: &HashSet<Compound>,
    rng: &mut R,
    seed: u64,
) -> Result<CandidateTuple, SamplingError> {
    let pool = match scenario {
        Scenario::CorruptHead => head_pool,
        Scenario::CorruptModifier => modifier_pool,
    };
    if !pool.is_empty() {
        for _ in 0..RETRY_BUDGET {
            let replacement = pool.draw(rng);
            let candidate = match scenario {
                Scenario::CorruptHead => {
                    if replacement == positive.head {
                        continue;
                    }
                    Compound::new(positive.modifier.clone(), replacement)
                }
                Scenario::CorruptModifier => {
                    if replacement == positive.modifier {
                        continue;
                    }
                    Compound::new(replacement, positive.head.clone())
                }
            };
            if forbidden.contains(&candidate) || taken.contains(&candidate) {
                continue;
            }
            return Ok(CandidateTuple {
                modifier: candidate.modifier,
                head: candidate.head,
                label: Label::Corrupted,
                corruption: match scenario {
                    Scenario::CorruptHead => Corruption::CorruptHead,
                    Scenario::CorruptModifier => Corruption::CorruptModifier,
                },
                source_seed: seed,
            });
        }
    }
    Err(SamplingError::Exhausted {
        modifier: positive.modifier.clone(),
        head: positive.head.clone(),
        draws: RETRY_BUDGET,
    })
}

/// A balanced set of attested tuples and their corruptions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDataset {
    /// Shuffled tuples.
    pub tuples: Vec<CandidateTuple>,
    /// (positive index, negative index) into `tuples` for every pair.
    pub pairs: Vec<(usize, usize)>,
    pub scenario: Scenario,
    pub seed: u64,
    /// Positives that could not be corrupted and were left out.
    pub dropped: Vec<Compound>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn positives(&self) -> impl Iterator<Item = &CandidateTuple> {
        self.tuples.iter().filter(|t| t.label.is_positive())
    }

    pub fn negatives(&self) -> impl Iterator<Item = &CandidateTuple> {
        self.tuples.iter().filter(|t| !t.label.is_positive())
    }

    /// CSV with columns `modifier,head,label,corruption,seed`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["modifier", "head", "label", "corruption", "seed"])?;
        for t in &self.tuples {
            let label = if t.label.is_positive() { "1" } else { "0" };
            let seed = t.source_seed.to_string();
            w.write_record([
                t.modifier.as_str(),
                t.head.as_str(),
                label,
                t.corruption.as_str(),
                seed.as_str(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Pairs every positive with one corruption drawn with a generator seeded by
/// `seed` on the given stream, then shuffles.
pub fn sample_dataset(
    positives: &[Compound],
    scenario: Scenario,
    head_pool: &ConstituentPool,
    modifier_pool: &ConstituentPool,
    forbidden: &HashSet<Compound>,
    seed: u64,
    stream: u64,
) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut taken: HashSet<Compound> = HashSet::new();
    let mut raw_pairs = Vec::with_capacity(positives.len());
    let mut dropped = Vec::new();
    for p in positives {
        match corrupt_excluding(p, scenario, head_pool, modifier_pool, forbidden, &taken, &mut rng, seed) {
            Ok(neg) => {
                taken.insert(neg.compound());
                raw_pairs.push((CandidateTuple::attested(p, seed), neg));
            }
            Err(e) => {
                log::debug!("dropping positive: {e}");
                dropped.push(p.clone());
            }
        }
    }
    let mut order: Vec<usize> = (0..raw_pairs.len() * 2).collect();
    order.shuffle(&mut rng);
    let mut tuples = vec![None; order.len()];
    let mut pairs = vec![(0, 0); raw_pairs.len()];
    for (slot, &src) in order.iter().enumerate() {
        let (pair, is_neg) = (src / 2, src % 2 == 1);
        let t = if is_neg {
            pairs[pair].1 = slot;
            raw_pairs[pair].1.clone()
        } else {
            pairs[pair].0 = slot;
            raw_pairs[pair].0.clone()
        };
        tuples[slot] = Some(t);
    }
    LabeledDataset {
        tuples: tuples.into_iter().map(|t| t.expect("filled")).collect(),
        pairs,
        scenario,
        seed,
        dropped,
    }
}

/// `n_datasets` datasets over the same positives, dataset `i` seeded with
/// `base_seed + i`.
pub fn assemble_datasets(
    positives: &[Compound],
    scenario: Scenario,
    n_datasets: usize,
    base_seed: u64,
    head_pool: &ConstituentPool,
    modifier_pool: &ConstituentPool,
    forbidden: &HashSet<Compound>,
) -> Result<Vec<LabeledDataset>, SamplingError> {
    if positives.is_empty() {
        return Err(SamplingError::NoPositives);
    }
    Ok((0..n_datasets as u64)
        .map(|i| {
            sample_dataset(
                positives,
                scenario,
                head_pool,
                modifier_pool,
                forbidden,
                base_seed + i,
                0,
            )
        })
        .collect())
}
