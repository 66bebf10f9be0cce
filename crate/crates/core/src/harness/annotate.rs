use std::collections::HashSet;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::InputBuilder;
use crate::corpus::{constituent_frequencies, Compound, CorpusIndex};
use crate::decade::DecadeLayout;
use crate::neural::{self, NnmModel};
use crate::vectors::Side;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub modifier: String,
    pub head: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationCandidate {
    pub rank: usize,
    pub modifier: String,
    pub head: String,
    pub score: f64,
}

fn by_frequency(freqs: std::collections::BTreeMap<String, u64>) -> Vec<String> {
    let mut v: Vec<(String, u64)> = freqs.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.into_iter().map(|(w, _)| w).collect()
}

/// Unattested modifier-head pairs over the constituents of training
/// compounds. Pairs are enumerated in shells of increasing
/// `max(modifier rank, head rank)` so frequent constituents come first,
/// until `budget` candidates are collected.
pub fn generate_candidates(index: &CorpusIndex, layout: &DecadeLayout, budget: usize) -> Vec<Compound> {
    let (mods, heads) = constituent_frequencies(&index.splits.train, &index.counts, layout);
    let mods = by_frequency(mods);
    let heads = by_frequency(heads);
    let attested = index.counts.attested();
    let mut out = Vec::new();
    let shells = mods.len().max(heads.len());
    let push = |i: usize, j: usize, out: &mut Vec<Compound>| {
        if i < mods.len() && j < heads.len() {
            let c = Compound::new(mods[i].clone(), heads[j].clone());
            if !attested.contains(&c) {
                out.push(c);
            }
        }
        out.len() >= budget
    };
    'outer: for s in 0..shells {
        for i in 0..=s {
            if push(i, s, &mut out) {
                break 'outer;
            }
        }
        for j in 0..s {
            if push(s, j, &mut out) {
                break 'outer;
            }
        }
    }
    out
}

/// Probabilities from a trained neural model, highest first. Candidates
/// without inputs are skipped.
pub fn score_candidates(model: &NnmModel<f32>, inputs: &InputBuilder, candidates: &[Compound]) -> Vec<ScoredCandidate> {
    let mut scored: Vec<ScoredCandidate> = candidates
        .par_iter()
        .filter_map(|c| {
            let m = inputs.sequence(&c.modifier, Side::Modifier)?;
            let h = inputs.sequence(&c.head, Side::Head)?;
            let y = model.score(&m, &h).ok()?;
            Some(ScoredCandidate {
                modifier: c.modifier.clone(),
                head: c.head.clone(),
                score: neural::probability(y as f64),
            })
        })
        .collect();
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.modifier.cmp(&b.modifier))
            .then_with(|| a.head.cmp(&b.head))
    });
    scored
}

/// The `n` highest-scoring unattested candidates judged plausible.
pub fn export_annotation_candidates(
    scored: &[ScoredCandidate],
    attested: &HashSet<Compound>,
    n: usize,
) -> Vec<AnnotationCandidate> {
    let mut sorted: Vec<&ScoredCandidate> = scored.iter().collect();
    sorted.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.modifier.cmp(&b.modifier))
            .then_with(|| a.head.cmp(&b.head))
    });
    let out: Vec<AnnotationCandidate> = sorted
        .into_iter()
        .filter(|c| c.score >= 0.5 && !attested.contains(&Compound::new(c.modifier.clone(), c.head.clone())))
        .take(n)
        .enumerate()
        .map(|(i, c)| AnnotationCandidate {
            rank: i + 1,
            modifier: c.modifier.clone(),
            head: c.head.clone(),
            score: c.score,
        })
        .collect();
    if out.len() < n {
        log::warn!("only {} plausible unattested candidates (asked for {n})", out.len());
    }
    out
}

/// Columns `rank,modifier,head,score,rating` with an empty rating column.
pub fn write_annotations<W: Write>(candidates: &[AnnotationCandidate], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "modifier", "head", "score", "rating"])?;
    for c in candidates {
        w.write_record([c.rank.to_string(), c.modifier.clone(), c.head.clone(), format!("{}", c.score), String::new()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scored<W: Write>(scored: &[ScoredCandidate], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in scored {
        w.serialize(c)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scored<R: Read>(input: R) -> csv::Result<Vec<ScoredCandidate>> {
    csv::Reader::from_reader(input).deserialize().collect()
}
