//! Distributional features of compounds and their constituent-level
//! aggregates.
//!
//! Association measures are computed over compound-bigram tokens: for a
//! compound (m, h) in a slice, `P(comp) = n_comp / n_total`,
//! `P(m) = n_mod / n_total` and `P(h) = n_head / n_total`, where `n_mod`
//! counts bigram tokens with modifier m and `n_head` those with head h.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{Compound, CompoundCounts};
use crate::decade::DecadeLayout;
use crate::gbdt::MISSING;
use crate::vectors::{ContextAspect, CooccurrenceMatrix, MatrixSet, Role, Side, Slice, TargetKey};

pub const FEATURE_NAMES: [&str; 6] = [
    "ppmi",
    "llr",
    "lmi",
    "sim_with_head",
    "sim_with_mod",
    "sim_constituents",
];
pub const N_FEATURES: usize = FEATURE_NAMES.len();

/// Counts of one compound and its marginals within a slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssociationCounts {
    pub n_comp: u64,
    pub n_mod: u64,
    pub n_head: u64,
    pub n_total: u64,
}

impl AssociationCounts {
    pub fn new(n_comp: u64, n_mod: u64, n_head: u64, n_total: u64) -> Self {
        AssociationCounts {
            n_comp,
            n_mod,
            n_head,
            n_total,
        }
    }

    fn defined(&self) -> bool {
        self.n_comp >= 1 && self.n_mod >= 1 && self.n_head >= 1 && self.n_total >= 1
    }
}

/// Pointwise mutual information in bits; `None` for zero counts.
pub fn pmi(c: &AssociationCounts) -> Option<f64> {
    if !c.defined() {
        return None;
    }
    let n = c.n_total as f64;
    let p_comp = c.n_comp as f64 / n;
    let p_mod = c.n_mod as f64 / n;
    let p_head = c.n_head as f64 / n;
    Some((p_comp / (p_mod * p_head)).log2())
}

pub fn ppmi(c: &AssociationCounts) -> Option<f64> {
    pmi(c).map(|v| v.max(0.0))
}

/// Local mutual information: `P(comp) * PMI`, unclipped.
pub fn lmi(c: &AssociationCounts) -> Option<f64> {
    pmi(c).map(|v| c.n_comp as f64 / c.n_total as f64 * v)
}

/// Dunning's log-likelihood ratio over the 2x2 contingency table of
/// modifier/head presence; cells with zero count contribute nothing.
pub fn llr(c: &AssociationCounts) -> Option<f64> {
    if !c.defined() {
        return None;
    }
    let k11 = c.n_comp as f64;
    let k12 = c.n_mod as f64 - k11;
    let k21 = c.n_head as f64 - k11;
    let k22 = c.n_total as f64 - c.n_mod as f64 - c.n_head as f64 + k11;
    let n = c.n_total as f64;
    let (r1, r2) = (k11 + k12, k21 + k22);
    let (c1, c2) = (k11 + k21, k12 + k22);
    let term = |k: f64, row: f64, col: f64| {
        if k <= 0.0 {
            0.0
        } else {
            k * (k * n / (row * col)).ln()
        }
    };
    let g2 = 2.0 * (term(k11, r1, c1) + term(k12, r1, c2) + term(k21, r2, c1) + term(k22, r2, c2));
    Some(g2.max(0.0))
}

/// Cosine similarity; `None` when either vector is zero.
pub fn cosine(u: &[f64], v: &[f64]) -> Option<f64> {
    assert_eq!(u.len(), v.len(), "cosine of vectors with different lengths");
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return None;
    }
    Some((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Cosine of two sparse rows given as sorted (column, value) slices.
pub fn sparse_cosine(a: (&[u32], &[f64]), b: (&[u32], &[f64])) -> Option<f64> {
    let (ac, av) = a;
    let (bc, bv) = b;
    let (mut i, mut j, mut dot) = (0, 0, 0.0);
    while i < ac.len() && j < bc.len() {
        match ac[i].cmp(&bc[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += av[i] * bv[j];
                i += 1;
                j += 1;
            }
        }
    }
    let na: f64 = av.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = bv.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// The six features of one compound in one slice; `None` marks an undefined
/// feature.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeatureVector(pub [Option<f64>; N_FEATURES]);

impl FeatureVector {
    pub fn missing() -> Self {
        FeatureVector([None; N_FEATURES])
    }

    pub fn ppmi(&self) -> Option<f64> {
        self.0[0]
    }
    pub fn llr(&self) -> Option<f64> {
        self.0[1]
    }
    pub fn lmi(&self) -> Option<f64> {
        self.0[2]
    }
    pub fn sim_with_head(&self) -> Option<f64> {
        self.0[3]
    }
    pub fn sim_with_mod(&self) -> Option<f64> {
        self.0[4]
    }
    pub fn sim_constituents(&self) -> Option<f64> {
        self.0[5]
    }
}

/// Bigram-token counts of one slice.
#[derive(Debug, Clone, Default)]
pub struct SliceCounts {
    compounds: HashMap<Compound, u64>,
    modifiers: HashMap<String, u64>,
    heads: HashMap<String, u64>,
    total: u64,
}

impl SliceCounts {
    /// Counts restricted to the decades accepted by `keep`.
    pub fn from_counts(counts: &CompoundCounts, keep: impl Fn(crate::decade::Decade) -> bool) -> Self {
        let mut s = SliceCounts::default();
        for (c, decades) in counts.iter() {
            let n: u64 = decades.iter().filter(|(d, _)| keep(**d)).map(|(_, n)| *n).sum();
            if n == 0 {
                continue;
            }
            s.compounds.insert(c.clone(), n);
            *s.modifiers.entry(c.modifier.clone()).or_insert(0) += n;
            *s.heads.entry(c.head.clone()).or_insert(0) += n;
            s.total += n;
        }
        s
    }

    pub fn association(&self, c: &Compound) -> AssociationCounts {
        AssociationCounts {
            n_comp: self.compounds.get(c).copied().unwrap_or(0),
            n_mod: self.modifiers.get(&c.modifier).copied().unwrap_or(0),
            n_head: self.heads.get(&c.head).copied().unwrap_or(0),
            n_total: self.total,
        }
    }
}

/// Features of `comp` in one slice from raw counts and sparse raw-count
/// vectors. Under CompoundCentric the similarities use head/modifier role
/// vectors, under CompoundAgnostic standalone-word vectors.
pub fn compound_features(
    comp: &Compound,
    counts: &SliceCounts,
    vectors: &CooccurrenceMatrix,
    aspect: ContextAspect,
) -> FeatureVector {
    let assoc = counts.association(comp);
    if assoc.n_comp == 0 {
        return FeatureVector::missing();
    }
    let bigram = vectors.row_by_key(&TargetKey::new(comp.bigram(), Role::CompoundBigram));
    let mod_vec = vectors.row_by_key(&aspect.constituent_key(&comp.modifier, Side::Modifier));
    let head_vec = vectors.row_by_key(&aspect.constituent_key(&comp.head, Side::Head));
    let sim = |a: Option<(&[u32], &[f64])>, b: Option<(&[u32], &[f64])>| match (a, b) {
        (Some(a), Some(b)) => sparse_cosine(a, b),
        _ => None,
    };
    FeatureVector([
        ppmi(&assoc),
        llr(&assoc),
        lmi(&assoc),
        sim(bigram, head_vec),
        sim(bigram, mod_vec),
        sim(mod_vec, head_vec),
    ])
}

/// Mean and population standard deviation of each feature over the
/// compounds containing a constituent; undefined values are skipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: [Option<f64>; N_FEATURES],
    pub std: [Option<f64>; N_FEATURES],
}

pub fn constituent_features<'a>(features: impl IntoIterator<Item = &'a FeatureVector>) -> Aggregate {
    let mut sums = [0.0; N_FEATURES];
    let mut sq = [0.0; N_FEATURES];
    let mut n = [0usize; N_FEATURES];
    let all: Vec<&FeatureVector> = features.into_iter().collect();
    for fv in &all {
        for (i, v) in fv.0.iter().enumerate() {
            if let Some(v) = v {
                sums[i] += v;
                n[i] += 1;
            }
        }
    }
    let mut mean = [None; N_FEATURES];
    for i in 0..N_FEATURES {
        if n[i] > 0 {
            mean[i] = Some(sums[i] / n[i] as f64);
        }
    }
    for fv in &all {
        for (i, v) in fv.0.iter().enumerate() {
            if let (Some(v), Some(m)) = (v, mean[i]) {
                sq[i] += (v - m).powi(2);
            }
        }
    }
    let mut std = [None; N_FEATURES];
    for i in 0..N_FEATURES {
        if n[i] > 0 {
            std[i] = Some((sq[i] / n[i] as f64).sqrt());
        }
    }
    Aggregate { mean, std }
}

/// Constituent-level DFM inputs for one (context, time) aspect pair.
#[derive(Debug, Clone)]
pub struct DfmFeatures {
    slices: Vec<Slice>,
    with_std: bool,
    modifiers: BTreeMap<String, Vec<Aggregate>>,
    heads: BTreeMap<String, Vec<Aggregate>>,
}

impl DfmFeatures {
    /// Aggregates features of the training compounds over every slice of
    /// the matrix set.
    pub fn build(
        train: &BTreeSet<Compound>,
        counts: &CompoundCounts,
        matrices: &MatrixSet,
        layout: &DecadeLayout,
        with_std: bool,
    ) -> Self {
        let slices: Vec<Slice> = matrices.matrices.iter().map(|m| m.slice).collect();
        let mut per_slice: Vec<HashMap<&Compound, FeatureVector>> = Vec::new();
        for m in &matrices.matrices {
            let counts = match m.slice {
                Slice::Decade(d) => SliceCounts::from_counts(counts, |x| x == d),
                Slice::All => SliceCounts::from_counts(counts, |x| layout.is_training(x)),
            };
            per_slice.push(
                train
                    .iter()
                    .map(|c| (c, compound_features(c, &counts, m, matrices.context)))
                    .collect(),
            );
        }
        let mut by_mod: BTreeMap<&str, Vec<&Compound>> = BTreeMap::new();
        let mut by_head: BTreeMap<&str, Vec<&Compound>> = BTreeMap::new();
        for c in train {
            by_mod.entry(&c.modifier).or_default().push(c);
            by_head.entry(&c.head).or_default().push(c);
        }
        let aggregate = |groups: BTreeMap<&str, Vec<&Compound>>| {
            groups
                .into_iter()
                .map(|(lexeme, members)| {
                    let aggs = per_slice
                        .iter()
                        .map(|feats| constituent_features(members.iter().map(|c| &feats[c])))
                        .collect();
                    (lexeme.to_string(), aggs)
                })
                .collect::<BTreeMap<_, _>>()
        };
        DfmFeatures {
            slices,
            with_std,
            modifiers: aggregate(by_mod),
            heads: aggregate(by_head),
        }
    }

    pub fn slices(&self) -> &[Slice] {
        &self.slices
    }

    /// Width of one constituent block.
    pub fn block_dims(&self) -> usize {
        self.slices.len() * N_FEATURES * if self.with_std { 2 } else { 1 }
    }

    /// Width of a candidate row (modifier block then head block).
    pub fn dims(&self) -> usize {
        2 * self.block_dims()
    }

    pub fn header(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.dims());
        for side in ["mod", "head"] {
            for slice in &self.slices {
                for f in FEATURE_NAMES {
                    names.push(format!("{f}_mean_{side}_{slice}"));
                    if self.with_std {
                        names.push(format!("{f}_std_{side}_{slice}"));
                    }
                }
            }
        }
        names
    }

    pub fn aggregate(&self, lexeme: &str, side: Side) -> Option<&[Aggregate]> {
        match side {
            Side::Modifier => self.modifiers.get(lexeme),
            Side::Head => self.heads.get(lexeme),
        }
        .map(Vec::as_slice)
    }

    fn push_block(&self, aggs: &[Aggregate], out: &mut Vec<f64>) {
        for a in aggs {
            for i in 0..N_FEATURES {
                out.push(a.mean[i].unwrap_or(MISSING));
                if self.with_std {
                    out.push(a.std[i].unwrap_or(MISSING));
                }
            }
        }
    }

    /// Feature row for a candidate, or `None` when either constituent never
    /// occurs in a training compound on its side.
    pub fn row(&self, modifier: &str, head: &str) -> Option<Vec<f64>> {
        let m = self.modifiers.get(modifier)?;
        let h = self.heads.get(head)?;
        let mut out = Vec::with_capacity(self.dims());
        self.push_block(m, &mut out);
        self.push_block(h, &mut out);
        Some(out)
    }

    /// Writes candidate rows as CSV with a named header.
    pub fn write_csv<W: Write>(&self, pairs: &[(String, String)], out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["modifier".to_string(), "head".to_string()];
        header.extend(self.header());
        w.write_record(&header)?;
        for (m, h) in pairs {
            if let Some(row) = self.row(m, h) {
                let mut rec = vec![m.clone(), h.clone()];
                rec.extend(row.iter().map(|v| format!("{v}")));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
