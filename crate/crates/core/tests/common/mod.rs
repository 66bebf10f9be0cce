//! Independent reference implementations shared by the integration tests and
//! the acceptance suite.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use compounding::corpus::{Compound, ContextVocabulary, NgramRecord, Pos, Token, VocabEntry};
use compounding::neural::NnmModel;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---- association measures from the 2x2 contingency table ----

/// Cells of the modifier/head contingency table.
#[derive(Debug, Clone, Copy)]
pub struct Table {
    pub k11: f64,
    pub k12: f64,
    pub k21: f64,
    pub k22: f64,
}

impl Table {
    /// From bigram-token marginals.
    pub fn from_marginals(n_comp: u64, n_mod: u64, n_head: u64, n: u64) -> Table {
        let (c, m, h, n) = (n_comp as f64, n_mod as f64, n_head as f64, n as f64);
        Table { k11: c, k12: m - c, k21: h - c, k22: n - m - h + c }
    }

    pub fn n(&self) -> f64 {
        self.k11 + self.k12 + self.k21 + self.k22
    }
}

pub fn pmi(t: &Table) -> f64 {
    let n = t.n();
    let joint = t.k11 / n;
    let pm = (t.k11 + t.k12) / n;
    let ph = (t.k11 + t.k21) / n;
    joint.log2() - pm.log2() - ph.log2()
}

pub fn ppmi(t: &Table) -> f64 {
    pmi(t).max(0.0)
}

pub fn lmi(t: &Table) -> f64 {
    t.k11 / t.n() * pmi(t)
}

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// G^2 in entropy form: `2 (sum k ln k - sum R ln R - sum C ln C + N ln N)`.
pub fn llr(t: &Table) -> f64 {
    let cells = xlogx(t.k11) + xlogx(t.k12) + xlogx(t.k21) + xlogx(t.k22);
    let rows = xlogx(t.k11 + t.k12) + xlogx(t.k21 + t.k22);
    let cols = xlogx(t.k11 + t.k21) + xlogx(t.k12 + t.k22);
    (2.0 * (cells - rows - cols + xlogx(t.n()))).max(0.0)
}

pub fn cosine(u: &[f64], v: &[f64]) -> Option<f64> {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    (nu > 0.0 && nv > 0.0).then(|| dot / (nu * nv))
}

pub fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => (a - b).abs() <= tol,
        _ => false,
    }
}

// ---- toy corpora of ADJ NOUN NOUN VERB ADV 5-grams ----

/// One 5-gram `c1_ADJ m_NOUN h_NOUN c2_VERB c3_ADV`.
#[derive(Debug, Clone)]
pub struct ToyLine {
    pub contexts: [String; 3],
    pub modifier: String,
    pub head: String,
    pub year: u16,
    pub count: u64,
}

impl ToyLine {
    pub fn record(&self) -> NgramRecord {
        NgramRecord::new(
            vec![
                Token::new(self.contexts[0].clone(), Pos::Adj),
                Token::new(self.modifier.clone(), Pos::Noun),
                Token::new(self.head.clone(), Pos::Noun),
                Token::new(self.contexts[1].clone(), Pos::Verb),
                Token::new(self.contexts[2].clone(), Pos::Adv),
            ],
            self.year,
            self.count,
        )
    }

    pub fn decade(&self) -> u16 {
        self.year / 10 * 10
    }
}

#[derive(Debug, Clone)]
pub struct ToyCorpus {
    pub lines: Vec<ToyLine>,
    /// Context columns in vocabulary order.
    pub vocab: Vec<String>,
}

/// Lowercase word that no lemmatisation rule touches.
fn word(rng: &mut ChaCha8Rng, prefix: char) -> String {
    let letters = b"bdgkmnprv";
    let mut w = String::from(prefix);
    for _ in 0..4 {
        w.push(letters[rng.random_range(0..letters.len())] as char);
    }
    w.push('t');
    w
}

fn distinct(rng: &mut ChaCha8Rng, prefix: char, n: usize) -> Vec<String> {
    let mut out = BTreeSet::new();
    while out.len() < n {
        out.insert(word(rng, prefix));
    }
    out.into_iter().collect()
}

/// Random corpus with at most 50 compound types. Most lines fall in the
/// training decades; a few land in validation and test.
pub fn toy_corpus(seed: u64) -> ToyCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes = [rng.random_range(1..8), rng.random_range(1..8), rng.random_range(2..10)];
    let mods = distinct(&mut rng, 'm', sizes[0]);
    let heads = distinct(&mut rng, 'h', sizes[1]);
    let ctx = distinct(&mut rng, 'c', sizes[2]);
    let mut types: Vec<(String, String)> = Vec::new();
    for m in &mods {
        for h in &heads {
            if types.len() < 50 && rng.random_bool(0.7) {
                types.push((m.clone(), h.clone()));
            }
        }
    }
    if types.is_empty() {
        types.push((mods[0].clone(), heads[0].clone()));
    }
    let n_lines = rng.random_range(1..80);
    let lines = (0..n_lines)
        .map(|_| {
            let (modifier, head) = types[rng.random_range(0..types.len())].clone();
            let decade = match rng.random_range(0..20) {
                0 => 1990,
                1 => 2000,
                _ => 1800 + 10 * rng.random_range(0..4u16),
            };
            ToyLine {
                contexts: [0, 1, 2].map(|_| ctx[rng.random_range(0..ctx.len())].clone()),
                modifier,
                head,
                year: decade + rng.random_range(0..10),
                count: rng.random_range(1..40),
            }
        })
        .collect();
    // Some nouns double as context words so that compound partners matter.
    let mut vocab = ctx;
    for w in mods.iter().chain(&heads) {
        if rng.random_bool(0.3) {
            vocab.push(w.clone());
        }
    }
    ToyCorpus { lines, vocab }
}

impl ToyCorpus {
    pub fn records(&self) -> Vec<NgramRecord> {
        self.lines.iter().map(ToyLine::record).collect()
    }

    pub fn vocabulary(&self) -> ContextVocabulary {
        ContextVocabulary::from_entries(
            self.vocab
                .iter()
                .map(|w| VocabEntry { lexeme: w.clone(), pos: Pos::Adj, total_count: 1 })
                .collect(),
        )
    }

    pub fn compounds(&self) -> BTreeSet<Compound> {
        self.lines.iter().map(|l| Compound::new(l.modifier.clone(), l.head.clone())).collect()
    }

    fn column(&self, w: &str) -> Option<usize> {
        self.vocab.iter().position(|v| v == w)
    }

    fn in_slice<'a>(&'a self, decades: &'a [u16]) -> impl Iterator<Item = &'a ToyLine> + 'a {
        self.lines.iter().filter(move |l| decades.contains(&l.decade()))
    }

    fn add_contexts(&self, line: &ToyLine, v: &mut [f64], extra: Option<&str>) {
        for c in line.contexts.iter().map(String::as_str).chain(extra) {
            if let Some(j) = self.column(c) {
                v[j] += line.count as f64;
            }
        }
    }

    /// Dense vector of a compound bigram.
    pub fn bigram_vector(&self, c: &Compound, decades: &[u16]) -> Option<Vec<f64>> {
        let mut v = vec![0.0; self.vocab.len()];
        let mut seen = false;
        for l in self.in_slice(decades).filter(|l| l.modifier == c.modifier && l.head == c.head) {
            seen = true;
            self.add_contexts(l, &mut v, None);
        }
        seen.then_some(v)
    }

    /// Dense role vector of a constituent. Role vectors never see the
    /// partner; standalone vectors see it as an ordinary context.
    pub fn constituent_vector(&self, lexeme: &str, modifier_side: bool, standalone: bool, decades: &[u16]) -> Option<Vec<f64>> {
        let mut v = vec![0.0; self.vocab.len()];
        let mut seen = false;
        for l in self.in_slice(decades) {
            let mine = if modifier_side { &l.modifier } else { &l.head };
            let hit = if standalone { &l.modifier == lexeme || &l.head == lexeme } else { mine == lexeme };
            if !hit {
                continue;
            }
            seen = true;
            if standalone {
                for (me, other) in [(&l.modifier, &l.head), (&l.head, &l.modifier)] {
                    if me == lexeme {
                        self.add_contexts(l, &mut v, Some(other));
                    }
                }
            } else {
                self.add_contexts(l, &mut v, None);
            }
        }
        seen.then_some(v)
    }

    /// The six compound features, brute force.
    pub fn features(&self, c: &Compound, decades: &[u16], standalone: bool) -> [Option<f64>; 6] {
        let mut n_comp = 0;
        let mut n_mod = 0;
        let mut n_head = 0;
        let mut n = 0;
        for l in self.in_slice(decades) {
            n += l.count;
            if l.modifier == c.modifier {
                n_mod += l.count;
            }
            if l.head == c.head {
                n_head += l.count;
            }
            if l.modifier == c.modifier && l.head == c.head {
                n_comp += l.count;
            }
        }
        if n_comp == 0 {
            return [None; 6];
        }
        let t = Table::from_marginals(n_comp, n_mod, n_head, n);
        let b = self.bigram_vector(c, decades);
        let m = self.constituent_vector(&c.modifier, true, standalone, decades);
        let h = self.constituent_vector(&c.head, false, standalone, decades);
        let sim = |a: &Option<Vec<f64>>, b: &Option<Vec<f64>>| match (a, b) {
            (Some(a), Some(b)) => cosine(a, b),
            _ => None,
        };
        [Some(ppmi(&t)), Some(llr(&t)), Some(lmi(&t)), sim(&b, &h), sim(&b, &m), sim(&m, &h)]
    }
}

/// Mean and population standard deviation of the defined values.
pub fn mean_std(values: &[Option<f64>]) -> (Option<f64>, Option<f64>) {
    let xs: Vec<f64> = values.iter().flatten().copied().collect();
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (Some(mean), Some(var.sqrt()))
}

// ---- SVD ----

/// Relative Frobenius error of the best rank-k approximation, from the
/// full dense SVD.
pub fn optimal_rank_k_error(a: &DMatrix<f64>, k: usize) -> f64 {
    let s = a.clone().singular_values();
    let mut sv: Vec<f64> = s.iter().copied().collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let tail: f64 = sv.iter().skip(k).map(|x| x * x).sum();
    let all: f64 = sv.iter().map(|x| x * x).sum();
    (tail / all).sqrt()
}

pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sv
}

pub fn rel_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm()
}

pub fn random_counts(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        if rng.random_bool(density) {
            rng.random_range(1..20) as f64
        } else {
            0.0
        }
    })
}

// ---- neural gradient check ----

pub fn random_seq(rng: &mut ChaCha8Rng, len: usize, k: usize) -> Vec<Vec<f64>> {
    (0..len)
        .map(|t| {
            if t % 4 == 1 {
                vec![0.0; k]
            } else {
                (0..k).map(|_| rng.random_range(-1.0..1.0)).collect()
            }
        })
        .collect()
}

fn example_loss(model: &NnmModel<f64>, m: &[Vec<f64>], h: &[Vec<f64>], label: bool) -> f64 {
    let y = model.score(m, h).unwrap();
    let z = if label { -y } else { y };
    (1.0 + z.exp()).ln()
}

/// Worst relative disagreement between backprop and central differences.
pub fn max_relative_gradient_error(model: &NnmModel<f64>, m: &[Vec<f64>], h: &[Vec<f64>], label: bool) -> f64 {
    let (y, cache) = model.forward(m, h).unwrap();
    let p = 1.0 / (1.0 + (-y).exp());
    let dy = if label { p - 1.0 } else { p };
    let mut grad = model.zeros_like();
    model.backward(&cache, dy, &mut grad);
    let analytic = grad.flat();

    let base = model.flat();
    let step = 1e-5;
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        let mut plus = base.clone();
        plus[i] += step;
        probe.set_flat(&plus);
        let lp = example_loss(&probe, m, h, label);
        let mut minus = base.clone();
        minus[i] -= step;
        probe.set_flat(&minus);
        let lm = example_loss(&probe, m, h, label);
        let numeric = (lp - lm) / (2.0 * step);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}

// ---- sampling ----

/// Random positives over a grid of constituents plus extra attested pairs
/// that never appear as positives.
pub fn sampling_fixture(seed: u64, n_positives: usize) -> (Vec<Compound>, BTreeSet<Compound>, Vec<String>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mods: Vec<String> = (0..80).map(|i| format!("mod{i}")).collect();
    let heads: Vec<String> = (0..80).map(|i| format!("head{i}")).collect();
    let mut attested = BTreeSet::new();
    let mut positives = BTreeMap::new();
    while positives.len() < n_positives {
        let c = Compound::new(mods[rng.random_range(0..80)].clone(), heads[rng.random_range(0..80)].clone());
        positives.insert(c.clone(), ());
        attested.insert(c);
    }
    for _ in 0..n_positives {
        attested.insert(Compound::new(mods[rng.random_range(0..80)].clone(), heads[rng.random_range(0..80)].clone()));
    }
    (positives.into_keys().collect(), attested, mods, heads)
}

// ---- DFM features against the brute-force oracle ----

pub const TOL: f64 = 1e-9;

fn same(a: f64, b: Option<f64>) -> bool {
    match b {
        None => compounding::gbdt::is_missing(a),
        Some(b) => (a - b).abs() <= TOL,
    }
}

/// Compares every compound feature and every constituent aggregate of one
/// toy corpus; returns the number of values compared.
pub fn check_dfm_against_oracle(seed: u64) -> Result<usize, String> {
    use compounding::corpus::{CorpusIndex, IngestOptions};
    use compounding::decade::DecadeLayout;
    use compounding::dfm::{compound_features, DfmFeatures, SliceCounts};
    use compounding::vectors::{build_matrices, ContextAspect, Slice, TimeAspect};

    let toy = toy_corpus(seed);
    let records = toy.records();
    let vocab = toy.vocabulary();
    let layout = DecadeLayout::default();
    let index = CorpusIndex::from_records(&records, &[], &IngestOptions::default());
    let compounds = toy.compounds();
    let training: Vec<u16> = layout.training_decades().iter().map(|d| d.0).collect();
    let mut compared = 0;
    for context in ContextAspect::ALL {
        let standalone = context == ContextAspect::CompoundAgnostic;
        for time in TimeAspect::ALL {
            let set = build_matrices(&records, &vocab, context, time, &layout);
            let mut oracle_slices = Vec::new();
            for m in &set.matrices {
                let decades = match m.slice {
                    Slice::Decade(d) => vec![d.0],
                    Slice::All => training.clone(),
                };
                let counts = SliceCounts::from_counts(&index.counts, |d| decades.contains(&d.0));
                let mut per_compound = BTreeMap::new();
                for c in &compounds {
                    let got = compound_features(c, &counts, m, context);
                    let want = toy.features(c, &decades, standalone);
                    for i in 0..6 {
                        if !close(got.0[i], want[i], TOL) {
                            return Err(format!(
                                "seed {seed} {context}/{time} slice {} {} feature {i}: {:?} vs {:?}",
                                m.slice,
                                c.bigram(),
                                got.0[i],
                                want[i]
                            ));
                        }
                        compared += 1;
                    }
                    per_compound.insert(c.clone(), want);
                }
                oracle_slices.push(per_compound);
            }

            let dfm = DfmFeatures::build(&compounds, &index.counts, &set, &layout, true);
            for c in &compounds {
                let row = dfm.row(&c.modifier, &c.head).ok_or("missing DFM row")?;
                let mut want = Vec::new();
                for modifier_side in [true, false] {
                    for per in &oracle_slices {
                        for i in 0..6 {
                            let vals: Vec<Option<f64>> = per
                                .iter()
                                .filter(|(k, _)| if modifier_side { k.modifier == c.modifier } else { k.head == c.head })
                                .map(|(_, f)| f[i])
                                .collect();
                            let (m, s) = mean_std(&vals);
                            want.push(m);
                            want.push(s);
                        }
                    }
                }
                if row.len() != want.len() {
                    return Err(format!("seed {seed}: DFM row has {} values, oracle {}", row.len(), want.len()));
                }
                for (j, (a, b)) in row.iter().zip(&want).enumerate() {
                    if !same(*a, *b) {
                        return Err(format!("seed {seed} {context}/{time} {} column {j}: {a} vs {b:?}", c.bigram()));
                    }
                    compared += 1;
                }
            }
        }
    }
    Ok(compared)
}

/// Library association measures against the contingency-table oracle on
/// random counts.
pub fn check_association_fuzz(seed: u64) -> Result<(), String> {
    use compounding::dfm::{self, AssociationCounts};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_comp = rng.random_range(1..200u64);
    let n_mod = n_comp + rng.random_range(0..2000);
    let n_head = n_comp + rng.random_range(0..2000);
    let n = n_mod + n_head - n_comp + rng.random_range(0..100_000);
    let c = AssociationCounts::new(n_comp, n_mod, n_head, n);
    let t = Table::from_marginals(n_comp, n_mod, n_head, n);
    let checks = [
        ("ppmi", dfm::ppmi(&c), ppmi(&t)),
        ("llr", dfm::llr(&c), llr(&t)),
        ("lmi", dfm::lmi(&c), lmi(&t)),
    ];
    for (name, got, want) in checks {
        if !close(got, Some(want), TOL) {
            return Err(format!("{name}{:?}: {got:?} vs {want}", (n_comp, n_mod, n_head, n)));
        }
    }
    let dims = rng.random_range(1..30);
    let u: Vec<f64> = (0..dims).map(|_| rng.random_range(-5.0..5.0)).collect();
    let v: Vec<f64> = (0..dims).map(|_| rng.random_range(-5.0..5.0)).collect();
    if !close(dfm::cosine(&u, &v), cosine(&u, &v), TOL) {
        return Err(format!("cosine {u:?} {v:?}"));
    }
    Ok(())
}

// ---- sampling invariants ----

/// Counts (datasets, negatives) checked; fails on the first violation.
pub fn check_sampling(seed: u64, n_datasets: usize, n_positives: usize) -> Result<(usize, usize), String> {
    use compounding::sampling::{assemble_datasets, ConstituentPool, Corruption, Scenario};
    use std::collections::HashSet;

    let (positives, attested, mods, heads) = sampling_fixture(seed, n_positives);
    let forbidden: HashSet<Compound> = attested.iter().cloned().collect();
    let head_pool = ConstituentPool::uniform(heads);
    let mod_pool = ConstituentPool::uniform(mods);
    let mut negatives = 0;
    let mut datasets = 0;
    for scenario in [Scenario::CorruptHead, Scenario::CorruptModifier] {
        let sets = assemble_datasets(&positives, scenario, n_datasets, seed, &head_pool, &mod_pool, &forbidden)
            .map_err(|e| e.to_string())?;
        let again = assemble_datasets(&positives, scenario, n_datasets, seed, &head_pool, &mod_pool, &forbidden)
            .map_err(|e| e.to_string())?;
        if sets != again {
            return Err(format!("{scenario}: datasets differ between identical runs"));
        }
        for d in &sets {
            datasets += 1;
            let pos: Vec<_> = d.positives().collect();
            let neg: Vec<_> = d.negatives().collect();
            if pos.len() != neg.len() || pos.len() != d.pairs.len() {
                return Err(format!("seed {}: {} positives, {} negatives", d.seed, pos.len(), neg.len()));
            }
            if pos.len() + d.dropped.len() != positives.len() {
                return Err(format!("seed {}: positives lost", d.seed));
            }
            for &(p, n) in &d.pairs {
                let (p, n) = (&d.tuples[p], &d.tuples[n]);
                negatives += 1;
                if forbidden.contains(&n.compound()) {
                    return Err(format!("negative {} is attested", n.compound().bigram()));
                }
                let preserved = match scenario {
                    Scenario::CorruptHead => {
                        n.corruption == Corruption::CorruptHead && n.modifier == p.modifier && n.head != p.head
                    }
                    Scenario::CorruptModifier => {
                        n.corruption == Corruption::CorruptModifier && n.head == p.head && n.modifier != p.modifier
                    }
                };
                if !preserved {
                    return Err(format!("{scenario}: {} corrupted to {}", p.compound().bigram(), n.compound().bigram()));
                }
            }
            let distinct: HashSet<_> = neg.iter().map(|t| t.compound()).collect();
            if distinct.len() != neg.len() {
                return Err(format!("seed {}: duplicate negatives", d.seed));
            }
        }
        if sets.windows(2).any(|w| w[0].tuples == w[1].tuples) {
            return Err(format!("{scenario}: consecutive seeds produced the same dataset"));
        }
    }
    Ok((datasets, negatives))
}

// ---- pipeline fixtures ----

/// Small, fast settings for pipeline tests on the tiny synthetic corpus.
pub fn tiny_config() -> compounding::config::PipelineConfig {
    compounding::config::PipelineConfig {
        dims: 6,
        datasets: 2,
        epochs: 3,
        hidden: 8,
        lstm_hidden: 4,
        gbdt_estimators: 20,
        tune_learning_rate: false,
        ..compounding::config::PipelineConfig::synthetic()
    }
}

/// Corpus, matrices and embeddings for every aspect pair.
pub fn synthetic_artifacts(
    synth: &compounding::synth::SynthCorpus,
    config: &compounding::config::PipelineConfig,
) -> compounding::harness::Artifacts {
    use compounding::vectors::{ContextAspect, TimeAspect};
    let index = compounding::corpus::CorpusIndex::from_records(&synth.fivegrams, &synth.unigrams, &config.ingest_options().unwrap());
    let aspects: Vec<_> = ContextAspect::ALL
        .into_iter()
        .flat_map(|c| TimeAspect::ALL.into_iter().map(move |t| (c, t)))
        .collect();
    compounding::harness::Artifacts::build(&synth.fivegrams, index, config, &aspects).unwrap()
}

/// The report, summary and threshold CSVs of a grid run.
pub fn report_csvs(result: &compounding::harness::GridResult) -> [Vec<u8>; 3] {
    use compounding::harness::{summarize, write_report_csv, write_summary_csv, write_thresholds_csv};
    let mut report = Vec::new();
    write_report_csv(&result.outcomes, &mut report).unwrap();
    let mut summary = Vec::new();
    write_summary_csv(&summarize(&result.outcomes), &mut summary).unwrap();
    let mut thresholds = Vec::new();
    write_thresholds_csv(&result.outcomes, &mut thresholds).unwrap();
    [report, summary, thresholds]
}
