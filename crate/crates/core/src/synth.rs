//! Synthetic ngram corpus with planted compounding rules.
//!
//! Every modifier and head has a position on a high-dimensional sphere of
//! meanings, scattered around the centre of its semantic class. A compound
//! is plausible iff the two positions lie within a fixed angle of each
//! other, except for planted class pairs: material modifiers always combine
//! with artifact heads and animal modifiers never with abstraction heads.
//! Context words are spread over the sphere too, and each constituent
//! prefers the ones near its position. Compounds are born in a given decade
//! and stay in use afterwards, and the material family grows in usage
//! across decades.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{lemmatise_head, NgramRecord, Pos, Token};
use crate::decade::{Decade, DecadeLayout};

/// Modifier classes with the longitude and latitude of their centre in the
/// first three latent dimensions.
const MODIFIER_CLASSES: [(&str, f64, f64, [&str; 8]); 6] = [
    ("material", 0.0, 0.0, ["iron", "copper", "steel", "glass", "brass", "timber", "clay", "silver"]),
    ("food", 60.0, 30.0, ["pepper", "sugar", "butter", "bread", "cheese", "coffee", "tea", "flour"]),
    ("animal", 120.0, -30.0, ["horse", "cattle", "sheep", "goat", "pig", "hen", "duck", "goose"]),
    ("person", 180.0, 30.0, ["king", "farmer", "soldier", "sailor", "mother", "teacher", "doctor", "widow"]),
    ("weather", 240.0, -30.0, ["storm", "rain", "snow", "frost", "wind", "thunder", "fog", "hail"]),
    ("plant", 300.0, 30.0, ["cotton", "flax", "hemp", "oak", "pine", "cedar", "willow", "bamboo"]),
];

const HEAD_CLASSES: [(&str, f64, f64, [&str; 8]); 6] = [
    ("artifact", 0.0, 0.0, ["mill", "lamp", "ramp", "hammer", "knife", "wheel", "bell", "needle"]),
    ("container", 30.0, 15.0, ["jar", "box", "pot", "bottle", "basket", "barrel", "bucket", "crate"]),
    ("process", 75.0, 35.0, ["making", "grinding", "baking", "brewing", "weaving", "drying", "testing", "cutting"]),
    ("building", 125.0, -25.0, ["barn", "shed", "house", "stable", "tower", "hall", "cottage", "kennel"]),
    ("abstraction", 210.0, 0.0, ["theory", "doctrine", "principle", "notion", "policy", "duty", "virtue", "law"]),
    ("garment", 300.0, 30.0, ["coat", "hat", "shirt", "cloak", "glove", "boot", "scarf", "apron"]),
];

/// Class pairs that are plausible regardless of position.
pub const ALWAYS: [(&str, &str); 1] = [("material", "artifact")];
/// Class pairs that are implausible regardless of position.
pub const NEVER: [(&str, &str); 1] = [("animal", "abstraction")];

/// Modifier class whose usage ramps up over time.
pub const TREND_CLASS: &str = "material";

const SYLLABLES: [&str; 20] = [
    "ba", "ko", "ri", "tu", "me", "la", "no", "vi", "pe", "da", "zo", "fi", "gu", "ha", "je", "mo", "ru", "te",
    "wa", "ni",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub modifiers_per_class: usize,
    pub heads_per_class: usize,
    /// Compounds drawn per modifier from its compatible heads.
    pub compounds_per_modifier: usize,
    /// Standalone 5-gram lines per constituent and decade.
    pub standalone_lines: usize,
    /// Minimum 5-gram lines per living compound and decade.
    pub compound_lines: usize,
    /// Context words spread over the sphere, per side.
    pub context_words: usize,
    /// How sharply constituents prefer nearby context words.
    pub concentration: f64,
    pub general_words: usize,
    /// Dimension of the space of meanings, at least 3.
    pub latent_dims: usize,
    /// Scale of the Gaussian scatter around a class centre, relative to the
    /// unit centre.
    pub class_spread: f64,
    /// Ratio between the scatter of consecutive latent dimensions.
    pub scatter_decay: f64,
    /// Largest angle in degrees between the constituents of a plausible
    /// compound.
    pub width: f64,
    pub validation_share: f64,
    pub test_share: f64,
    /// Usage multiplier of the trend class in the last decade.
    pub trend: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 2024,
            modifiers_per_class: 25,
            heads_per_class: 25,
            compounds_per_modifier: 20,
            standalone_lines: 12,
            compound_lines: 2,
            context_words: 60,
            concentration: 6.0,
            general_words: 24,
            latent_dims: 8,
            class_spread: 1.0,
            scatter_decay: 1.0,
            width: 60.0,
            validation_share: 0.09,
            test_share: 0.13,
            trend: 3.0,
        }
    }
}

impl SynthConfig {
    /// A small corpus for fast tests.
    pub fn tiny(seed: u64) -> Self {
        SynthConfig {
            seed,
            modifiers_per_class: 6,
            heads_per_class: 6,
            compounds_per_modifier: 6,
            standalone_lines: 4,
            compound_lines: 1,
            context_words: 24,
            general_words: 8,
            ..SynthConfig::default()
        }
    }
}

/// The planted structure behind a generated corpus.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub modifier_class: BTreeMap<String, String>,
    pub head_class: BTreeMap<String, String>,
    /// Unit vectors on the sphere.
    pub modifier_position: BTreeMap<String, Vec<f64>>,
    pub head_position: BTreeMap<String, Vec<f64>>,
    pub width: f64,
    /// Birth decade of every compound in use, keyed "modifier head".
    pub births: BTreeMap<String, u16>,
}

/// Angle in degrees between two unit vectors.
pub fn angular_distance(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0).acos().to_degrees()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalise(mut v: Vec<f64>) -> Vec<f64> {
    let n = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// Unit vector at a longitude and latitude in degrees, padded with zeros.
fn from_lon_lat(lon: f64, lat: f64, dims: usize) -> Vec<f64> {
    let (lon, lat) = (lon.to_radians(), lat.to_radians());
    let mut v = vec![0.0; dims];
    v[..3].copy_from_slice(&[lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]);
    v
}

fn gaussian(dims: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..dims).map(|_| rng.sample(StandardNormal)).collect()
}

impl GroundTruth {
    /// Whether (modifier, head) is plausible under the planted rule.
    pub fn is_plausible(&self, modifier: &str, head: &str) -> Option<bool> {
        let m = self.modifier_position.get(modifier)?;
        let h = self.head_position.get(head)?;
        let classes = (self.modifier_class.get(modifier)?.as_str(), self.head_class.get(head)?.as_str());
        Some(rule(classes, m, h, self.width))
    }
}

fn rule(classes: (&str, &str), m: &[f64], h: &[f64], width: f64) -> bool {
    if ALWAYS.contains(&classes) {
        true
    } else if NEVER.contains(&classes) {
        false
    } else {
        angular_distance(m, h) < width
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub fivegrams: Vec<NgramRecord>,
    pub unigrams: Vec<NgramRecord>,
    pub truth: GroundTruth,
}

struct WordMaker {
    used: BTreeSet<String>,
}

impl WordMaker {
    fn make(&mut self, rng: &mut ChaCha8Rng) -> String {
        loop {
            let n = rng.random_range(2..=3);
            let w: String = (0..n).map(|_| *SYLLABLES.choose(rng).expect("syllables")).collect();
            if lemmatise_head(&w) == w && self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    fn fill(&mut self, seeds: &[&str], n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
        let mut out: Vec<String> = seeds.iter().take(n).map(|s| s.to_string()).collect();
        while out.len() < n {
            out.push(self.make(rng));
        }
        out
    }
}

/// A constituent with its class, position and preferred context words.
struct Lexeme {
    word: String,
    class: usize,
    position: Vec<f64>,
    contexts: WeightedIndex<f64>,
}

/// Context words scattered uniformly over the sphere.
struct Ring {
    words: Vec<String>,
    positions: Vec<Vec<f64>>,
}

impl Ring {
    fn new(n: usize, dims: usize, maker: &mut WordMaker, rng: &mut ChaCha8Rng) -> Self {
        let words = (0..n).map(|_| maker.make(rng)).collect();
        let positions = (0..n).map(|_| normalise(gaussian(dims, rng))).collect();
        Ring { words, positions }
    }

    fn preferences(&self, position: &[f64], concentration: f64) -> WeightedIndex<f64> {
        let w = self.positions.iter().map(|p| (concentration * dot(p, position)).exp());
        WeightedIndex::new(w).expect("positive weights")
    }

    fn pick(&self, lexeme: &Lexeme, rng: &mut ChaCha8Rng) -> String {
        self.words[lexeme.contexts.sample(rng)].clone()
    }
}

fn lexemes(
    classes: &[(&str, f64, f64, [&str; 8])],
    per_class: usize,
    ring: &Ring,
    config: &SynthConfig,
    maker: &mut WordMaker,
    rng: &mut ChaCha8Rng,
) -> Vec<Lexeme> {
    let mut out = Vec::new();
    let raw: Vec<f64> = (0..config.latent_dims).map(|i| config.scatter_decay.powi(i as i32)).collect();
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scales: Vec<f64> = raw.iter().map(|x| config.class_spread * x / norm).collect();
    for (c, (_, lon, lat, seeds)) in classes.iter().enumerate() {
        let centre = from_lon_lat(*lon, *lat, config.latent_dims);
        for word in maker.fill(seeds, per_class, rng) {
            let scatter = gaussian(config.latent_dims, rng);
            let position = normalise(
                centre
                    .iter()
                    .zip(&scatter)
                    .zip(&scales)
                    .map(|((c, g), sd)| c + sd * g)
                    .collect(),
            );
            let contexts = ring.preferences(&position, config.concentration);
            out.push(Lexeme {
                word,
                class: c,
                position,
                contexts,
            });
        }
    }
    out
}

fn tok(surface: &str, pos: Pos) -> Token {
    Token::new(surface, pos)
}

/// Generates the corpus deterministically from `config.seed` over the
/// default decade layout (1800s to 2000s).
pub fn generate(config: &SynthConfig) -> SynthCorpus {
    let layout = DecadeLayout::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut maker = WordMaker {
        used: MODIFIER_CLASSES
            .iter()
            .chain(HEAD_CLASSES.iter())
            .flat_map(|(_, _, _, ws)| ws.iter().map(|w| w.to_string()))
            .collect(),
    };
    assert!(config.latent_dims >= 3, "latent_dims must be at least 3");
    let modifier_ring = Ring::new(config.context_words, config.latent_dims, &mut maker, &mut rng);
    let head_ring = Ring::new(config.context_words, config.latent_dims, &mut maker, &mut rng);
    let general: Vec<String> = (0..config.general_words).map(|_| maker.make(&mut rng)).collect();
    let modifiers = lexemes(&MODIFIER_CLASSES, config.modifiers_per_class, &modifier_ring, config, &mut maker, &mut rng);
    let heads = lexemes(&HEAD_CLASSES, config.heads_per_class, &head_ring, config, &mut maker, &mut rng);

    let mut truth = GroundTruth {
        width: config.width,
        ..GroundTruth::default()
    };
    for m in &modifiers {
        truth.modifier_class.insert(m.word.clone(), MODIFIER_CLASSES[m.class].0.to_string());
        truth.modifier_position.insert(m.word.clone(), m.position.clone());
    }
    for h in &heads {
        truth.head_class.insert(h.word.clone(), HEAD_CLASSES[h.class].0.to_string());
        truth.head_position.insert(h.word.clone(), h.position.clone());
    }

    let decades: Vec<Decade> = {
        let mut d = layout.training_decades();
        d.push(layout.validation());
        d.push(layout.test());
        d
    };
    let training = layout.training_decades();
    let n_decades = decades.len();

    // Compound inventory and birth decades: (modifier, head, birth).
    let mut compounds: Vec<(usize, usize, Decade)> = Vec::new();
    let mut head_has_training: HashMap<usize, bool> = HashMap::new();
    for (mi, m) in modifiers.iter().enumerate() {
        let mut options: Vec<usize> = (0..heads.len())
            .filter(|&hi| {
                let h = &heads[hi];
                let classes = (MODIFIER_CLASSES[m.class].0, HEAD_CLASSES[h.class].0);
                rule(classes, &m.position, &h.position, config.width)
            })
            .collect();
        options.shuffle(&mut rng);
        options.truncate(config.compounds_per_modifier);
        for (j, hi) in options.into_iter().enumerate() {
            let birth = if j == 0 {
                training[rng.random_range(0..3)]
            } else {
                let u: f64 = rng.random();
                if u < config.test_share {
                    layout.test()
                } else if u < config.test_share + config.validation_share {
                    layout.validation()
                } else {
                    training[rng.random_range(0..training.len())]
                }
            };
            if layout.is_training(birth) {
                head_has_training.insert(hi, true);
            }
            compounds.push((mi, hi, birth));
        }
    }
    // Every head used in a compound gets at least one training compound.
    for c in compounds.iter_mut() {
        if !head_has_training.get(&c.1).copied().unwrap_or(false) {
            c.2 = training[rng.random_range(0..3)];
            head_has_training.insert(c.1, true);
        }
    }

    let trend = |class: Option<usize>, t: usize| -> f64 {
        if class.is_some_and(|c| MODIFIER_CLASSES[c].0 == TREND_CLASS) {
            1.0 + (config.trend - 1.0) * t as f64 / (n_decades - 1) as f64
        } else {
            1.0
        }
    };
    let year_in = |d: Decade, rng: &mut ChaCha8Rng| -> u16 {
        let (lo, hi) = layout.year_range();
        d.year().max(lo) + rng.random_range(0..10u16).min(hi.saturating_sub(d.year()))
    };
    let pick = |pool: &[String], rng: &mut ChaCha8Rng| -> String { pool.choose(rng).expect("pool").clone() };

    let mut fivegrams = Vec::new();
    for &(mi, hi, birth) in &compounds {
        let (m, h) = (&modifiers[mi], &heads[hi]);
        truth.births.insert(format!("{} {}", m.word, h.word), birth.year());
        for (t, &d) in decades.iter().enumerate() {
            if d < birth {
                continue;
            }
            let scale = trend(Some(m.class), t);
            let lines = ((config.compound_lines + rng.random_range(0..=2)) as f64 * scale).round() as usize;
            for _ in 0..lines.max(1) {
                let first = if rng.random_bool(0.7) {
                    modifier_ring.pick(m, &mut rng)
                } else {
                    pick(&general, &mut rng)
                };
                let after = if rng.random_bool(0.7) {
                    head_ring.pick(h, &mut rng)
                } else {
                    pick(&general, &mut rng)
                };
                let last = match rng.random_range(0..3) {
                    0 => modifier_ring.pick(m, &mut rng),
                    1 => head_ring.pick(h, &mut rng),
                    _ => pick(&general, &mut rng),
                };
                let tokens = vec![
                    tok(&first, Pos::Adj),
                    tok(&m.word, Pos::Noun),
                    tok(&h.word, Pos::Noun),
                    tok(&after, Pos::Verb),
                    tok(&last, Pos::Adv),
                ];
                let year = year_in(d, &mut rng);
                fivegrams.push(NgramRecord::new(tokens, year, rng.random_range(3..=5)));
            }
        }
    }

    let standalone = |lex: &Lexeme, ring: &Ring, class: Option<usize>, fivegrams: &mut Vec<NgramRecord>, rng: &mut ChaCha8Rng| {
        for (t, &d) in decades.iter().enumerate() {
            let lines = (config.standalone_lines as f64 * trend(class, t)).round() as usize;
            for _ in 0..lines {
                let tokens = vec![
                    tok(&ring.pick(lex, rng), Pos::Adj),
                    tok(&lex.word, Pos::Noun),
                    tok(&ring.pick(lex, rng), Pos::Verb),
                    tok("the", Pos::Det),
                    tok(&pick(&general, rng), Pos::Adv),
                ];
                let year = year_in(d, rng);
                fivegrams.push(NgramRecord::new(tokens, year, rng.random_range(1..=3)));
            }
        }
    };
    for m in &modifiers {
        standalone(m, &modifier_ring, Some(m.class), &mut fivegrams, &mut rng);
    }
    for h in &heads {
        standalone(h, &head_ring, None, &mut fivegrams, &mut rng);
    }

    let unigrams = unigram_counts(&fivegrams);
    SynthCorpus {
        fivegrams,
        unigrams,
        truth,
    }
}

/// Unigram records aggregated per (token, year) from 5-gram records.
fn unigram_counts(fivegrams: &[NgramRecord]) -> Vec<NgramRecord> {
    let mut counts: BTreeMap<(String, Pos, u16), u64> = BTreeMap::new();
    for r in fivegrams {
        for t in &r.tokens {
            *counts.entry((t.surface.clone(), t.pos, r.year)).or_insert(0) += r.match_count;
        }
    }
    counts
        .into_iter()
        .map(|((s, p, y), n)| NgramRecord::new(vec![Token::new(s, p)], y, n))
        .collect()
}

pub const FIVEGRAM_FILE: &str = "5gram-synthetic.tsv";
pub const UNIGRAM_FILE: &str = "1gram-synthetic.tsv";
pub const TRUTH_FILE: &str = "truth.json";

impl SynthCorpus {
    /// Writes both ngram files in the corpus TSV format plus the ground
    /// truth as JSON.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        for (name, records) in [(FIVEGRAM_FILE, &self.fivegrams), (UNIGRAM_FILE, &self.unigrams)] {
            let mut w = BufWriter::new(fs::File::create(dir.join(name))?);
            for r in records {
                writeln!(w, "{}", r.to_line())?;
            }
            w.flush()?;
        }
        fs::write(
            dir.join(TRUTH_FILE),
            serde_json::to_vec_pretty(&self.truth).map_err(io::Error::other)?,
        )
    }
}
