//! Rule-based noun lemmatisation for compound heads.
//!
//! Suffix rules are applied until the form stops changing, so the output is
//! always a fixed point of the rules (the function is idempotent). Forms
//! shorter than three letters are never produced by suffix stripping.

/// Irregular plurals and invariant nouns. Every right-hand side is itself a
/// fixed point of the suffix rules.
const IRREGULAR: &[(&str, &str)] = &[
    ("men", "man"),
    ("women", "woman"),
    ("children", "child"),
    ("people", "person"),
    ("mice", "mouse"),
    ("lice", "louse"),
    ("geese", "goose"),
    ("teeth", "tooth"),
    ("feet", "foot"),
    ("oxen", "ox"),
    ("dice", "die"),
    ("wives", "wife"),
    ("knives", "knife"),
    ("lives", "life"),
    ("leaves", "leaf"),
    ("loaves", "loaf"),
    ("wolves", "wolf"),
    ("halves", "half"),
    ("shelves", "shelf"),
    ("selves", "self"),
    ("calves", "calf"),
    ("thieves", "thief"),
    ("sheaves", "sheaf"),
    ("indices", "index"),
    ("matrices", "matrix"),
    ("vertices", "vertex"),
    ("appendices", "appendix"),
    ("criteria", "criterion"),
    ("phenomena", "phenomenon"),
    ("analyses", "analysis"),
    ("crises", "crisis"),
    ("theses", "thesis"),
    ("hypotheses", "hypothesis"),
    ("diagnoses", "diagnosis"),
    ("oases", "oasis"),
    ("axes", "axis"),
    ("cacti", "cactus"),
    ("fungi", "fungus"),
    ("nuclei", "nucleus"),
    ("radii", "radius"),
    ("stimuli", "stimulus"),
    ("alumni", "alumnus"),
    ("series", "series"),
    ("species", "species"),
    ("news", "news"),
    ("means", "means"),
    ("gas", "gas"),
    ("gases", "gas"),
    ("lens", "lens"),
    ("lenses", "lens"),
    ("canvas", "canvas"),
    ("atlas", "atlas"),
    ("physics", "physics"),
    ("mathematics", "mathematics"),
    ("economics", "economics"),
    ("politics", "politics"),
    ("ethics", "ethics"),
    ("athletics", "athletics"),
    ("linguistics", "linguistics"),
    ("statistics", "statistics"),
    ("billiards", "billiards"),
    ("measles", "measles"),
    ("whereabouts", "whereabouts"),
];

fn irregular(word: &str) -> Option<&'static str> {
    IRREGULAR
        .iter()
        .find_map(|&(plural, lemma)| (plural == word).then_some(lemma))
}

const MIN_STEM: usize = 3;

fn strip_once(word: &str) -> Option<String> {
    if let Some(lemma) = irregular(word) {
        return (lemma != word).then(|| lemma.to_string());
    }
    if let Some(stem) = word.strip_suffix("ies") {
        if stem.len() + 1 >= MIN_STEM {
            return Some(format!("{stem}y"));
        }
    }
    if let Some(stem) = word.strip_suffix("sses") {
        return Some(format!("{stem}ss"));
    }
    if let Some(stem) = word.strip_suffix("es") {
        let sibilant = ["s", "x", "z", "ch", "sh"].iter().any(|s| stem.ends_with(s));
        if sibilant && stem.len() >= MIN_STEM {
            return Some(stem.to_string());
        }
    }
    if let Some(stem) = word.strip_suffix('s') {
        let protected = ["s", "u", "i"].iter().any(|s| stem.ends_with(s));
        if !protected && stem.len() >= MIN_STEM {
            return Some(stem.to_string());
        }
    }
    None
}

/// Lowercased singular form of a noun.
pub fn lemmatise_head(surface: &str) -> String {
    let mut word = surface.to_lowercase();
    while let Some(next) = strip_once(&word) {
        word = next;
    }
    word
}
