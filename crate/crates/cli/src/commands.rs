use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use compounding::config::PipelineConfig;
use compounding::corpus::io::read_records;
use compounding::corpus::CorpusIndex;
use compounding::harness::{
    export_annotation_candidates, generate_candidates, read_scored, run_grid, score_candidates, select_cells,
    summarize, table2, write_annotations, write_report_csv, write_scored, write_summary_csv, write_thresholds_csv,
    Artifacts, AspectPair, CellSpec, GridOptions, InputBuilder, ModelKind,
};
use compounding::neural::NnmModel;
use compounding::synth::{self, SynthConfig};
use compounding::vectors::{build_matrices, build_store, ContextAspect, EmbeddingStore, MatrixSet, TimeAspect};
use serde::{Deserialize, Serialize};

use crate::args::Command;

const CORPUS_DIR: &str = "corpus";
const VECTORS_DIR: &str = "vectors";
const MODELS_DIR: &str = "models";
const REPORT_DIR: &str = "report";
const ANNOTATIONS_DIR: &str = "annotations";
const SOURCES_FILE: &str = "sources.json";
const MATRICES_FILE: &str = "matrices.json";
const STORE_DIR: &str = "store";
const SCORED_FILE: &str = "scored.csv";
const ANNOTATION_FILE: &str = "annotations.csv";

/// Corpus files an ingest ran over, so later stages can reread them.
#[derive(Debug, Serialize, Deserialize)]
struct Sources {
    fivegrams: Vec<PathBuf>,
    unigrams: Vec<PathBuf>,
}

pub fn dispatch(command: &Command, out: &Path, config: &PipelineConfig) -> anyhow::Result<()> {
    match command {
        Command::Ingest { fivegrams, unigrams } => ingest(out, config, fivegrams, unigrams),
        Command::Vectors { context, time } => vectors(out, config, context, time),
        Command::Evaluate {
            all,
            model,
            context,
            time,
            corruption,
        } => {
            if !all && model.is_empty() && context.is_empty() && time.is_empty() && corruption.is_empty() {
                bail!("select cells with --model/--context/--time/--corruption, or pass --all");
            }
            evaluate(out, config, select_cells(model, context, time, corruption))
        }
        Command::Generate {
            context,
            time,
            corruption,
        } => generate(out, config, *context, *time, *corruption),
        Command::ExportAnnotations { scored } => export(out, config, scored.as_deref()),
        Command::Synth { synth_seed, tiny } => synthesize(out, *synth_seed, *tiny),
    }
}

fn write_snapshot(dir: &Path, config: &PipelineConfig) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), toml::to_string(config)?)?;
    Ok(())
}

fn absolute(p: &Path) -> anyhow::Result<PathBuf> {
    fs::canonicalize(p).with_context(|| format!("cannot read {}", p.display()))
}

fn ingest(out: &Path, config: &PipelineConfig, fivegrams: &[PathBuf], unigrams: &[PathBuf]) -> anyhow::Result<()> {
    let sources = Sources {
        fivegrams: fivegrams.iter().map(|p| absolute(p)).collect::<anyhow::Result<_>>()?,
        unigrams: unigrams.iter().map(|p| absolute(p)).collect::<anyhow::Result<_>>()?,
    };
    let index = CorpusIndex::from_files(&sources.fivegrams, &sources.unigrams, &config.ingest_options()?)?;
    let s = &index.stats;
    if s.compound_types == 0 {
        bail!(
            "no noun-noun compounds found in {} 5-gram lines ({} malformed); \
             compounds are two adjacent nouns flanked by non-nouns",
            s.fivegram_lines,
            s.malformed_lines
        );
    }
    let dir = out.join(CORPUS_DIR);
    index.save(&dir)?;
    fs::write(dir.join(SOURCES_FILE), serde_json::to_vec_pretty(&sources)?)?;
    write_snapshot(&dir, config)?;
    println!(
        "{} 5-gram lines, {} 1-gram lines, {} malformed; {} compound types ({} tokens)",
        s.fivegram_lines, s.unigram_lines, s.malformed_lines, s.compound_types, s.compound_tokens
    );
    println!(
        "splits: {} train, {} validation, {} test; {} context words",
        index.splits.train.len(),
        index.splits.validation.len(),
        index.splits.test.len(),
        index.vocabulary.len()
    );
    Ok(())
}

fn load_index(out: &Path) -> anyhow::Result<CorpusIndex> {
    let dir = out.join(CORPUS_DIR);
    if !dir.join(SOURCES_FILE).exists() {
        bail!("missing ingest artifacts in {}; run `compounding ingest` first", dir.display());
    }
    CorpusIndex::load(&dir).context("loading ingest artifacts")
}

fn aspect_dir(out: &Path, (context, time): AspectPair) -> PathBuf {
    out.join(VECTORS_DIR).join(format!("{}-{}", context.as_str(), time.as_str()))
}

fn or_all<T: Copy>(chosen: &[T], all: &[T]) -> Vec<T> {
    if chosen.is_empty() {
        all.to_vec()
    } else {
        chosen.to_vec()
    }
}

fn vectors(out: &Path, config: &PipelineConfig, contexts: &[ContextAspect], times: &[TimeAspect]) -> anyhow::Result<()> {
    let index = load_index(out)?;
    let sources: Sources = serde_json::from_slice(&fs::read(out.join(CORPUS_DIR).join(SOURCES_FILE))?)?;
    let layout = config.layout()?;
    let mut records = Vec::new();
    for path in &sources.fivegrams {
        let (mut r, _) = read_records(path, 5).with_context(|| format!("rereading {}", path.display()))?;
        records.append(&mut r);
    }
    for context in or_all(contexts, &ContextAspect::ALL) {
        for time in or_all(times, &TimeAspect::ALL) {
            let set = build_matrices(&records, &index.vocabulary, context, time, &layout);
            let store = build_store(&set, config.dims, config.weighting, config.svd_seed)
                .with_context(|| format!("{context} / {time}: cannot build rank-{} embeddings", config.dims))?;
            let dir = aspect_dir(out, (context, time));
            fs::create_dir_all(&dir)?;
            set.save(&dir.join(MATRICES_FILE))?;
            store.save(&dir.join(STORE_DIR))?;
            write_snapshot(&dir, config)?;
            let rows: usize = set.matrices.iter().map(|m| m.n_rows()).sum();
            println!("{context} / {time}: {} slices, {rows} rows, k = {}", store.tables().len(), config.dims);
        }
    }
    Ok(())
}

fn load_store(out: &Path, aspects: AspectPair) -> anyhow::Result<EmbeddingStore> {
    let dir = aspect_dir(out, aspects);
    if !dir.join(STORE_DIR).join("manifest.json").exists() {
        bail!(
            "missing vectors for {} / {} in {}; run `compounding vectors` first",
            aspects.0,
            aspects.1,
            dir.display()
        );
    }
    EmbeddingStore::load(&dir.join(STORE_DIR)).context("loading embeddings")
}

fn load_artifacts(out: &Path, config: &PipelineConfig, aspects: &[AspectPair]) -> anyhow::Result<Artifacts> {
    let index = load_index(out)?;
    let mut matrices = BTreeMap::new();
    let mut stores = BTreeMap::new();
    for &a in aspects {
        stores.insert(a, load_store(out, a)?);
        let path = aspect_dir(out, a).join(MATRICES_FILE);
        matrices.insert(a, MatrixSet::load(&path).with_context(|| format!("loading {}", path.display()))?);
    }
    Ok(Artifacts {
        layout: config.layout()?,
        index,
        matrices,
        stores,
    })
}

fn evaluate(out: &Path, config: &PipelineConfig, cells: Vec<CellSpec>) -> anyhow::Result<()> {
    let mut aspects: Vec<AspectPair> = cells.iter().map(|c| c.aspects()).collect();
    aspects.sort();
    aspects.dedup();
    let artifacts = load_artifacts(out, config, &aspects)?;
    let options = GridOptions {
        cells,
        model_dir: Some(out.join(MODELS_DIR)),
    };
    let result = run_grid(&artifacts, config, &options)?;
    let dir = out.join(REPORT_DIR);
    fs::create_dir_all(&dir)?;
    let summary = summarize(&result.outcomes);
    write_report_csv(&result.outcomes, BufWriter::new(fs::File::create(dir.join("report.csv"))?))?;
    write_summary_csv(&summary, BufWriter::new(fs::File::create(dir.join("summary.csv"))?))?;
    write_thresholds_csv(&result.outcomes, BufWriter::new(fs::File::create(dir.join("thresholds.csv"))?))?;
    let table = table2(&summary);
    fs::write(dir.join("table.txt"), &table)?;
    fs::write(dir.join("metadata.json"), serde_json::to_vec_pretty(&result.metadata)?)?;
    write_snapshot(&dir, config)?;
    print!("{table}");
    println!(
        "{} cells x {} seeds in {:.1}s; reports in {}",
        summary.len(),
        config.datasets,
        result.metadata.elapsed_seconds,
        dir.display()
    );
    Ok(())
}

fn generate(
    out: &Path,
    config: &PipelineConfig,
    context: ContextAspect,
    time: TimeAspect,
    corruption: compounding::sampling::Scenario,
) -> anyhow::Result<()> {
    let spec = CellSpec::new(ModelKind::Nnm, context, time, corruption);
    let model_dir = out.join(MODELS_DIR).join(spec.id());
    if !model_dir.join("model.json").exists() {
        bail!(
            "missing trained model {}; run `compounding evaluate` on {spec} first",
            model_dir.display()
        );
    }
    let model: NnmModel<f32> = NnmModel::load(&model_dir).context("loading model")?;
    let index = load_index(out)?;
    let store = load_store(out, (context, time))?;
    let layout = config.layout()?;
    let inputs = InputBuilder::new(&store, &layout);
    let candidates = generate_candidates(&index, &layout, config.candidate_budget);
    let scored = score_candidates(&model, &inputs, &candidates);
    let dir = out.join(ANNOTATIONS_DIR);
    fs::create_dir_all(&dir)?;
    write_scored(&scored, BufWriter::new(fs::File::create(dir.join(SCORED_FILE))?))?;
    let sheet = export_annotation_candidates(&scored, &index.counts.attested(), config.top);
    write_annotations(&sheet, BufWriter::new(fs::File::create(dir.join(ANNOTATION_FILE))?))?;
    write_snapshot(&dir, config)?;
    println!(
        "scored {} of {} candidates with {spec}; {} rows in {}",
        scored.len(),
        candidates.len(),
        sheet.len(),
        dir.join(ANNOTATION_FILE).display()
    );
    Ok(())
}

fn export(out: &Path, config: &PipelineConfig, scored: Option<&Path>) -> anyhow::Result<()> {
    let dir = out.join(ANNOTATIONS_DIR);
    let path = scored.map(Path::to_path_buf).unwrap_or_else(|| dir.join(SCORED_FILE));
    let file = fs::File::open(&path)
        .with_context(|| format!("missing scored candidates {}; run `compounding generate` first", path.display()))?;
    let scored = read_scored(file)?;
    let index = load_index(out)?;
    let sheet = export_annotation_candidates(&scored, &index.counts.attested(), config.top);
    fs::create_dir_all(&dir)?;
    write_annotations(&sheet, BufWriter::new(fs::File::create(dir.join(ANNOTATION_FILE))?))?;
    println!("{} rows in {}", sheet.len(), dir.join(ANNOTATION_FILE).display());
    Ok(())
}

fn synthesize(out: &Path, seed: u64, tiny: bool) -> anyhow::Result<()> {
    let sc = if tiny {
        SynthConfig::tiny(seed)
    } else {
        SynthConfig {
            seed,
            ..SynthConfig::default()
        }
    };
    let corpus = synth::generate(&sc);
    let dir = out.join("synthetic");
    corpus.write(&dir)?;
    let config = PipelineConfig::synthetic();
    fs::write(dir.join("config.toml"), toml::to_string(&config)?)?;
    println!(
        "{} 5-grams, {} 1-grams, {} planted compounds in {}",
        corpus.fivegrams.len(),
        corpus.unigrams.len(),
        corpus.truth.births.len(),
        dir.display()
    );
    println!(
        "next: compounding --config {0}/config.toml ingest --fivegrams {0}/{1} --unigrams {0}/{2}",
        dir.display(),
        synth::FIVEGRAM_FILE,
        synth::UNIGRAM_FILE
    );
    Ok(())
}
