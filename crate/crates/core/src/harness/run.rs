use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::data::{build_datasets, constant_classifier_accuracy, Artifacts, AspectPair, InputBuilder, SeedDatasets};
use super::hygiene::{check_temporal_hygiene, HygieneReport};
use super::{CellSpec, HarnessError, ModelKind};
use crate::config::PipelineConfig;
use crate::dfm::DfmFeatures;
use crate::gbdt::{fit, TreeEnsemble};
use crate::neural::{self, Architecture, Example, NnmModel, PairSet};
use crate::sampling::{CandidateTuple, LabeledDataset, Scenario};
use crate::vectors::{Side, TimeAspect};

#[derive(Debug, Clone, Default)]
pub struct GridOptions {
    pub cells: Vec<CellSpec>,
    /// Where the models of the first seed are written, if anywhere.
    pub model_dir: Option<PathBuf>,
}

/// Test-set result of one cell on one dataset seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub spec: CellSpec,
    pub seed: u64,
    /// Accuracy at the fixed 0.5 threshold; abstentions count as errors.
    pub accuracy: f64,
    pub abstentions: usize,
    pub test_size: usize,
    /// Threshold maximising validation accuracy and the test accuracy it gives.
    pub tuned_threshold: f64,
    pub tuned_accuracy: f64,
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub corpus_sha256: String,
    pub config_sha256: String,
    pub config: PipelineConfig,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub elapsed_seconds: f64,
    pub hygiene: Vec<HygieneReport>,
    /// Scenario, seed and accuracy of the always-plausible classifier.
    pub constant_classifier: Vec<(Scenario, u64, f64)>,
    pub learning_rates: BTreeMap<String, f64>,
    pub dropped_positives: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub outcomes: Vec<CellOutcome>,
    pub metadata: RunMetadata,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn corpus_hash(artifacts: &Artifacts) -> String {
    let mut h = Sha256::new();
    for occ in artifacts.index.counts.occurrences() {
        h.update(format!("{}\t{}\t{}\t{}\n", occ.compound.modifier, occ.compound.head, occ.decade, occ.count));
    }
    hex::encode(h.finalize())
}

fn config_hash(config: &PipelineConfig) -> Result<String, HarnessError> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(config)?)))
}

/// Constituent inputs interned by lexeme.
struct PairEncoder<'a> {
    inputs: &'a InputBuilder<'a>,
    modifiers: HashMap<String, Option<usize>>,
    heads: HashMap<String, Option<usize>>,
    set: PairSet<f32>,
}

impl<'a> PairEncoder<'a> {
    fn new(inputs: &'a InputBuilder<'a>) -> Self {
        PairEncoder {
            inputs,
            modifiers: HashMap::new(),
            heads: HashMap::new(),
            set: PairSet::default(),
        }
    }

    fn intern(&mut self, lexeme: &str, side: Side) -> Option<usize> {
        let (table, store) = match side {
            Side::Modifier => (&mut self.modifiers, &mut self.set.modifiers),
            Side::Head => (&mut self.heads, &mut self.set.heads),
        };
        if let Some(i) = table.get(lexeme) {
            return *i;
        }
        let idx = self.inputs.sequence(lexeme, side).map(|seq| {
            store.push(seq);
            store.len() - 1
        });
        table.insert(lexeme.to_string(), idx);
        idx
    }

    fn example(&mut self, t: &CandidateTuple) -> Option<Example> {
        let modifier = self.intern(&t.modifier, Side::Modifier)?;
        let head = self.intern(&t.head, Side::Head)?;
        Some(Example {
            modifier,
            head,
            label: t.label.is_positive(),
        })
    }

    /// Pairs whose positive and negative both have inputs.
    fn encode(mut self, data: &LabeledDataset) -> PairSet<f32> {
        for &(p, n) in &data.pairs {
            if let (Some(pe), Some(ne)) = (self.example(&data.tuples[p]), self.example(&data.tuples[n])) {
                self.set.pairs.push([pe, ne]);
            }
        }
        self.set
    }
}

fn accuracy_at(data: &LabeledDataset, probs: &[Option<f64>], threshold: f64) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let correct = data
        .tuples
        .iter()
        .zip(probs)
        .filter(|(t, p)| matches!(p, Some(p) if (*p >= threshold) == t.label.is_positive()))
        .count();
    correct as f64 / data.len() as f64
}

/// Threshold with the highest accuracy on `data`; ties go to the threshold
/// closest to 0.5.
fn tune_threshold(data: &LabeledDataset, probs: &[Option<f64>]) -> f64 {
    let mut scored: Vec<(f64, bool)> = data
        .tuples
        .iter()
        .zip(probs)
        .filter_map(|(t, p)| p.map(|p| (p, t.label.is_positive())))
        .collect();
    if scored.is_empty() {
        return 0.5;
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let positives = scored.iter().filter(|s| s.1).count();
    // Threshold at scored[i].0 predicts positive for every item from i on.
    let at_half = scored.iter().filter(|(p, l)| (*p >= 0.5) == *l).count();
    let mut best = (at_half, 0.0f64);
    let mut best_t = 0.5;
    let mut negatives_below = 0usize;
    let mut positives_below = 0usize;
    let mut i = 0;
    while i <= scored.len() {
        let t = if i == scored.len() { scored[i - 1].0 + 1e-9 } else { scored[i].0 };
        let correct = negatives_below + (positives - positives_below);
        let dist = (t - 0.5).abs();
        if correct > best.0 || (correct == best.0 && dist < best.1) {
            best = (correct, dist);
            best_t = t;
        }
        if i == scored.len() {
            break;
        }
        let v = scored[i].0;
        while i < scored.len() && scored[i].0 == v {
            if scored[i].1 {
                positives_below += 1;
            } else {
                negatives_below += 1;
            }
            i += 1;
        }
    }
    best_t
}

fn probabilities(data: &LabeledDataset, f: &(dyn Fn(&CandidateTuple) -> Option<f64> + Sync)) -> Vec<Option<f64>> {
    data.tuples.par_iter().map(f).collect()
}

fn outcome(
    spec: CellSpec,
    data: &SeedDatasets,
    f: &(dyn Fn(&CandidateTuple) -> Option<f64> + Sync),
    learning_rate: Option<f64>,
) -> CellOutcome {
    let test = probabilities(&data.test, f);
    let validation = probabilities(&data.validation, f);
    let tuned = tune_threshold(&data.validation, &validation);
    CellOutcome {
        spec,
        seed: data.seed,
        accuracy: accuracy_at(&data.test, &test, 0.5),
        abstentions: test.iter().filter(|p| p.is_none()).count(),
        test_size: data.test.len(),
        tuned_threshold: tuned,
        tuned_accuracy: accuracy_at(&data.test, &test, tuned),
        learning_rate,
    }
}

fn nnm_probability(model: &NnmModel<f32>, inputs: &InputBuilder, t: &CandidateTuple) -> Option<f64> {
    let m = inputs.sequence(&t.modifier, Side::Modifier)?;
    let h = inputs.sequence(&t.head, Side::Head)?;
    let y = model.score(&m, &h).ok()?;
    Some(neural::probability(y as f64))
}

fn architecture(inputs: &InputBuilder, config: &PipelineConfig) -> Architecture {
    Architecture {
        input_dims: inputs.dims(),
        embedding_dims: inputs.dims(),
        hidden: config.hidden,
        lstm_hidden: inputs.is_sequential().then_some(config.lstm_hidden),
    }
}

struct NnmFit {
    model: NnmModel<f32>,
    history: neural::TrainHistory,
}

fn train_nnm(
    spec: CellSpec,
    data: &SeedDatasets,
    inputs: &InputBuilder,
    config: &PipelineConfig,
    learning_rate: f64,
) -> Result<NnmFit, HarnessError> {
    let train = PairEncoder::new(inputs).encode(&data.train);
    let validation = PairEncoder::new(inputs).encode(&data.validation);
    let model = NnmModel::init(architecture(inputs, config), data.seed);
    let (model, history) = neural::train(model, &train, Some(&validation), &config.train(learning_rate, data.seed))
        .map_err(|source| HarnessError::Neural {
            cell: spec.id(),
            source,
        })?;
    Ok(NnmFit { model, history })
}

/// Learning rate with the best validation accuracy on the first dataset;
/// diverging rates are skipped.
fn select_learning_rate(
    spec: CellSpec,
    data: &SeedDatasets,
    inputs: &InputBuilder,
    config: &PipelineConfig,
) -> Result<f64, HarnessError> {
    if !config.tune_learning_rate || config.learning_rates.is_empty() {
        return Ok(config.learning_rate);
    }
    let trials: Vec<(f64, Result<NnmFit, HarnessError>)> = config
        .learning_rates
        .par_iter()
        .map(|&lr| (lr, train_nnm(spec, data, inputs, config, lr)))
        .collect();
    let mut best: Option<(f64, f64, f64)> = None;
    let mut last_err = None;
    for (lr, fit) in trials {
        match fit {
            Ok(fit) => {
                let probs = probabilities(&data.validation, &|t| nnm_probability(&fit.model, inputs, t));
                let acc = accuracy_at(&data.validation, &probs, 0.5);
                let loss = fit.history.validation_loss.last().copied().unwrap_or(f64::INFINITY);
                log::debug!("{spec}: lr {lr} validation accuracy {acc:.4} loss {loss:.4}");
                if best.is_none_or(|(_, a, l)| acc > a || (acc == a && loss < l)) {
                    best = Some((lr, acc, loss));
                }
            }
            Err(e) => {
                log::warn!("{spec}: learning rate {lr} failed: {e}");
                last_err = Some(e);
            }
        }
    }
    match best {
        Some((lr, _, _)) => Ok(lr),
        None => Err(last_err.expect("at least one trial")),
    }
}

fn gbdt_outcome(
    spec: CellSpec,
    data: &SeedDatasets,
    config: &PipelineConfig,
    featurize: &(dyn Fn(&CandidateTuple) -> Option<Vec<f64>> + Sync),
) -> Result<(CellOutcome, TreeEnsemble), HarnessError> {
    let rows: Vec<(Vec<f64>, bool)> = data
        .train
        .tuples
        .par_iter()
        .filter_map(|t| featurize(t).map(|x| (x, t.label.is_positive())))
        .collect();
    let (x, y): (Vec<Vec<f64>>, Vec<bool>) = rows.into_iter().unzip();
    let model = fit(&x, &y, &config.gbdt(data.seed)).map_err(|source| HarnessError::Gbdt {
        cell: spec.id(),
        source,
    })?;
    let score = |t: &CandidateTuple| featurize(t).and_then(|row| model.predict_proba(&row).ok());
    Ok((outcome(spec, data, &score, None), model))
}

fn concat(a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    let mut a = a;
    a.extend(b);
    a
}

/// Runs every requested cell on every dataset seed.
pub fn run_grid(artifacts: &Artifacts, config: &PipelineConfig, options: &GridOptions) -> Result<GridResult, HarnessError> {
    let clock = Instant::now();
    let started = unix_now();
    let cells = &options.cells;
    let layout = &artifacts.layout;

    let aspects: BTreeSet<AspectPair> = cells.iter().map(|c| c.aspects()).collect();
    let hygiene = aspects
        .iter()
        .map(|&a| check_temporal_hygiene(artifacts, a))
        .collect::<Result<Vec<_>, _>>()?;
    let inputs: BTreeMap<AspectPair, InputBuilder> = aspects
        .iter()
        .map(|&a| Ok((a, InputBuilder::new(artifacts.store(a)?, layout))))
        .collect::<Result<_, HarnessError>>()?;

    let scenarios: BTreeSet<Scenario> = cells.iter().map(|c| c.scenario).collect();
    let mut datasets: BTreeMap<Scenario, Vec<SeedDatasets>> = BTreeMap::new();
    let mut constant = Vec::new();
    let mut dropped = BTreeMap::new();
    for &s in &scenarios {
        let sets = build_datasets(&artifacts.index, layout, s, config)?;
        for d in &sets {
            for (split, data) in [("train", &d.train), ("validation", &d.validation), ("test", &d.test)] {
                let acc = constant_classifier_accuracy(data);
                if (acc - 0.5).abs() > 1e-12 {
                    return Err(HarnessError::Unbalanced {
                        seed: d.seed,
                        scenario: s,
                        accuracy: acc,
                    });
                }
                if split == "test" {
                    constant.push((s, d.seed, acc));
                }
                *dropped.entry(format!("{}/{split}", s.as_str())).or_insert(0) += data.dropped.len();
            }
        }
        datasets.insert(s, sets);
    }
    if datasets.values().flatten().next().is_none() {
        return Err(HarnessError::MissingArtifact("datasets (no seeds configured)".into()));
    }

    // Neural cells, including those whose encoders feed DecadeCentric DSM cells.
    let nnm_cells: BTreeSet<CellSpec> = cells
        .iter()
        .filter_map(|c| match (c.model, c.time) {
            (ModelKind::Nnm, _) => Some(*c),
            (ModelKind::Dsm, TimeAspect::DecadeCentric) => Some(CellSpec { model: ModelKind::Nnm, ..*c }),
            _ => None,
        })
        .collect();
    let nnm_cells: Vec<CellSpec> = nnm_cells.into_iter().collect();
    let rates: Vec<f64> = nnm_cells
        .iter()
        .map(|c| select_learning_rate(*c, &datasets[&c.scenario][0], &inputs[&c.aspects()], config))
        .collect::<Result<_, _>>()?;
    let learning_rates: BTreeMap<String, f64> = nnm_cells.iter().map(|c| c.id()).zip(rates.iter().copied()).collect();

    let nnm_jobs: Vec<(usize, usize)> = (0..nnm_cells.len())
        .flat_map(|c| (0..config.datasets).map(move |s| (c, s)))
        .collect();
    let nnm_results: Vec<((CellSpec, u64), (CellOutcome, NnmFit))> = nnm_jobs
        .par_iter()
        .map(|&(ci, si)| {
            let spec = nnm_cells[ci];
            let data = &datasets[&spec.scenario][si];
            let inp = &inputs[&spec.aspects()];
            let fit = train_nnm(spec, data, inp, config, rates[ci])?;
            let out = outcome(spec, data, &|t| nnm_probability(&fit.model, inp, t), Some(rates[ci]));
            log::info!("{spec} seed {}: {:.4}", data.seed, out.accuracy);
            Ok(((spec, data.seed), (out, fit)))
        })
        .collect::<Result<_, HarnessError>>()?;
    let nnm: HashMap<(CellSpec, u64), (CellOutcome, NnmFit)> = nnm_results.into_iter().collect();

    let dfm_aspects: BTreeSet<AspectPair> =
        cells.iter().filter(|c| c.model == ModelKind::Dfm).map(|c| c.aspects()).collect();
    let dfm: BTreeMap<AspectPair, DfmFeatures> = dfm_aspects
        .into_par_iter()
        .map(|a| {
            let set = artifacts.matrices(a)?;
            let idx = &artifacts.index;
            Ok((a, DfmFeatures::build(&idx.splits.train, &idx.counts, set, layout, config.dfm_std)))
        })
        .collect::<Result<_, HarnessError>>()?;

    let gbdt_cells: Vec<CellSpec> = cells.iter().filter(|c| c.model != ModelKind::Nnm).copied().collect();
    let gbdt_jobs: Vec<(CellSpec, usize)> = gbdt_cells
        .iter()
        .flat_map(|c| (0..config.datasets).map(move |s| (*c, s)))
        .collect();
    let gbdt_results: Vec<((CellSpec, u64), (CellOutcome, TreeEnsemble))> = gbdt_jobs
        .par_iter()
        .map(|&(spec, si)| {
            let data = &datasets[&spec.scenario][si];
            let inp = &inputs[&spec.aspects()];
            let result = match (spec.model, spec.time) {
                (ModelKind::Dfm, _) => {
                    let feats = &dfm[&spec.aspects()];
                    gbdt_outcome(spec, data, config, &|t| feats.row(&t.modifier, &t.head))?
                }
                (ModelKind::Dsm, TimeAspect::DecadeAgnostic) => gbdt_outcome(spec, data, config, &|t| {
                    Some(concat(inp.raw(&t.modifier, Side::Modifier)?, inp.raw(&t.head, Side::Head)?))
                })?,
                (ModelKind::Dsm, TimeAspect::DecadeCentric) => {
                    let encoder = &nnm[&(CellSpec { model: ModelKind::Nnm, ..spec }, data.seed)].1.model;
                    let encode = |lexeme: &str, side: Side, i: usize| -> Option<Vec<f64>> {
                        let seq = inp.sequence(lexeme, side)?;
                        let v = encoder.encode(i, &seq).ok()?;
                        Some(v.into_iter().map(|x| x as f64).collect())
                    };
                    gbdt_outcome(spec, data, config, &|t| {
                        Some(concat(encode(&t.modifier, Side::Modifier, 0)?, encode(&t.head, Side::Head, 1)?))
                    })?
                }
                (ModelKind::Nnm, _) => unreachable!("neural cells are trained separately"),
            };
            log::info!("{spec} seed {}: {:.4}", data.seed, result.0.accuracy);
            Ok(((spec, data.seed), result))
        })
        .collect::<Result<_, HarnessError>>()?;
    let gbdt: HashMap<(CellSpec, u64), (CellOutcome, TreeEnsemble)> = gbdt_results.into_iter().collect();

    let seeds = config.seeds();
    if let Some(dir) = &options.model_dir {
        fs::create_dir_all(dir)?;
        let first = seeds[0];
        for spec in cells {
            match spec.model {
                ModelKind::Nnm => {
                    let (out, fit) = &nnm[&(*spec, first)];
                    let meta = serde_json::json!({
                        "cell": spec.to_string(),
                        "seed": first,
                        "learning_rate": out.learning_rate,
                        "history": fit.history,
                    });
                    fit.model
                        .save(&dir.join(spec.id()), meta)
                        .map_err(|source| HarnessError::Neural { cell: spec.id(), source })?;
                }
                _ => fs::write(dir.join(format!("{}.json", spec.id())), gbdt[&(*spec, first)].1.to_json()?)?,
            }
        }
    }

    let mut outcomes = Vec::with_capacity(cells.len() * seeds.len());
    for spec in cells {
        for &seed in &seeds {
            let out = match spec.model {
                ModelKind::Nnm => nnm[&(*spec, seed)].0.clone(),
                _ => gbdt[&(*spec, seed)].0.clone(),
            };
            outcomes.push(out);
        }
    }

    Ok(GridResult {
        outcomes,
        metadata: RunMetadata {
            version: env!("CARGO_PKG_VERSION").to_string(),
            corpus_sha256: corpus_hash(artifacts),
            config_sha256: config_hash(config)?,
            config: config.clone(),
            started_unix: started,
            finished_unix: unix_now(),
            elapsed_seconds: clock.elapsed().as_secs_f64(),
            hygiene,
            constant_classifier: constant,
            learning_rates,
            dropped_positives: dropped,
        },
    })
}
