use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use super::HarnessError;
use crate::config::PipelineConfig;
use crate::corpus::{constituent_frequencies, Compound, CorpusIndex, NgramRecord};
use crate::decade::{Decade, DecadeLayout};
use crate::sampling::{sample_dataset, CandidateTuple, ConstituentPool, LabeledDataset, Scenario};
use crate::vectors::{
    build_matrices, build_store, ContextAspect, EmbeddingStore, MatrixSet, Role, Side, Slice, TimeAspect,
};

pub type AspectPair = (ContextAspect, TimeAspect);

pub const ALL_ASPECTS: [AspectPair; 4] = [
    (ContextAspect::CompoundCentric, TimeAspect::DecadeCentric),
    (ContextAspect::CompoundCentric, TimeAspect::DecadeAgnostic),
    (ContextAspect::CompoundAgnostic, TimeAspect::DecadeCentric),
    (ContextAspect::CompoundAgnostic, TimeAspect::DecadeAgnostic),
];

/// Corpus index plus the matrices and embedding stores of every aspect pair
/// a run needs.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub layout: DecadeLayout,
    pub index: CorpusIndex,
    pub matrices: BTreeMap<AspectPair, MatrixSet>,
    pub stores: BTreeMap<AspectPair, EmbeddingStore>,
}

impl Artifacts {
    /// Builds matrices and stores for `aspects` from in-memory 5-grams.
    pub fn build(
        records: &[NgramRecord],
        index: CorpusIndex,
        config: &PipelineConfig,
        aspects: &[AspectPair],
    ) -> Result<Artifacts, HarnessError> {
        let layout = config.layout()?;
        let mut matrices = BTreeMap::new();
        let mut stores = BTreeMap::new();
        for &(context, time) in aspects {
            let set = build_matrices(records, &index.vocabulary, context, time, &layout);
            let store = build_store(&set, config.dims, config.weighting, config.svd_seed)?;
            matrices.insert((context, time), set);
            stores.insert((context, time), store);
        }
        Ok(Artifacts {
            layout,
            index,
            matrices,
            stores,
        })
    }

    pub fn matrices(&self, aspects: AspectPair) -> Result<&MatrixSet, HarnessError> {
        self.matrices
            .get(&aspects)
            .ok_or_else(|| HarnessError::MissingArtifact(format!("matrices for {} / {}", aspects.0, aspects.1)))
    }

    pub fn store(&self, aspects: AspectPair) -> Result<&EmbeddingStore, HarnessError> {
        self.stores
            .get(&aspects)
            .ok_or_else(|| HarnessError::MissingArtifact(format!("embeddings for {} / {}", aspects.0, aspects.1)))
    }
}

/// Train, validation and test datasets sharing one seed.
#[derive(Debug, Clone)]
pub struct SeedDatasets {
    pub seed: u64,
    pub train: LabeledDataset,
    pub validation: LabeledDataset,
    pub test: LabeledDataset,
}

/// Replacement pools drawn from the constituents of training compounds.
pub fn constituent_pools(index: &CorpusIndex, layout: &DecadeLayout, config: &PipelineConfig) -> (ConstituentPool, ConstituentPool) {
    let (mods, heads) = constituent_frequencies(&index.splits.train, &index.counts, layout);
    (
        ConstituentPool::new(&heads, config.pool_weighting),
        ConstituentPool::new(&mods, config.pool_weighting),
    )
}

/// One set of datasets per configured seed. Every split is corrupted with
/// the cell's scenario; negatives never match a compound attested in any
/// decade.
pub fn build_datasets(
    index: &CorpusIndex,
    layout: &DecadeLayout,
    scenario: Scenario,
    config: &PipelineConfig,
) -> Result<Vec<SeedDatasets>, HarnessError> {
    let splits = &index.splits;
    for (name, set) in [("training", &splits.train), ("validation", &splits.validation), ("test", &splits.test)] {
        if set.is_empty() {
            return Err(HarnessError::MissingArtifact(format!("{name} compounds (split is empty)")));
        }
    }
    let (head_pool, modifier_pool) = constituent_pools(index, layout, config);
    let forbidden = index.counts.attested();
    let train: Vec<Compound> = splits.train.iter().cloned().collect();
    let validation: Vec<Compound> = splits.validation.iter().cloned().collect();
    let test: Vec<Compound> = splits.test.iter().cloned().collect();
    Ok(config
        .seeds()
        .into_par_iter()
        .map(|seed| {
            let sample = |positives: &[Compound], stream| {
                sample_dataset(positives, scenario, &head_pool, &modifier_pool, &forbidden, seed, stream)
            };
            SeedDatasets {
                seed,
                train: sample(&train, 0),
                validation: sample(&validation, 1),
                test: sample(&test, 2),
            }
        })
        .collect())
}

/// Accuracy of a classifier that labels every tuple plausible.
pub fn constant_classifier_accuracy(data: &LabeledDataset) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    data.positives().count() as f64 / data.len() as f64
}

/// Per-slice scaled embedding lookups for one store. Vectors are rescaled so
/// that the mean row norm of every slice is `sqrt(dims)` (unit mean square
/// per component); decades with different count mass then feed the models
/// on a comparable scale.
pub struct InputBuilder<'a> {
    pub store: &'a EmbeddingStore,
    decades: Vec<Decade>,
    scales: HashMap<Slice, f32>,
}

impl<'a> InputBuilder<'a> {
    pub fn new(store: &'a EmbeddingStore, layout: &DecadeLayout) -> Self {
        let roles: Vec<Role> = store.context.roles().to_vec();
        let target = (store.dims as f64).sqrt();
        let scales = store
            .tables()
            .iter()
            .map(|t| {
                let norm = t.mean_norm(&roles);
                (t.slice, if norm > 0.0 { (target / norm) as f32 } else { 1.0 })
            })
            .collect();
        InputBuilder {
            store,
            decades: layout.training_decades(),
            scales,
        }
    }

    pub fn dims(&self) -> usize {
        self.store.dims
    }

    pub fn is_sequential(&self) -> bool {
        self.store.time == TimeAspect::DecadeCentric
    }

    /// Model input for a constituent: one scaled vector per training decade
    /// (zeros where absent) for DecadeCentric stores, a single scaled vector
    /// otherwise. `None` when the constituent has no vector at all.
    pub fn sequence(&self, lexeme: &str, side: Side) -> Option<Vec<Vec<f32>>> {
        let key = self.store.context.constituent_key(lexeme, side);
        if self.is_sequential() {
            let mut any = false;
            let seq = self
                .decades
                .iter()
                .map(|&d| match self.store.get(&key, Slice::Decade(d)) {
                    Some(v) => {
                        any = true;
                        let s = self.scales[&Slice::Decade(d)];
                        v.iter().map(|x| x * s).collect()
                    }
                    None => vec![0.0; self.store.dims],
                })
                .collect();
            any.then_some(seq)
        } else {
            let s = self.scales.get(&Slice::All).copied().unwrap_or(1.0);
            self.store
                .get(&key, Slice::All)
                .map(|v| vec![v.iter().map(|x| x * s).collect()])
        }
    }

    /// Unscaled aggregate vector.
    pub fn raw(&self, lexeme: &str, side: Side) -> Option<Vec<f64>> {
        let key = self.store.context.constituent_key(lexeme, side);
        self.store
            .get(&key, Slice::All)
            .map(|v| v.iter().map(|x| *x as f64).collect())
    }
}

/// Whether both constituents of a tuple are known to the builder.
pub fn has_inputs(inputs: &InputBuilder, t: &CandidateTuple) -> bool {
    inputs.sequence(&t.modifier, Side::Modifier).is_some() && inputs.sequence(&t.head, Side::Head).is_some()
}
