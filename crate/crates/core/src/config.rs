//! Pipeline configuration shared by every stage.

use serde::{Deserialize, Serialize};

use crate::corpus::{IngestOptions, SplitThresholds, DEFAULT_VOCAB_CAP};
use crate::decade::{DecadeLayout, LayoutError};
use crate::gbdt::GbdtConfig;
use crate::neural::{Loss, TrainConfig};
use crate::sampling::PoolWeighting;
use crate::vectors::Weighting;

/// Flat key-value configuration; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub first_decade: u16,
    pub last_training_decade: u16,
    pub validation_decade: u16,
    pub test_decade: u16,
    pub vocab_cap: usize,
    pub min_count: u64,
    pub dims: usize,
    pub weighting: Weighting,
    pub svd_seed: u64,
    pub datasets: usize,
    pub seed: u64,
    pub pool_weighting: PoolWeighting,
    pub hidden: usize,
    pub lstm_hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub tune_learning_rate: bool,
    pub learning_rates: Vec<f64>,
    pub loss: Loss,
    pub gbdt_learning_rate: f64,
    pub gbdt_max_depth: usize,
    pub gbdt_estimators: usize,
    pub gbdt_min_child_weight: f64,
    pub gbdt_subsample: f64,
    pub gbdt_gamma: f64,
    pub gbdt_alpha: f64,
    pub gbdt_lambda: f64,
    pub dfm_std: bool,
    pub candidate_budget: usize,
    pub top: usize,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let g = GbdtConfig::default();
        let t = TrainConfig::default();
        PipelineConfig {
            first_decade: 1800,
            last_training_decade: 1980,
            validation_decade: 1990,
            test_decade: 2000,
            vocab_cap: DEFAULT_VOCAB_CAP,
            min_count: 3,
            dims: 300,
            weighting: Weighting::Log1p,
            svd_seed: 0,
            datasets: 10,
            seed: 0,
            pool_weighting: PoolWeighting::Uniform,
            hidden: 300,
            lstm_hidden: 300,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            tune_learning_rate: true,
            learning_rates: vec![0.1, 0.03, 0.01, 0.003],
            loss: t.loss,
            gbdt_learning_rate: g.learning_rate,
            gbdt_max_depth: g.max_depth,
            gbdt_estimators: g.n_estimators,
            gbdt_min_child_weight: g.min_child_weight,
            gbdt_subsample: g.subsample,
            gbdt_gamma: g.gamma,
            gbdt_alpha: g.l1_alpha,
            gbdt_lambda: g.l2_lambda,
            dfm_std: false,
            candidate_budget: 100_000,
            top: 250,
            threads: 0,
        }
    }
}

impl PipelineConfig {
    /// Small models and embeddings sized for the synthetic corpus.
    pub fn synthetic() -> Self {
        PipelineConfig {
            dims: 32,
            hidden: 128,
            lstm_hidden: 16,
            epochs: 40,
            learning_rates: vec![0.2, 0.05],
            ..PipelineConfig::default()
        }
    }

    pub fn layout(&self) -> Result<DecadeLayout, LayoutError> {
        DecadeLayout::new(
            self.first_decade,
            self.last_training_decade,
            self.validation_decade,
            self.test_decade,
        )
    }

    pub fn thresholds(&self) -> SplitThresholds {
        SplitThresholds {
            min_train_count: self.min_count,
            min_validation_count: self.min_count,
            min_novel_count: self.min_count,
        }
    }

    pub fn ingest_options(&self) -> Result<IngestOptions, LayoutError> {
        Ok(IngestOptions {
            layout: self.layout()?,
            vocab_cap: self.vocab_cap,
            thresholds: self.thresholds(),
        })
    }

    /// Booster configuration for a given seed.
    pub fn gbdt(&self, seed: u64) -> GbdtConfig {
        GbdtConfig {
            learning_rate: self.gbdt_learning_rate,
            max_depth: self.gbdt_max_depth,
            n_estimators: self.gbdt_estimators,
            min_child_weight: self.gbdt_min_child_weight,
            subsample: self.gbdt_subsample,
            gamma: self.gbdt_gamma,
            l1_alpha: self.gbdt_alpha,
            l2_lambda: self.gbdt_lambda,
            seed,
        }
    }

    pub fn train(&self, learning_rate: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate,
            loss: self.loss,
            seed,
        }
    }

    /// Dataset seeds: `seed`, `seed + 1`, ...
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.datasets as u64).map(|i| self.seed + i).collect()
    }
}
