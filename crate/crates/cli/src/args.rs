use std::path::PathBuf;

use anyhow::Context;
use clap::parser::ValueSource;
use clap::{ArgMatches, Args, Parser, Subcommand};
use compounding::config::PipelineConfig;
use compounding::harness::ModelKind;
use compounding::neural::Loss;
use compounding::sampling::{PoolWeighting, Scenario};
use compounding::vectors::{ContextAspect, TimeAspect, Weighting};

fn d() -> PipelineConfig {
    PipelineConfig::default()
}

#[derive(Debug, Parser)]
#[command(name = "compounding", version, about = "Predict novel noun-noun compounds from a time-stamped ngram corpus")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Root directory for every stage's outputs
    #[arg(long, env = "COMPOUNDING_OUT", default_value = "out", global = true)]
    pub out: PathBuf,

    /// Flat TOML file with pipeline settings; flags override it
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract compounds, context vocabulary and splits from ngram files
    Ingest {
        /// 5-gram files (plain or gzip)
        #[arg(long, required = true, num_args = 1..)]
        fivegrams: Vec<PathBuf>,
        /// 1-gram files (plain or gzip)
        #[arg(long, required = true, num_args = 1..)]
        unigrams: Vec<PathBuf>,
    },
    /// Build co-occurrence matrices and SVD embeddings
    Vectors {
        /// Context aspects to build (default: both)
        #[arg(long, value_delimiter = ',')]
        context: Vec<ContextAspect>,
        /// Time aspects to build (default: both)
        #[arg(long, value_delimiter = ',')]
        time: Vec<TimeAspect>,
    },
    /// Train and test grid cells over every dataset seed
    Evaluate {
        /// Run all 24 cells
        #[arg(long, conflicts_with_all = ["model", "context", "time", "corruption"])]
        all: bool,
        /// dfm, dsm or nnm
        #[arg(long, value_delimiter = ',')]
        model: Vec<ModelKind>,
        #[arg(long, value_delimiter = ',')]
        context: Vec<ContextAspect>,
        #[arg(long, value_delimiter = ',')]
        time: Vec<TimeAspect>,
        /// head or modifier
        #[arg(long, value_delimiter = ',')]
        corruption: Vec<Scenario>,
    },
    /// Score unattested modifier-head pairs with a trained neural model
    Generate {
        #[arg(long, default_value = "compound-centric")]
        context: ContextAspect,
        #[arg(long, default_value = "decade-centric")]
        time: TimeAspect,
        #[arg(long, default_value = "head")]
        corruption: Scenario,
    },
    /// Write the highest-scoring plausible candidates as an annotation sheet
    ExportAnnotations {
        /// Scored candidates (default: the output of `generate`)
        #[arg(long)]
        scored: Option<PathBuf>,
    },
    /// Write a synthetic corpus with planted compounding rules
    Synth {
        #[arg(long, default_value_t = 2024)]
        synth_seed: u64,
        /// Small corpus for quick checks
        #[arg(long)]
        tiny: bool,
    },
}

/// Pipeline settings; a flag given on the command line overrides the
/// config file.
#[derive(Debug, Args)]
pub struct Settings {
    #[arg(long, global = true, default_value_t = d().first_decade)]
    pub first_decade: u16,
    #[arg(long, global = true, default_value_t = d().last_training_decade)]
    pub last_training_decade: u16,
    #[arg(long, global = true, default_value_t = d().validation_decade)]
    pub validation_decade: u16,
    #[arg(long, global = true, default_value_t = d().test_decade)]
    pub test_decade: u16,
    /// Context vocabulary size
    #[arg(long, global = true, default_value_t = d().vocab_cap)]
    pub vocab_cap: usize,
    /// Minimum compound frequency per split
    #[arg(long, global = true, default_value_t = d().min_count)]
    pub min_count: u64,
    /// Embedding dimensions (SVD rank)
    #[arg(long, global = true, default_value_t = d().dims)]
    pub dims: usize,
    /// Cell weighting before SVD: raw, log1p or ppmi
    #[arg(long, global = true, default_value_t = d().weighting)]
    pub weighting: Weighting,
    #[arg(long, global = true, default_value_t = d().svd_seed)]
    pub svd_seed: u64,
    /// Dataset seeds per cell
    #[arg(long, global = true, default_value_t = d().datasets)]
    pub datasets: usize,
    /// First dataset seed
    #[arg(long, global = true, default_value_t = d().seed)]
    pub seed: u64,
    /// Replacement pool weighting: uniform or frequency
    #[arg(long, global = true, default_value_t = d().pool_weighting)]
    pub pool_weighting: PoolWeighting,
    /// Hidden units of the neural scorer
    #[arg(long, global = true, default_value_t = d().hidden)]
    pub hidden: usize,
    #[arg(long, global = true, default_value_t = d().lstm_hidden)]
    pub lstm_hidden: usize,
    #[arg(long, global = true, default_value_t = d().epochs)]
    pub epochs: usize,
    #[arg(long, global = true, default_value_t = d().batch_size)]
    pub batch_size: usize,
    /// Learning rate when tuning is off
    #[arg(long, global = true, default_value_t = d().learning_rate)]
    pub learning_rate: f64,
    /// Pick the learning rate on validation data
    #[arg(long, global = true, default_value_t = d().tune_learning_rate, action = clap::ArgAction::Set)]
    pub tune_learning_rate: bool,
    #[arg(long, global = true, value_delimiter = ',', default_values_t = d().learning_rates)]
    pub learning_rates: Vec<f64>,
    /// cross-entropy or margin
    #[arg(long, global = true, default_value_t = d().loss)]
    pub loss: Loss,
    #[arg(long, global = true, default_value_t = d().gbdt_learning_rate)]
    pub gbdt_learning_rate: f64,
    #[arg(long, global = true, default_value_t = d().gbdt_max_depth)]
    pub gbdt_max_depth: usize,
    #[arg(long, global = true, default_value_t = d().gbdt_estimators)]
    pub gbdt_estimators: usize,
    #[arg(long, global = true, default_value_t = d().gbdt_min_child_weight)]
    pub gbdt_min_child_weight: f64,
    #[arg(long, global = true, default_value_t = d().gbdt_subsample)]
    pub gbdt_subsample: f64,
    #[arg(long, global = true, default_value_t = d().gbdt_gamma)]
    pub gbdt_gamma: f64,
    #[arg(long, global = true, default_value_t = d().gbdt_alpha)]
    pub gbdt_alpha: f64,
    #[arg(long, global = true, default_value_t = d().gbdt_lambda)]
    pub gbdt_lambda: f64,
    /// Add per-decade standard deviations to the feature model
    #[arg(long, global = true, default_value_t = d().dfm_std, action = clap::ArgAction::Set)]
    pub dfm_std: bool,
    /// Candidate pairs scored by `generate`
    #[arg(long, global = true, default_value_t = d().candidate_budget)]
    pub candidate_budget: usize,
    /// Rows in the annotation sheet
    #[arg(long, global = true, default_value_t = d().top)]
    pub top: usize,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true, default_value_t = d().threads)]
    pub threads: usize,
}

fn explicit(matches: &ArgMatches, id: &str) -> bool {
    let given = |m: &ArgMatches| {
        matches!(
            m.value_source(id),
            Some(ValueSource::CommandLine) | Some(ValueSource::EnvVariable)
        )
    };
    given(matches) || matches.subcommand().is_some_and(|(_, sub)| given(sub))
}

macro_rules! overlay {
    ($config:ident, $settings:ident, $matches:ident; $($field:ident),* $(,)?) => {
        $(
            if explicit($matches, stringify!($field)) {
                $config.$field = $settings.$field.clone();
            }
        )*
    };
}

/// Defaults, then the config file, then explicit flags.
pub fn resolve(cli: &Cli, matches: &ArgMatches) -> anyhow::Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
        }
        None => PipelineConfig::default(),
    };
    let s = &cli.settings;
    overlay!(config, s, matches;
        first_decade, last_training_decade, validation_decade, test_decade, vocab_cap, min_count,
        dims, weighting, svd_seed, datasets, seed, pool_weighting, hidden, lstm_hidden, epochs,
        batch_size, learning_rate, tune_learning_rate, learning_rates, loss, gbdt_learning_rate,
        gbdt_max_depth, gbdt_estimators, gbdt_min_child_weight, gbdt_subsample, gbdt_gamma,
        gbdt_alpha, gbdt_lambda, dfm_std, candidate_budget, top, threads,
    );
    config.layout().context("invalid decade layout")?;
    anyhow::ensure!(config.datasets > 0, "datasets must be at least 1");
    anyhow::ensure!(config.dims > 0, "dims must be at least 1");
    Ok(config)
}
