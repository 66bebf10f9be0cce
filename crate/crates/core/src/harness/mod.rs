//! Experiment grid: model x context x time x corruption, over several
//! dataset seeds.

mod annotate;
mod data;
mod hygiene;
mod report;
mod run;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use annotate::{
    export_annotation_candidates, generate_candidates, read_scored, score_candidates, write_annotations,
    write_scored, AnnotationCandidate, ScoredCandidate,
};
pub use data::{
    build_datasets, constant_classifier_accuracy, constituent_pools, has_inputs, Artifacts, AspectPair,
    InputBuilder, SeedDatasets, ALL_ASPECTS,
};
pub use hygiene::{check_temporal_hygiene, HygieneReport};
pub use report::{
    format_cell, mean_std, summarize, table2, write_report_csv, write_summary_csv, write_thresholds_csv,
    SummaryRow,
};
pub use run::{run_grid, CellOutcome, GridOptions, GridResult, RunMetadata};

use crate::decade::LayoutError;
use crate::gbdt::GbdtError;
use crate::neural::NeuralError;
use crate::sampling::Scenario;
use crate::vectors::{ContextAspect, StoreError, TimeAspect};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("missing upstream artifact: {0}")]
    MissingArtifact(String),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cell {cell}")]
    Neural { cell: String, source: NeuralError },
    #[error("cell {cell}")]
    Gbdt { cell: String, source: GbdtError },
    #[error("temporal hygiene violated: {0}")]
    Hygiene(String),
    #[error("constant classifier reached {accuracy} on seed {seed} ({scenario}); datasets are unbalanced")]
    Unbalanced { seed: u64, scenario: Scenario, accuracy: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    /// Gradient-boosted trees on association and similarity features.
    Dfm,
    /// Gradient-boosted trees on constituent embeddings.
    Dsm,
    /// Neural scorer over constituent embeddings.
    Nnm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Dfm, ModelKind::Dsm, ModelKind::Nnm];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Dfm => "DFM",
            ModelKind::Dsm => "DSM",
            ModelKind::Nnm => "NNM",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "dfm" => Ok(ModelKind::Dfm),
            "dsm" => Ok(ModelKind::Dsm),
            "nnm" => Ok(ModelKind::Nnm),
            _ => Err(format!("unknown model {s:?} (dfm, dsm, nnm)")),
        }
    }
}

/// One cell of the evaluation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellSpec {
    pub model: ModelKind,
    pub context: ContextAspect,
    pub time: TimeAspect,
    pub scenario: Scenario,
}

impl CellSpec {
    pub fn new(model: ModelKind, context: ContextAspect, time: TimeAspect, scenario: Scenario) -> Self {
        CellSpec {
            model,
            context,
            time,
            scenario,
        }
    }

    pub fn aspects(&self) -> AspectPair {
        (self.context, self.time)
    }

    /// Short identifier used for file names, e.g. `nnm-cc-dc-head`.
    pub fn id(&self) -> String {
        let ctx = match self.context {
            ContextAspect::CompoundCentric => "cc",
            ContextAspect::CompoundAgnostic => "ca",
        };
        let time = match self.time {
            TimeAspect::DecadeCentric => "dc",
            TimeAspect::DecadeAgnostic => "da",
        };
        format!(
            "{}-{ctx}-{time}-{}",
            self.model.as_str().to_ascii_lowercase(),
            self.scenario.as_str()
        )
    }
}

impl fmt::Display for CellSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.model,
            self.context.label(),
            self.time.label(),
            self.scenario.label()
        )
    }
}

/// All 24 cells in report order: time, model, context, corruption.
pub fn full_grid() -> Vec<CellSpec> {
    let mut cells = Vec::with_capacity(24);
    for time in TimeAspect::ALL {
        for model in ModelKind::ALL {
            for context in ContextAspect::ALL {
                for scenario in Scenario::ALL {
                    cells.push(CellSpec::new(model, context, time, scenario));
                }
            }
        }
    }
    cells
}

/// Cells of `full_grid` matching the optional filters.
pub fn select_cells(
    models: &[ModelKind],
    contexts: &[ContextAspect],
    times: &[TimeAspect],
    scenarios: &[Scenario],
) -> Vec<CellSpec> {
    full_grid()
        .into_iter()
        .filter(|c| models.is_empty() || models.contains(&c.model))
        .filter(|c| contexts.is_empty() || contexts.contains(&c.context))
        .filter(|c| times.is_empty() || times.contains(&c.time))
        .filter(|c| scenarios.is_empty() || scenarios.contains(&c.scenario))
        .collect()
}
