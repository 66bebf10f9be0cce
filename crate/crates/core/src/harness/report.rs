use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::run::CellOutcome;
use super::{full_grid, CellSpec, ModelKind};
use crate::sampling::Scenario;
use crate::vectors::{ContextAspect, TimeAspect};

/// Accuracy over seeds for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub spec: CellSpec,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `84.69 ± 0.33` from fractional mean and std.
pub fn format_cell(mean: f64, std: f64) -> String {
    format!("{:.2} ± {:.2}", mean * 100.0, std * 100.0)
}

/// Groups outcomes by cell, keeping first-appearance order.
pub fn summarize(outcomes: &[CellOutcome]) -> Vec<SummaryRow> {
    let mut order: Vec<CellSpec> = Vec::new();
    let mut acc: BTreeMap<CellSpec, Vec<f64>> = BTreeMap::new();
    for o in outcomes {
        let v = acc.entry(o.spec).or_insert_with(|| {
            order.push(o.spec);
            Vec::new()
        });
        v.push(o.accuracy);
    }
    order
        .into_iter()
        .map(|spec| {
            let accuracies = acc.remove(&spec).unwrap_or_default();
            let (mean, std) = mean_std(&accuracies);
            SummaryRow {
                spec,
                accuracies,
                mean,
                std,
            }
        })
        .collect()
}

const COLUMNS: [(ContextAspect, Scenario); 4] = [
    (ContextAspect::CompoundCentric, Scenario::CorruptHead),
    (ContextAspect::CompoundCentric, Scenario::CorruptModifier),
    (ContextAspect::CompoundAgnostic, Scenario::CorruptHead),
    (ContextAspect::CompoundAgnostic, Scenario::CorruptModifier),
];

/// Plain-text results table: one block per time aspect, one row per model,
/// columns context x corruption. Missing cells print as `-`.
pub fn table2(summary: &[SummaryRow]) -> String {
    if summary.is_empty() {
        log::warn!("no results to tabulate");
        return String::new();
    }
    let by_spec: BTreeMap<CellSpec, &SummaryRow> = summary.iter().map(|r| (r.spec, r)).collect();
    let width = 16;
    let mut out = String::new();
    let total = full_grid().len();
    if by_spec.len() < total {
        let _ = writeln!(out, "partial grid: {} of {total} cells", by_spec.len());
        out.push('\n');
    }
    let header = format!(
        "{:<w$}{:<w2$}{}",
        "",
        ContextAspect::CompoundCentric.label(),
        ContextAspect::CompoundAgnostic.label(),
        w = width,
        w2 = 2 * width
    );
    out.push_str(&header);
    out.push('\n');
    for (bi, time) in TimeAspect::ALL.into_iter().enumerate() {
        if bi > 0 {
            out.push('\n');
        }
        let _ = write!(out, "{:<width$}", time.label());
        for (_, s) in COLUMNS {
            let _ = write!(out, "{:<width$}", s.label());
        }
        out = out.trim_end().to_string();
        out.push('\n');
        for model in ModelKind::ALL {
            let _ = write!(out, "{:<width$}", model.as_str());
            for (context, scenario) in COLUMNS {
                let cell = match by_spec.get(&CellSpec::new(model, context, time, scenario)) {
                    Some(r) => format_cell(r.mean, r.std),
                    None => "-".to_string(),
                };
                let _ = write!(out, "{cell:<width$}");
            }
            let trimmed = out.trim_end().len();
            out.truncate(trimmed);
            out.push('\n');
        }
    }
    out
}

fn spec_fields(spec: &CellSpec) -> [String; 4] {
    [
        spec.model.as_str().to_string(),
        spec.context.label().to_string(),
        spec.time.label().to_string(),
        spec.scenario.label().to_string(),
    ]
}

/// One row per (cell, seed).
pub fn write_report_csv<W: Write>(outcomes: &[CellOutcome], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "context", "time", "corruption", "seed", "accuracy"])?;
    for o in outcomes {
        let mut rec = spec_fields(&o.spec).to_vec();
        rec.push(o.seed.to_string());
        rec.push(format!("{}", o.accuracy));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(summary: &[SummaryRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "context", "time", "corruption", "seeds", "mean", "std"])?;
    for r in summary {
        let mut rec = spec_fields(&r.spec).to_vec();
        rec.push(r.accuracies.len().to_string());
        rec.push(format!("{}", r.mean));
        rec.push(format!("{}", r.std));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-threshold and validation-tuned accuracy side by side.
pub fn write_thresholds_csv<W: Write>(outcomes: &[CellOutcome], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "model",
        "context",
        "time",
        "corruption",
        "seed",
        "accuracy",
        "tuned_threshold",
        "tuned_accuracy",
        "abstentions",
        "test_size",
    ])?;
    for o in outcomes {
        let mut rec = spec_fields(&o.spec).to_vec();
        rec.extend([
            o.seed.to_string(),
            format!("{}", o.accuracy),
            format!("{}", o.tuned_threshold),
            format!("{}", o.tuned_accuracy),
            o.abstentions.to_string(),
            o.test_size.to_string(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
