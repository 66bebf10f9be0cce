//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness. Any failing gating check makes the
//! binary exit non-zero. The NNM-over-DSM margin of the end-to-end run is
//! reported but does not gate the exit status.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use compounding::config::PipelineConfig;
use compounding::decade::Decade;
use compounding::dfm::{self, AssociationCounts};
use compounding::gbdt::{self, fit, GbdtConfig, MISSING};
use compounding::harness::{
    build_datasets, check_temporal_hygiene, constant_classifier_accuracy, format_cell, full_grid, run_grid, summarize,
    table2, Artifacts, CellSpec, GridOptions, ModelKind, SummaryRow,
};
use compounding::neural::{Architecture, NnmModel};
use compounding::sampling::Scenario;
use compounding::synth::{generate, SynthConfig};
use compounding::vectors::{truncated_svd, ContextAspect, CooccurrenceMatrix, Role, Slice, TargetKey, TimeAspect, Weighting};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Line {
    name: &'static str,
    failures: Vec<String>,
    /// Failures that are printed but do not change the exit status.
    advisory: Vec<String>,
    detail: String,
    elapsed: Duration,
    budget: Option<Duration>,
}

impl Line {
    fn passed(&self) -> bool {
        self.failures.is_empty() && self.advisory.is_empty() && self.within_budget()
    }

    fn within_budget(&self) -> bool {
        self.budget.is_none_or(|b| self.elapsed <= b)
    }

    fn print(&self) {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let budget = match self.budget {
            Some(b) => format!(" (limit {:.0} s)", b.as_secs_f64()),
            None => String::new(),
        };
        println!("{status} {:<22} {}; {:.1} s{budget}", self.name, self.detail, self.elapsed.as_secs_f64());
        for f in &self.failures {
            println!("     - {f}");
        }
        for f in &self.advisory {
            println!("     - {f} [not gating]");
        }
        if !self.within_budget() {
            println!("     - over the time limit");
        }
    }
}

fn run(name: &'static str, budget: Option<u64>, f: impl FnOnce(&mut Vec<String>) -> String) -> Line {
    let clock = Instant::now();
    let mut failures = Vec::new();
    let detail = f(&mut failures);
    Line {
        name,
        failures,
        advisory: Vec::new(),
        detail,
        elapsed: clock.elapsed(),
        budget: budget.map(Duration::from_secs),
    }
}

fn formula_oracles(failures: &mut Vec<String>) -> String {
    let fixed = common::Table::from_marginals(8, 40, 20, 1000);
    let want = common::ppmi(&fixed);
    if (want - 10f64.log2()).abs() > common::TOL {
        failures.push(format!("oracle PPMI(8,40,20,1000) = {want}"));
    }
    let got = dfm::ppmi(&AssociationCounts::new(8, 40, 20, 1000));
    if !common::close(got, Some(want), common::TOL) {
        failures.push(format!("PPMI(8,40,20,1000): {got:?} vs {want}"));
    }
    let table = common::Table { k11: 10.0, k12: 90.0, k21: 40.0, k22: 860.0 };
    let want = common::llr(&table);
    if (want - 4.737).abs() > 5e-4 {
        failures.push(format!("oracle LLR(10,90,40,860) = {want}"));
    }
    let got = dfm::llr(&AssociationCounts::new(10, 100, 50, 1000));
    if !common::close(got, Some(want), common::TOL) {
        failures.push(format!("LLR(10,90,40,860): {got:?} vs {want}"));
    }

    let mut values = 0;
    for seed in 0..1000 {
        if let Err(e) = common::check_association_fuzz(seed) {
            failures.push(e);
        }
        match common::check_dfm_against_oracle(seed) {
            Ok(n) => values += n,
            Err(e) => failures.push(e),
        }
    }
    failures.truncate(5);
    format!("1000 count tables, 1000 toy corpora, {values} feature values, LLR(10,90,40,860) = {want:.4}")
}

fn sparse(d: &DMatrix<f64>) -> CooccurrenceMatrix {
    let mut entries = Vec::new();
    for r in 0..d.nrows() {
        for c in 0..d.ncols() {
            if d[(r, c)] != 0.0 {
                entries.push((TargetKey::new(format!("w{r:04}"), Role::StandaloneWord), c, d[(r, c)]));
            }
        }
    }
    CooccurrenceMatrix::from_entries(Slice::All, d.ncols(), entries)
}

fn svd_checks(failures: &mut Vec<String>) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_rank_one = 0.0f64;
    let mut worst_full = 0.0f64;
    for trial in 0..5 {
        let (r, c) = (rng.random_range(20..80), rng.random_range(20..80));
        let u: Vec<f64> = (0..r).map(|_| rng.random_range(1..10) as f64).collect();
        let v: Vec<f64> = (0..c).map(|_| rng.random_range(1..10) as f64).collect();
        let a = DMatrix::from_fn(r, c, |i, j| u[i] * v[j]);
        let svd = truncated_svd(&sparse(&a), 1, Weighting::Raw, trial).unwrap();
        worst_rank_one = worst_rank_one.max(common::rel_error(&a, &svd.reconstruct()));

        let b = common::random_counts(&mut rng, r, c, 0.3);
        let k = r.min(c);
        let svd = truncated_svd(&sparse(&b), k, Weighting::Raw, trial).unwrap();
        worst_full = worst_full.max(common::rel_error(&b, &svd.reconstruct()));
    }
    if worst_rank_one > 1e-8 {
        failures.push(format!("rank-1 error {worst_rank_one:e}"));
    }
    if worst_full > 1e-6 {
        failures.push(format!("full-rank error {worst_full:e}"));
    }

    let mut worst_gap = 0.0f64;
    for trial in 0..3 {
        let a = common::random_counts(&mut rng, 200, 500, 0.05);
        let m = sparse(&a);
        let mut prev = f64::INFINITY;
        for k in [1, 2, 5, 10, 20, 50, 100, 150, 200] {
            let err = common::rel_error(&a, &truncated_svd(&m, k, Weighting::Raw, trial).unwrap().reconstruct());
            let best = common::optimal_rank_k_error(&a, k);
            if err > prev + 1e-12 {
                failures.push(format!("trial {trial}: error rose to {err} at k = {k}"));
            }
            if err < best - 1e-9 {
                failures.push(format!("trial {trial}: error {err} below the optimum {best} at k = {k}"));
            }
            worst_gap = worst_gap.max(err - best);
            prev = err;
        }
    }
    if worst_gap > 0.05 {
        failures.push(format!("randomized error exceeds the optimum by {worst_gap}"));
    }
    format!(
        "rank-1 {worst_rank_one:.1e}, full rank {worst_full:.1e}, 200x500 monotone, max excess over dense optimum {worst_gap:.4}"
    )
}

fn gradient_checks(failures: &mut Vec<String>) -> String {
    let mut worst = [0.0f64; 2];
    for draw in 0..12u64 {
        for (slot, lstm) in [(0, false), (1, true)] {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 * slot as u64 + draw);
            let k = rng.random_range(2..6);
            let arch = Architecture {
                input_dims: k,
                embedding_dims: if lstm { rng.random_range(2..5) } else { k },
                hidden: rng.random_range(3..9),
                lstm_hidden: lstm.then(|| rng.random_range(2..6)),
            };
            let model = NnmModel::<f64>::init(arch, draw);
            let len = if lstm { rng.random_range(1..8) } else { 1 };
            let m = common::random_seq(&mut rng, len, k);
            let h = common::random_seq(&mut rng, len, k);
            let err = common::max_relative_gradient_error(&model, &m, &h, draw % 2 == 0);
            worst[slot] = worst[slot].max(err);
            if err >= 1e-3 {
                failures.push(format!("{} draw {draw}: {err:e}", if lstm { "lstm" } else { "feed-forward" }));
            }
        }
    }
    format!("12 feed-forward + 12 LSTM configs, worst {:.1e} / {:.1e}", worst[0], worst[1])
}

fn fuzz_rows(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
    let x: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..cols).map(|_| if rng.random_bool(0.1) { MISSING } else { rng.random_range(-3.0..3.0) }).collect())
        .collect();
    let mut y: Vec<bool> = x.iter().map(|r| r[0].abs() + rng.random_range(-1.0..1.0) > 1.0).collect();
    y[0] = true;
    y[1] = false;
    (x, y)
}

fn gbdt_checks(failures: &mut Vec<String>) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut trees = 0;
    for trial in 0..40u64 {
        let rows = rng.random_range(30..400);
        let cols = rng.random_range(1..8);
        let (x, y) = fuzz_rows(&mut rng, rows, cols);

        let defaults = GbdtConfig { seed: trial, ..GbdtConfig::default() };
        let a = fit(&x, &y, &defaults).unwrap();
        if a != fit(&x, &y, &defaults).unwrap() {
            failures.push(format!("trial {trial}: refit differs"));
        }
        for t in &a.trees {
            trees += 1;
            if t.depth() > 3 {
                failures.push(format!("trial {trial}: tree depth {}", t.depth()));
            }
            if let Some(c) = t.child_covers().into_iter().find(|c| *c < 6.0) {
                failures.push(format!("trial {trial}: child cover {c}"));
            }
        }

        let full = GbdtConfig { subsample: 1.0, n_estimators: 40, seed: trial, ..GbdtConfig::default() };
        let m = fit(&x, &y, &full).unwrap();
        let mut prev = gbdt::log_loss(&vec![m.base_score; rows], &y);
        for l in &m.train_loss {
            if *l > prev + 1e-12 {
                failures.push(format!("trial {trial}: loss rose from {prev} to {l}"));
                break;
            }
            prev = *l;
        }
    }

    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..200 {
        let label = i % 2 == 0;
        let v: f64 = if label { rng.random_range(0.1..5.0) } else { rng.random_range(-5.0..-0.1) };
        x.push(vec![v, rng.random_range(-1.0..1.0)]);
        y.push(label);
    }
    let m = fit(&x, &y, &GbdtConfig { n_estimators: 100, ..GbdtConfig::default() }).unwrap();
    let correct = x.iter().zip(&y).filter(|(r, l)| (m.predict_proba(r).unwrap() >= 0.5) == **l).count();
    if correct != 200 {
        failures.push(format!("separable data: {correct}/200"));
    }
    failures.truncate(5);
    format!("40 fuzzed fits ({trees} audited trees), separable {correct}/200 in 100 rounds")
}

fn sampling_checks(failures: &mut Vec<String>) -> String {
    match common::check_sampling(7, 10, 1500) {
        Ok((datasets, negatives)) => format!("{datasets} datasets, {negatives} negatives, none attested, all balanced"),
        Err(e) => {
            failures.push(e);
            "violation found".into()
        }
    }
}

fn hygiene_checks(artifacts: &Artifacts, config: &PipelineConfig, failures: &mut Vec<String>) -> String {
    let cells = full_grid();
    for c in &cells {
        if let Err(e) = check_temporal_hygiene(artifacts, c.aspects()) {
            failures.push(format!("{c}: {e}"));
        }
    }
    let mut tampered = artifacts.clone();
    let aspects = (ContextAspect::CompoundCentric, TimeAspect::DecadeCentric);
    tampered.matrices.get_mut(&aspects).unwrap().matrices[0].slice = Slice::Decade(Decade(2000));
    if check_temporal_hygiene(&tampered, aspects).is_ok() {
        failures.push("a 2000s slice went unnoticed".into());
    }

    let mut sets = 0;
    for scenario in Scenario::ALL {
        for d in build_datasets(&artifacts.index, &artifacts.layout, scenario, config).unwrap() {
            for data in [&d.train, &d.validation, &d.test] {
                sets += 1;
                let acc = constant_classifier_accuracy(data);
                if acc != 0.5 {
                    failures.push(format!("{scenario} seed {}: constant classifier {acc}", d.seed));
                }
            }
        }
    }
    format!("{} cells clean, tampering caught, constant classifier 0.5 on {sets} datasets", cells.len())
}

fn row(summary: &[SummaryRow], model: ModelKind) -> Option<&SummaryRow> {
    let spec = CellSpec::new(model, ContextAspect::CompoundCentric, TimeAspect::DecadeCentric, Scenario::CorruptHead);
    summary.iter().find(|r| r.spec == spec)
}

/// `NN.NN ± N.NN`.
fn table_cell_ok(cell: &str) -> bool {
    let Some((mean, std)) = cell.split_once(" ± ") else {
        return false;
    };
    let two_places = |s: &str| {
        s.split_once('.')
            .is_some_and(|(a, b)| !a.is_empty() && a.chars().all(|c| c.is_ascii_digit()) && b.len() == 2 && b.chars().all(|c| c.is_ascii_digit()))
    };
    two_places(mean) && two_places(std)
}

fn end_to_end(line: &mut Line, artifacts: &Artifacts, config: &PipelineConfig, setup: Duration) -> String {
    let clock = Instant::now();
    let options = GridOptions { cells: full_grid(), model_dir: None };
    let result = match run_grid(artifacts, config, &options) {
        Ok(r) => r,
        Err(e) => {
            line.failures.push(format!("grid failed: {e:#}"));
            return "no result".into();
        }
    };
    let grid_time = setup + clock.elapsed();
    let summary = summarize(&result.outcomes);
    let table = table2(&summary);
    println!("{table}");

    if summary.len() != 24 || summary.iter().any(|r| r.accuracies.len() != config.datasets) {
        line.failures.push("grid is incomplete".into());
    }
    if format_cell(0.8469, 0.0033) != "84.69 ± 0.33" {
        line.failures.push("cell format".into());
    }
    for r in &summary {
        let cell = format_cell(r.mean, r.std);
        if !table_cell_ok(&cell) || !table.contains(&cell) {
            line.failures.push(format!("{} is not tabulated as mean ± std: {cell}", r.spec));
        }
    }

    let (Some(nnm), Some(dsm)) = (row(&summary, ModelKind::Nnm), row(&summary, ModelKind::Dsm)) else {
        line.failures.push("headline cells missing".into());
        return "no headline".into();
    };
    if nnm.mean < 0.75 {
        line.failures.push(format!("NNM accuracy {:.4} < 0.75", nnm.mean));
    }
    let margin = 100.0 * (nnm.mean - dsm.mean);
    if margin < 2.0 {
        line.advisory.push(format!("NNM exceeds DSM by {margin:.2} points, short of 2"));
    }
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let limit = Duration::from_secs(30 * 60);
    if grid_time > limit {
        let msg = format!("corpus to report took {:.1} min on {cores} core(s)", grid_time.as_secs_f64() / 60.0);
        if cores >= 4 {
            line.failures.push(msg);
        } else {
            line.advisory.push(msg);
        }
    }
    format!(
        "NNM {} vs DSM {} (margin {margin:+.2}), 24 cells x {} seeds in {:.1} min on {cores} core(s)",
        format_cell(nnm.mean, nnm.std),
        format_cell(dsm.mean, dsm.std),
        config.datasets,
        grid_time.as_secs_f64() / 60.0
    )
}

fn determinism(failures: &mut Vec<String>) -> String {
    let a = generate(&SynthConfig::tiny(21));
    let b = generate(&SynthConfig::tiny(21));
    if a.fivegrams != b.fivegrams || a.unigrams != b.unigrams {
        failures.push("synthetic corpus differs between runs".into());
    }
    let config = common::tiny_config();
    let options = GridOptions { cells: full_grid(), model_dir: None };
    let first = run_grid(&common::synthetic_artifacts(&a, &config), &config, &options).unwrap();
    let second = run_grid(&common::synthetic_artifacts(&b, &config), &config, &options).unwrap();
    let (x, y) = (common::report_csvs(&first), common::report_csvs(&second));
    for (name, (p, q)) in ["report", "summary", "thresholds"].iter().zip(x.iter().zip(&y)) {
        if p != q {
            failures.push(format!("{name}.csv differs"));
        }
    }
    format!("corpus and 24-cell report CSVs identical across two runs ({} rows)", first.outcomes.len())
}

fn main() {
    let mut lines = Vec::new();
    let mut report = |line: Line| {
        line.print();
        lines.push(line);
    };
    report(run("formula-oracles", Some(10), formula_oracles));
    report(run("svd", Some(30), svd_checks));
    report(run("gradient-checks", Some(60), gradient_checks));
    report(run("gbdt", None, gbdt_checks));
    report(run("sampling", None, sampling_checks));

    let clock = Instant::now();
    let synth = generate(&SynthConfig::default());
    let decades: BTreeSet<u16> = synth.fivegrams.iter().map(|r| r.year / 10 * 10).collect();
    let config = PipelineConfig::synthetic();
    let artifacts = common::synthetic_artifacts(&synth, &config);
    let setup = clock.elapsed();
    println!(
        "     synthetic corpus: {} 5-grams over {} decades; {} / {} / {} train / validation / test compounds; prepared in {:.1} s",
        synth.fivegrams.len(),
        decades.len(),
        artifacts.index.splits.train.len(),
        artifacts.index.splits.validation.len(),
        artifacts.index.splits.test.len(),
        setup.as_secs_f64()
    );
    report(run("temporal-hygiene", None, |f| hygiene_checks(&artifacts, &config, f)));

    let mut e2e = run("end-to-end", None, |_| String::new());
    let clock = Instant::now();
    e2e.detail = end_to_end(&mut e2e, &artifacts, &config, setup);
    e2e.elapsed = setup + clock.elapsed();
    report(e2e);
    report(run("determinism", None, determinism));

    let gating = lines.iter().filter(|l| !l.failures.is_empty() || !l.within_budget()).count();
    let passed = lines.iter().filter(|l| l.passed()).count();
    println!("\n{passed} of {} criteria pass", lines.len());
    if gating > 0 {
        std::process::exit(1);
    }
}
