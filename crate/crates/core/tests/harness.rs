mod common;

use common::{report_csvs, synthetic_artifacts, tiny_config};
use compounding::decade::Decade;
use compounding::harness::{
    build_datasets, check_temporal_hygiene, constant_classifier_accuracy, full_grid, run_grid, select_cells, summarize,
    table2, GridOptions, HarnessError, ModelKind,
};
use compounding::sampling::Scenario;
use compounding::synth::{generate, SynthConfig};
use compounding::vectors::{ContextAspect, CooccurrenceMatrix, Role, Slice, TargetKey, TimeAspect};

const CC_DC: (ContextAspect, TimeAspect) = (ContextAspect::CompoundCentric, TimeAspect::DecadeCentric);

#[test]
fn hygiene_passes_then_catches_tampering() {
    let config = tiny_config();
    let artifacts = synthetic_artifacts(&generate(&SynthConfig::tiny(3)), &config);
    for &aspects in artifacts.matrices.keys() {
        let r = check_temporal_hygiene(&artifacts, aspects).unwrap();
        assert!(r.held_out_compounds > 0);
    }

    let mut late = artifacts.clone();
    late.matrices.get_mut(&CC_DC).unwrap().matrices[0].slice = Slice::Decade(Decade(2000));
    assert!(matches!(check_temporal_hygiene(&late, CC_DC), Err(HarnessError::Hygiene(_))));

    let mut leaked = artifacts.clone();
    let novel = artifacts.index.splits.test.iter().next().unwrap().clone();
    let set = leaked.matrices.get_mut(&CC_DC).unwrap();
    let m = &set.matrices[5];
    let mut entries: Vec<(TargetKey, usize, f64)> = m.triplets().map(|(r, c, v)| (m.keys()[r].clone(), c, v)).collect();
    entries.push((TargetKey::new(novel.bigram(), Role::CompoundBigram), 0, 1.0));
    set.matrices[5] = CooccurrenceMatrix::from_entries(m.slice, m.n_cols(), entries);
    let err = check_temporal_hygiene(&leaked, CC_DC).unwrap_err();
    assert!(err.to_string().contains(&novel.bigram()), "{err}");

    let mut early = artifacts.clone();
    early.index.splits.train.insert(novel);
    assert!(check_temporal_hygiene(&early, CC_DC).is_err());
}

#[test]
fn constant_classifier_scores_one_half() {
    let config = tiny_config();
    let artifacts = synthetic_artifacts(&generate(&SynthConfig::tiny(4)), &config);
    for scenario in Scenario::ALL {
        for d in build_datasets(&artifacts.index, &artifacts.layout, scenario, &config).unwrap() {
            for data in [&d.train, &d.validation, &d.test] {
                assert_eq!(constant_classifier_accuracy(data), 0.5);
            }
        }
    }
}

#[test]
fn small_grid_is_deterministic_and_reported() {
    let config = tiny_config();
    let artifacts = synthetic_artifacts(&generate(&SynthConfig::tiny(6)), &config);
    let cells = select_cells(&[], &[ContextAspect::CompoundCentric], &[], &[Scenario::CorruptHead]);
    assert_eq!(cells.len(), 6);
    let options = GridOptions { cells, model_dir: None };
    let a = run_grid(&artifacts, &config, &options).unwrap();
    let b = run_grid(&artifacts, &config, &options).unwrap();
    assert_eq!(report_csvs(&a), report_csvs(&b));
    assert_eq!(a.outcomes.len(), 6 * config.datasets);
    assert_eq!(a.metadata.hygiene.len(), 2);
    for o in &a.outcomes {
        assert!((0.0..=1.0).contains(&o.accuracy));
        assert_eq!(o.learning_rate.is_some(), o.spec.model == ModelKind::Nnm);
    }
    let summary = summarize(&a.outcomes);
    assert_eq!(summary.len(), 6);
    let table = table2(&summary);
    assert!(table.contains(" ± "), "{table}");
    assert_eq!(full_grid().len(), 24);
}
