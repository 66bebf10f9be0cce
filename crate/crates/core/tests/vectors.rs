mod common;

use common::{optimal_rank_k_error, random_counts, rel_error, singular_values, toy_corpus};
use compounding::decade::DecadeLayout;
use compounding::vectors::{
    build_matrices, truncated_svd, ContextAspect, CooccurrenceMatrix, Role, Slice, TargetKey, TimeAspect, Weighting,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

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

#[test]
fn randomized_svd_tracks_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_counts(&mut rng, 200, 500, 0.05);
    let m = sparse(&a);
    let dense = m.to_dense();
    assert_eq!(dense, a);
    let oracle = singular_values(&dense);
    let mut prev = f64::INFINITY;
    for k in [1, 2, 5, 10, 25, 50, 100, 200] {
        let svd = truncated_svd(&m, k, Weighting::Raw, 3).unwrap();
        let err = rel_error(&dense, &svd.reconstruct());
        let best = optimal_rank_k_error(&dense, k);
        assert!(err <= prev + 1e-12, "k {k}: {err} after {prev}");
        assert!(err >= best - 1e-9, "k {k}: {err} beats the optimum {best}");
        assert!(err <= best * 1.05 + 1e-9, "k {k}: {err} vs optimum {best}");
        assert!((svd.sigma[0] - oracle[0]).abs() <= 1e-2 * oracle[0]);
        prev = err;
    }
}

#[test]
fn rank_one_and_full_rank_recovery() {
    let u: Vec<f64> = (0..50).map(|i| (i % 7 + 1) as f64).collect();
    let v: Vec<f64> = (0..80).map(|j| (j % 5 + 2) as f64).collect();
    let a = DMatrix::from_fn(50, 80, |i, j| u[i] * v[j]);
    let svd = truncated_svd(&sparse(&a), 1, Weighting::Raw, 0).unwrap();
    assert!(rel_error(&a, &svd.reconstruct()) <= 1e-8);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let b = random_counts(&mut rng, 40, 25, 0.4);
    let svd = truncated_svd(&sparse(&b), 25, Weighting::Raw, 0).unwrap();
    assert!(rel_error(&b, &svd.reconstruct()) <= 1e-6);
    let oracle = singular_values(&b);
    for (s, o) in svd.sigma.iter().zip(&oracle) {
        assert!((s - o).abs() <= 1e-8 * oracle[0]);
    }
}

#[test]
fn factors_are_deterministic_in_the_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let m = sparse(&random_counts(&mut rng, 60, 90, 0.1));
    for w in [Weighting::Raw, Weighting::Log1p, Weighting::Ppmi] {
        assert_eq!(truncated_svd(&m, 8, w, 4).unwrap(), truncated_svd(&m, 8, w, 4).unwrap());
    }
}

fn entries(m: &CooccurrenceMatrix) -> std::collections::BTreeMap<(TargetKey, usize), f64> {
    m.triplets().map(|(r, c, v)| ((m.keys()[r].clone(), c), v)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decade_slices_sum_to_the_pooled_matrix(seed in 0u64..10_000) {
        let toy = toy_corpus(seed);
        let records = toy.records();
        let vocab = toy.vocabulary();
        let layout = DecadeLayout::default();
        let held_out = toy.lines.iter().filter(|l| l.decade() >= 1990).count() as u64;
        for context in ContextAspect::ALL {
            let dc = build_matrices(&records, &vocab, context, TimeAspect::DecadeCentric, &layout);
            let da = build_matrices(&records, &vocab, context, TimeAspect::DecadeAgnostic, &layout);
            prop_assert_eq!(dc.matrices.len(), 19);
            prop_assert_eq!(dc.rejected, held_out);
            prop_assert_eq!(da.rejected, held_out);
            let mut summed = std::collections::BTreeMap::new();
            for m in &dc.matrices {
                for (k, v) in entries(m) {
                    *summed.entry(k).or_insert(0.0) += v;
                }
            }
            prop_assert_eq!(summed, entries(&da.matrices[0]));
        }
    }
}
