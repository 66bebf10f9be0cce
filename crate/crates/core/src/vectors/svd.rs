//! Randomized truncated SVD of sparse co-occurrence matrices.
//!
//! Range finding with a seeded Gaussian test matrix, two power iterations
//! with re-orthonormalization, then an exact SVD of the small projected
//! matrix. Signs are fixed so that the largest-magnitude entry of every right
//! singular vector is positive, which keeps decompositions of matrices over
//! the same context columns comparable.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::matrix::CooccurrenceMatrix;

pub const OVERSAMPLING: usize = 10;
pub const POWER_ITERATIONS: usize = 2;

/// Cell weighting applied before decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Raw,
    Log1p,
    Ppmi,
}

impl Weighting {
    pub fn as_str(self) -> &'static str {
        match self {
            Weighting::Raw => "raw",
            Weighting::Log1p => "log1p",
            Weighting::Ppmi => "ppmi",
        }
    }

    pub fn apply(self, m: &CooccurrenceMatrix) -> CooccurrenceMatrix {
        match self {
            Weighting::Raw => m.clone(),
            Weighting::Log1p => m.map_values(|_, _, v| v.ln_1p()),
            Weighting::Ppmi => {
                let rows = m.row_sums();
                let cols = m.col_sums();
                let total = m.total();
                m.map_values(|r, c, v| {
                    if v <= 0.0 {
                        return 0.0;
                    }
                    (v * total / (rows[r] * cols[c])).log2().max(0.0)
                })
            }
        }
    }
}

impl FromStr for Weighting {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(Weighting::Raw),
            "log1p" | "log" => Ok(Weighting::Log1p),
            "ppmi" => Ok(Weighting::Ppmi),
            _ => Err(format!("unknown weighting {s:?} (raw, log1p, ppmi)")),
        }
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvdError {
    #[error("rank {k} exceeds min(rows, cols) = min({rows}, {cols})")]
    RankTooLarge { k: usize, rows: usize, cols: usize },
    #[error("rank must be at least 1")]
    ZeroRank,
    #[error("matrix has no non-zero cells")]
    AllZero,
}

/// Rank-k factors `U_k`, `Sigma_k`, `V_k^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSvd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub vt: DMatrix<f64>,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// Row embeddings `U_k Sigma_k`.
    pub fn row_embeddings(&self) -> DMatrix<f64> {
        let mut e = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            e.column_mut(j).scale_mut(*s);
        }
        e
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.row_embeddings() * &self.vt
    }
}

fn orthonormal_basis(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

/// Rank-`k` randomized SVD of the weighted matrix. Deterministic in `seed`.
pub fn truncated_svd(
    matrix: &CooccurrenceMatrix,
    k: usize,
    weighting: Weighting,
    seed: u64,
) -> Result<TruncatedSvd, SvdError> {
    let (rows, cols) = (matrix.n_rows(), matrix.n_cols());
    if k == 0 {
        return Err(SvdError::ZeroRank);
    }
    if k > rows.min(cols) {
        return Err(SvdError::RankTooLarge { k, rows, cols });
    }
    let a = weighting.apply(matrix);
    if a.triplets().all(|(_, _, v)| v == 0.0) {
        return Err(SvdError::AllZero);
    }

    let l = (k + OVERSAMPLING).min(rows.min(cols));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(cols, l, |_, _| StandardNormal.sample(&mut rng));

    let mut q = orthonormal_basis(a.mul_dense(&omega));
    for _ in 0..POWER_ITERATIONS {
        let z = orthonormal_basis(a.tr_mul_dense(&q));
        q = orthonormal_basis(a.mul_dense(&z));
    }

    // B = Q^T A, an l x cols matrix.
    let b = a.tr_mul_dense(&q).transpose();
    let svd = b.svd(true, true);
    let u_small = svd.u.expect("u requested");
    let vt_small = svd.v_t.expect("v_t requested");

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    order.truncate(k);

    let u_full = &q * &u_small;
    let mut u = DMatrix::zeros(rows, k);
    let mut vt = DMatrix::zeros(k, cols);
    let mut sigma = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let v_row = vt_small.row(src);
        let pivot = v_row
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        u.set_column(dst, &(u_full.column(src) * sign));
        vt.set_row(dst, &(v_row * sign));
        sigma.push(svd.singular_values[src].max(0.0));
    }
    Ok(TruncatedSvd { u, sigma, vt })
}
