//! Dense embedding tables and their on-disk layout.
//!
//! A store directory holds `manifest.json` plus one little-endian `f32`
//! row-major matrix file per slice; row order follows the manifest's key
//! list for that slice.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::matrix::MatrixSet;
use super::svd::{truncated_svd, SvdError, Weighting};
use super::{ContextAspect, Role, Slice, TargetKey, TimeAspect};
use crate::decade::Decade;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("SVD of slice {slice} failed")]
    Svd { slice: Slice, source: SvdError },
    #[error("{0:?} is absent from every requested decade")]
    AbsentEverywhere(TargetKey),
    #[error("store i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("store manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("matrix file {file} has {found} bytes, expected {expected}")]
    Truncated {
        file: String,
        found: usize,
        expected: usize,
    },
}

/// Dense vectors for the rows of one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub slice: Slice,
    dims: usize,
    keys: Vec<TargetKey>,
    data: Vec<f32>,
    index: HashMap<TargetKey, usize>,
}

impl EmbeddingTable {
    pub fn new(slice: Slice, dims: usize, keys: Vec<TargetKey>, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), keys.len() * dims, "embedding data shape");
        let index = keys
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i))
            .collect();
        EmbeddingTable {
            slice,
            dims,
            keys,
            data,
            index,
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[TargetKey] {
        &self.keys
    }

    pub fn get(&self, key: &TargetKey) -> Option<&[f32]> {
        self.index
            .get(key)
            .map(|&i| &self.data[i * self.dims..(i + 1) * self.dims])
    }

    /// Mean Euclidean norm over rows of the given roles (0 when none).
    pub fn mean_norm(&self, roles: &[Role]) -> f64 {
        let (mut sum, mut n) = (0.0f64, 0usize);
        for (i, k) in self.keys.iter().enumerate() {
            if roles.contains(&k.role) {
                let row = &self.data[i * self.dims..(i + 1) * self.dims];
                sum += row.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

/// Embeddings for one (context, time) aspect pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    pub context: ContextAspect,
    pub time: TimeAspect,
    pub dims: usize,
    pub weighting: Weighting,
    pub seed: u64,
    tables: Vec<EmbeddingTable>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SliceManifest {
    slice: Slice,
    file: String,
    rows: usize,
    keys: Vec<TargetKey>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StoreManifest {
    dims: usize,
    context: ContextAspect,
    time: TimeAspect,
    roles: Vec<Role>,
    decades: Vec<Decade>,
    weighting: Weighting,
    seed: u64,
    slices: Vec<SliceManifest>,
}

/// One step of a constituent's decade sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceStep {
    pub vector: Vec<f32>,
    pub absent: bool,
}

impl EmbeddingStore {
    pub fn new(
        context: ContextAspect,
        time: TimeAspect,
        dims: usize,
        weighting: Weighting,
        seed: u64,
        mut tables: Vec<EmbeddingTable>,
    ) -> Self {
        tables.sort_by_key(|t| t.slice);
        EmbeddingStore {
            context,
            time,
            dims,
            weighting,
            seed,
            tables,
        }
    }

    pub fn tables(&self) -> &[EmbeddingTable] {
        &self.tables
    }

    pub fn table(&self, slice: Slice) -> Option<&EmbeddingTable> {
        self.tables.iter().find(|t| t.slice == slice)
    }

    /// Vector of `key` in `slice`; `None` when the key has no row there.
    pub fn get(&self, key: &TargetKey, slice: Slice) -> Option<&[f32]> {
        self.table(slice).and_then(|t| t.get(key))
    }

    /// Decades that contributed to this store.
    pub fn decades(&self) -> Vec<Decade> {
        self.tables
            .iter()
            .filter_map(|t| match t.slice {
                Slice::Decade(d) => Some(d),
                Slice::All => None,
            })
            .collect()
    }

    pub fn save(&self, dir: &Path) -> Result<(), StoreError> {
        fs::create_dir_all(dir)?;
        let mut slices = Vec::new();
        for t in &self.tables {
            let file = format!("{}-{}.f32", self.context.as_str(), t.slice);
            let mut bytes = Vec::with_capacity(t.data.len() * 4);
            for x in &t.data {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
            fs::write(dir.join(&file), bytes)?;
            slices.push(SliceManifest {
                slice: t.slice,
                file,
                rows: t.len(),
                keys: t.keys.clone(),
            });
        }
        let manifest = StoreManifest {
            dims: self.dims,
            context: self.context,
            time: self.time,
            roles: self.context.roles().to_vec(),
            decades: self.decades(),
            weighting: self.weighting,
            seed: self.seed,
            slices,
        };
        fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, StoreError> {
        let manifest: StoreManifest =
            serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
        let mut tables = Vec::new();
        for s in manifest.slices {
            let bytes = fs::read(dir.join(&s.file))?;
            let expected = s.rows * manifest.dims * 4;
            if bytes.len() != expected {
                return Err(StoreError::Truncated {
                    file: s.file,
                    found: bytes.len(),
                    expected,
                });
            }
            let data = bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            tables.push(EmbeddingTable::new(s.slice, manifest.dims, s.keys, data));
        }
        Ok(EmbeddingStore::new(
            manifest.context,
            manifest.time,
            manifest.dims,
            manifest.weighting,
            manifest.seed,
            tables,
        ))
    }
}

/// Decomposes every matrix of the set. Slices without rows yield empty
/// tables; every other slice must admit a rank-`k` decomposition.
pub fn build_store(
    set: &MatrixSet,
    k: usize,
    weighting: Weighting,
    seed: u64,
) -> Result<EmbeddingStore, StoreError> {
    let tables = set
        .matrices
        .par_iter()
        .map(|m| {
            if m.n_rows() == 0 {
                return Ok(EmbeddingTable::new(m.slice, k, Vec::new(), Vec::new()));
            }
            let svd = truncated_svd(m, k, weighting, seed).map_err(|source| StoreError::Svd {
                slice: m.slice,
                source,
            })?;
            let emb = svd.row_embeddings();
            let mut data = Vec::with_capacity(m.n_rows() * k);
            for r in 0..m.n_rows() {
                data.extend(emb.row(r).iter().map(|x| *x as f32));
            }
            Ok(EmbeddingTable::new(m.slice, k, m.keys().to_vec(), data))
        })
        .collect::<Result<Vec<_>, StoreError>>()?;
    Ok(EmbeddingStore::new(set.context, set.time, k, weighting, seed, tables))
}

/// One vector per requested decade, in the given order; decades where the
/// key has no row give a zero vector flagged absent.
pub fn embedding_sequence(
    key: &TargetKey,
    store: &EmbeddingStore,
    decades: &[Decade],
) -> Result<Vec<SequenceStep>, StoreError> {
    let steps: Vec<SequenceStep> = decades
        .iter()
        .map(|&d| match store.get(key, Slice::Decade(d)) {
            Some(v) => SequenceStep {
                vector: v.to_vec(),
                absent: false,
            },
            None => SequenceStep {
                vector: vec![0.0; store.dims],
                absent: true,
            },
        })
        .collect();
    if !steps.is_empty() && steps.iter().all(|s| s.absent) {
        return Err(StoreError::AbsentEverywhere(key.clone()));
    }
    Ok(steps)
}
