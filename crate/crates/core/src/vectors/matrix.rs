use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::contexts::collect_contexts;
use super::{ContextAspect, Slice, TargetKey, TimeAspect};
use crate::corpus::{ContextVocabulary, NgramRecord};
use crate::decade::DecadeLayout;

/// Sparse target x context counts in compressed-row form. Rows are sorted by
/// key and only rows with at least one count are present; columns cover the
/// full context vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooccurrenceMatrix {
    pub slice: Slice,
    keys: Vec<TargetKey>,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    #[serde(skip)]
    index: HashMap<TargetKey, usize>,
}

impl CooccurrenceMatrix {
    /// Builds a matrix from (row key, column, value) entries; duplicates are
    /// summed.
    pub fn from_entries(
        slice: Slice,
        n_cols: usize,
        entries: impl IntoIterator<Item = (TargetKey, usize, f64)>,
    ) -> Self {
        let mut rows: BTreeMap<TargetKey, BTreeMap<u32, f64>> = BTreeMap::new();
        for (key, col, v) in entries {
            assert!(col < n_cols, "column {col} out of range {n_cols}");
            *rows.entry(key).or_default().entry(col as u32).or_insert(0.0) += v;
        }
        Self::from_rows(slice, n_cols, rows)
    }

    fn from_rows(slice: Slice, n_cols: usize, rows: BTreeMap<TargetKey, BTreeMap<u32, f64>>) -> Self {
        let mut keys = Vec::with_capacity(rows.len());
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (key, cols) in rows {
            keys.push(key);
            for (c, v) in cols {
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        let mut m = CooccurrenceMatrix {
            slice,
            keys,
            n_cols,
            indptr,
            indices,
            values,
            index: HashMap::new(),
        };
        m.reindex();
        m
    }

    /// Rebuilds the key lookup after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .keys
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i))
            .collect();
    }

    pub fn n_rows(&self) -> usize {
        self.keys.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn keys(&self) -> &[TargetKey] {
        &self.keys
    }

    pub fn row_of(&self, key: &TargetKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// Sparse row as (column, value) slices.
    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn row_by_key(&self, key: &TargetKey) -> Option<(&[u32], &[f64])> {
        self.row_of(key).map(|r| self.row(r))
    }

    pub fn get(&self, key: &TargetKey, col: usize) -> f64 {
        self.row_by_key(key)
            .and_then(|(cols, vals)| {
                cols.binary_search(&(col as u32)).ok().map(|i| vals[i])
            })
            .unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Iterates (row, column, value) over stored cells.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows()).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c as usize, v))
        })
    }

    /// Same sparsity pattern with every value mapped through `f`.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> CooccurrenceMatrix {
        let mut out = self.clone();
        for r in 0..self.n_rows() {
            for i in self.indptr[r]..self.indptr[r + 1] {
                out.values[i] = f(r, self.indices[i] as usize, self.values[i]);
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows()).map(|r| self.row(r).1.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_cols];
        for (_, c, v) in self.triplets() {
            sums[c] += v;
        }
        sums
    }

    /// `self * x` for a dense column-major `n_cols x l` matrix.
    pub(crate) fn mul_dense(&self, x: &nalgebra::DMatrix<f64>) -> nalgebra::DMatrix<f64> {
        debug_assert_eq!(x.nrows(), self.n_cols);
        let l = x.ncols();
        let mut out = nalgebra::DMatrix::zeros(self.n_rows(), l);
        for j in 0..l {
            let xc = x.column(j);
            for r in 0..self.n_rows() {
                let (cols, vals) = self.row(r);
                let mut acc = 0.0;
                for (&c, &v) in cols.iter().zip(vals) {
                    acc += v * xc[c as usize];
                }
                out[(r, j)] = acc;
            }
        }
        out
    }

    /// `self^T * y` for a dense `n_rows x l` matrix.
    pub(crate) fn tr_mul_dense(&self, y: &nalgebra::DMatrix<f64>) -> nalgebra::DMatrix<f64> {
        debug_assert_eq!(y.nrows(), self.n_rows());
        let l = y.ncols();
        let mut out = nalgebra::DMatrix::zeros(self.n_cols, l);
        for j in 0..l {
            let yc = y.column(j);
            let mut oc = out.column_mut(j);
            for r in 0..self.n_rows() {
                let yr = yc[r];
                if yr == 0.0 {
                    continue;
                }
                let (cols, vals) = self.row(r);
                for (&c, &v) in cols.iter().zip(vals) {
                    oc[c as usize] += v * yr;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.n_rows(), self.n_cols);
        for (r, c, v) in self.triplets() {
            d[(r, c)] = v;
        }
        d
    }
}

/// Accumulates integer co-occurrence counts for one slice.
#[derive(Debug, Clone)]
pub struct MatrixBuilder {
    slice: Slice,
    n_cols: usize,
    rows: HashMap<TargetKey, HashMap<u32, u64>>,
}

impl MatrixBuilder {
    pub fn new(slice: Slice, n_cols: usize) -> Self {
        MatrixBuilder {
            slice,
            n_cols,
            rows: HashMap::new(),
        }
    }

    pub fn add(&mut self, target: TargetKey, column: usize, weight: u64) {
        *self
            .rows
            .entry(target)
            .or_default()
            .entry(column as u32)
            .or_insert(0) += weight;
    }

    pub fn merge(&mut self, other: MatrixBuilder) {
        for (key, cols) in other.rows {
            let slot = self.rows.entry(key).or_default();
            for (c, v) in cols {
                *slot.entry(c).or_insert(0) += v;
            }
        }
    }

    pub fn finish(self) -> CooccurrenceMatrix {
        let rows = self
            .rows
            .into_iter()
            .map(|(k, cols)| (k, cols.into_iter().map(|(c, v)| (c, v as f64)).collect()))
            .collect();
        CooccurrenceMatrix::from_rows(self.slice, self.n_cols, rows)
    }
}

/// Matrices for one (context, time) aspect pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSet {
    pub context: ContextAspect,
    pub time: TimeAspect,
    /// One matrix per training decade (DecadeCentric) or a single
    /// aggregate (DecadeAgnostic), in chronological order.
    pub matrices: Vec<CooccurrenceMatrix>,
    /// Records outside the training decades.
    pub rejected: u64,
}

impl MatrixSet {
    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, self).map_err(std::io::Error::other)
    }

    pub fn load(path: &std::path::Path) -> std::io::Result<MatrixSet> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut set: MatrixSet = serde_json::from_reader(file).map_err(std::io::Error::other)?;
        for m in &mut set.matrices {
            m.reindex();
        }
        Ok(set)
    }

    pub fn slice(&self, slice: Slice) -> Option<&CooccurrenceMatrix> {
        self.matrices.iter().find(|m| m.slice == slice)
    }
}

struct Accumulator {
    builders: Vec<MatrixBuilder>,
    rejected: u64,
}

/// Builds co-occurrence matrices over the training decades.
pub fn build_matrices(
    records: &[NgramRecord],
    vocab: &ContextVocabulary,
    context: ContextAspect,
    time: TimeAspect,
    layout: &DecadeLayout,
) -> MatrixSet {
    let slices: Vec<Slice> = match time {
        TimeAspect::DecadeCentric => layout
            .training_decades()
            .into_iter()
            .map(Slice::Decade)
            .collect(),
        TimeAspect::DecadeAgnostic => vec![Slice::All],
    };
    let first = layout.first_training();
    let fresh = || Accumulator {
        builders: slices
            .iter()
            .map(|&s| MatrixBuilder::new(s, vocab.len()))
            .collect(),
        rejected: 0,
    };
    let acc = records
        .par_chunks(4096)
        .map(|chunk| {
            let mut acc = fresh();
            for rec in chunk {
                let decade = match layout.decade_of(rec.year) {
                    Some(d) if layout.is_training(d) => d,
                    _ => {
                        acc.rejected += 1;
                        continue;
                    }
                };
                let slot = match time {
                    TimeAspect::DecadeCentric => ((decade.0 - first.0) / 10) as usize,
                    TimeAspect::DecadeAgnostic => 0,
                };
                for hit in collect_contexts(rec, vocab, context) {
                    acc.builders[slot].add(hit.target, hit.column, hit.weight);
                }
            }
            acc
        })
        .reduce(fresh, |mut a, b| {
            for (x, y) in a.builders.iter_mut().zip(b.builders) {
                x.merge(y);
            }
            a.rejected += b.rejected;
            a
        });
    MatrixSet {
        context,
        time,
        matrices: acc.builders.into_iter().map(MatrixBuilder::finish).collect(),
        rejected: acc.rejected,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_ngram_line, Pos, VocabEntry};
    use crate::decade::Decade;
    use crate::vectors::Role;

    fn vocab(words: &[&str]) -> ContextVocabulary {
        ContextVocabulary::from_entries(
            words
                .iter()
                .map(|w| VocabEntry {
                    lexeme: w.to_string(),
                    pos: Pos::Adj,
                    total_count: 1,
                })
                .collect(),
        )
    }

    fn line(year: u16, count: u64) -> NgramRecord {
        parse_ngram_line(
            &format!("the_DET red_ADJ pepper_NOUN mill_NOUN is_VERB\t{year}\t{count}\t1"),
            5,
        )
        .unwrap()
    }

    #[test]
    fn decade_centric_buckets_per_decade() {
        let v = vocab(&["red"]);
        let recs = vec![line(1805, 2), line(1812, 5)];
        let layout = DecadeLayout::default();
        let set = build_matrices(&recs, &v, ContextAspect::CompoundCentric, TimeAspect::DecadeCentric, &layout);
        assert_eq!(set.matrices.len(), 19);
        let head = TargetKey::new("mill", Role::HeadOfCompound);
        let m1800 = set.slice(Slice::Decade(Decade(1800))).unwrap();
        let m1810 = set.slice(Slice::Decade(Decade(1810))).unwrap();
        assert_eq!(m1800.get(&head, 0), 2.0);
        assert_eq!(m1810.get(&head, 0), 5.0);
        assert_eq!(set.slice(Slice::Decade(Decade(1820))).unwrap().n_rows(), 0);

        let all = build_matrices(&recs, &v, ContextAspect::CompoundCentric, TimeAspect::DecadeAgnostic, &layout);
        assert_eq!(all.matrices.len(), 1);
        assert_eq!(all.matrices[0].get(&head, 0), 7.0);
    }

    #[test]
    fn out_of_training_records_are_rejected() {
        let v = vocab(&["red"]);
        let recs = vec![line(1995, 2), line(2001, 5), line(1790, 1), line(1900, 1)];
        let set = build_matrices(&recs, &v, ContextAspect::CompoundAgnostic, TimeAspect::DecadeAgnostic, &DecadeLayout::default());
        assert_eq!(set.rejected, 3);
        assert_eq!(set.matrices[0].get(&TargetKey::new("pepper", Role::StandaloneWord), 0), 1.0);
    }

    #[test]
    fn empty_stream_gives_empty_matrices() {
        let v = vocab(&["red"]);
        let set = build_matrices(&[], &v, ContextAspect::CompoundCentric, TimeAspect::DecadeCentric, &DecadeLayout::default());
        assert!(set.matrices.iter().all(|m| m.n_rows() == 0 && m.n_cols() == 1));
    }

    #[test]
    fn dense_products_match() {
        let m = CooccurrenceMatrix::from_entries(
            Slice::All,
            3,
            vec![
                (TargetKey::new("a", Role::StandaloneWord), 0, 1.0),
                (TargetKey::new("a", Role::StandaloneWord), 2, 2.0),
                (TargetKey::new("b", Role::StandaloneWord), 1, 3.0),
            ],
        );
        let x = nalgebra::DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let dense = m.to_dense();
        assert_eq!(m.mul_dense(&x), &dense * &x);
        let y = nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.tr_mul_dense(&y), dense.transpose() * &y);
    }
}
