//! Second-order gradient boosted regression trees with logistic loss.
//!
//! Splits are found by exact greedy search over midpoints of consecutive
//! distinct feature values. Values at or below [`MISSING_CUTOFF`] are
//! treated as missing and follow a default direction learned per split.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Encoding of an undefined feature value.
pub const MISSING: f64 = -1.0e30;
pub const MISSING_CUTOFF: f64 = -1.0e29;

const MIN_GAIN: f64 = 1e-12;

#[inline]
pub fn is_missing(x: f64) -> bool {
    x <= MISSING_CUTOFF
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtConfig {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub n_estimators: usize,
    pub min_child_weight: f64,
    pub subsample: f64,
    pub gamma: f64,
    pub l1_alpha: f64,
    pub l2_lambda: f64,
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            learning_rate: 0.1,
            max_depth: 3,
            n_estimators: 100,
            min_child_weight: 6.0,
            subsample: 0.5,
            gamma: 0.0,
            l1_alpha: 0.05,
            l2_lambda: 1.0,
            seed: 0,
        }
    }
}

impl GbdtConfig {
    fn validate(&self) -> Result<(), GbdtError> {
        let non_negative = [
            self.learning_rate,
            self.min_child_weight,
            self.gamma,
            self.l1_alpha,
            self.l2_lambda,
        ];
        if non_negative.iter().any(|v| !(*v >= 0.0)) || !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(GbdtError::Config(*self));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GbdtError {
    #[error("no training rows")]
    Empty,
    #[error("row {row} has width {found}, expected {expected}")]
    Width { row: usize, found: usize, expected: usize },
    #[error("{labels} labels for {rows} rows")]
    LabelCount { labels: usize, rows: usize },
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("feature ({row}, {col}) is NaN")]
    NaN { row: usize, col: usize },
    #[error("invalid configuration {0:?}")]
    Config(GbdtConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        default_left: bool,
        left: usize,
        right: usize,
        cover: f64,
    },
    Leaf {
        weight: f64,
        cover: f64,
    },
}

/// A binary regression tree; node 0 is the root. Rows with
/// `x[feature] < threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    default_left,
                    left,
                    right,
                    ..
                } => {
                    let x = row[*feature];
                    let go_left = if is_missing(x) { *default_left } else { x < *threshold };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { weight, .. } => weight,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    /// Hessian sums of every non-root node.
    pub fn child_covers(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .skip(1)
            .map(|n| match n {
                Node::Split { cover, .. } | Node::Leaf { cover, .. } => *cover,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub config: GbdtConfig,
    pub n_features: usize,
    pub base_score: f64,
    pub trees: Vec<Tree>,
    /// Mean training log-loss after each round.
    pub train_loss: Vec<f64>,
}

impl TreeEnsemble {
    pub fn predict_margin(&self, row: &[f64]) -> Result<f64, GbdtError> {
        if row.len() != self.n_features {
            return Err(GbdtError::Width {
                row: 0,
                found: row.len(),
                expected: self.n_features,
            });
        }
        Ok(self.base_score
            + self
                .trees
                .iter()
                .map(|t| self.config.learning_rate * t.predict(row))
                .sum::<f64>())
    }

    pub fn predict_proba(&self, row: &[f64]) -> Result<f64, GbdtError> {
        self.predict_margin(row).map(sigmoid)
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

/// Mean logistic loss of margins against labels.
pub fn log_loss(margins: &[f64], labels: &[bool]) -> f64 {
    let total: f64 = margins
        .iter()
        .zip(labels)
        .map(|(&m, &y)| {
            // log(1 + e^-m) for positives, log(1 + e^m) for negatives
            let z = if y { -m } else { m };
            if z > 0.0 {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            }
        })
        .sum();
    total / margins.len() as f64
}

fn soft_threshold(g: f64, alpha: f64) -> f64 {
    if g > alpha {
        g - alpha
    } else if g < -alpha {
        g + alpha
    } else {
        0.0
    }
}

struct Split {
    gain: f64,
    feature: usize,
    threshold: f64,
    default_left: bool,
    left_g: f64,
    left_h: f64,
}

const NONE: u32 = u32::MAX;

struct Builder<'a> {
    x: &'a [Vec<f64>],
    sorted: &'a [Vec<u32>],
    /// Feature values in `sorted` order.
    sorted_values: &'a [Vec<f64>],
    config: &'a GbdtConfig,
}

impl Builder<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        let t = soft_threshold(g, self.config.l1_alpha);
        t * t / (h + self.config.l2_lambda)
    }

    fn weight(&self, g: f64, h: f64) -> f64 {
        -soft_threshold(g, self.config.l1_alpha) / (h + self.config.l2_lambda)
    }

    /// Grows one tree over the rows whose `position` is `Some(0)`.
    fn grow(&self, grad: &[f64], hess: &[f64], position: &mut [Option<usize>]) -> Tree {
        let mut nodes: Vec<Node> = Vec::new();
        let (g0, h0) = position
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_some())
            .fold((0.0, 0.0), |(g, h), (i, _)| (g + grad[i], h + hess[i]));
        nodes.push(Node::Leaf {
            weight: self.weight(g0, h0),
            cover: h0,
        });
        let mut stats = vec![(g0, h0)];
        let mut node_rows = vec![position.iter().filter(|p| p.is_some()).count()];
        let mut frontier = vec![0usize];
        let mcw = self.config.min_child_weight;
        let n_features = self.x.first().map_or(0, Vec::len);

        for _depth in 0..self.config.max_depth {
            if frontier.is_empty() {
                break;
            }
            let mut slot_of = vec![NONE; nodes.len()];
            for (s, &n) in frontier.iter().enumerate() {
                slot_of[n] = s as u32;
            }
            let row_slot: Vec<u32> = position.iter().map(|p| p.map_or(NONE, |n| slot_of[n])).collect();
            let mut best: Vec<Option<Split>> = (0..frontier.len()).map(|_| None).collect();

            for f in 0..n_features {
                let order = &self.sorted[f];
                let values = &self.sorted_values[f];
                // Non-missing totals per frontier node.
                let mut present = vec![(0.0, 0.0); frontier.len()];
                let mut present_rows = vec![0usize; frontier.len()];
                for &r in order {
                    let s = row_slot[r as usize];
                    if s != NONE {
                        let (s, r) = (s as usize, r as usize);
                        present[s].0 += grad[r];
                        present[s].1 += hess[r];
                        present_rows[s] += 1;
                    }
                }
                let mut acc = vec![(0.0, 0.0); frontier.len()];
                let mut last: Vec<Option<f64>> = vec![None; frontier.len()];
                for (&r, &v) in order.iter().zip(values) {
                    let s = row_slot[r as usize];
                    if s == NONE {
                        continue;
                    }
                    let (s, r) = (s as usize, r as usize);
                    if let Some(prev) = last[s] {
                        if v > prev {
                            let (g, h) = stats[frontier[s]];
                            let (mg, mh) = (g - present[s].0, h - present[s].1);
                            let has_missing = present_rows[s] < node_rows[frontier[s]];
                            let directions: &[bool] = if has_missing { &[true, false] } else { &[true] };
                            for &default_left in directions {
                                let (lg, lh) = if default_left {
                                    (acc[s].0 + mg, acc[s].1 + mh)
                                } else {
                                    acc[s]
                                };
                                let (rg, rh) = (g - lg, h - lh);
                                if lh < mcw || rh < mcw {
                                    continue;
                                }
                                let gain = 0.5 * (self.score(lg, lh) + self.score(rg, rh) - self.score(g, h))
                                    - self.config.gamma;
                                if gain > MIN_GAIN && best[s].as_ref().is_none_or(|b| gain > b.gain) {
                                    best[s] = Some(Split {
                                        gain,
                                        feature: f,
                                        threshold: prev + (v - prev) / 2.0,
                                        default_left,
                                        left_g: lg,
                                        left_h: lh,
                                    });
                                }
                            }
                        }
                    }
                    acc[s].0 += grad[r];
                    acc[s].1 += hess[r];
                    last[s] = Some(v);
                }
            }

            let mut next = Vec::new();
            let mut routes: Vec<Option<(usize, f64, bool, usize, usize)>> = vec![None; frontier.len()];
            for (s, split) in best.into_iter().enumerate() {
                let Some(split) = split else { continue };
                let node = frontier[s];
                let (g, h) = stats[node];
                let (rg, rh) = (g - split.left_g, h - split.left_h);
                let left = nodes.len();
                nodes.push(Node::Leaf {
                    weight: self.weight(split.left_g, split.left_h),
                    cover: split.left_h,
                });
                stats.push((split.left_g, split.left_h));
                node_rows.push(0);
                let right = nodes.len();
                nodes.push(Node::Leaf {
                    weight: self.weight(rg, rh),
                    cover: rh,
                });
                stats.push((rg, rh));
                node_rows.push(0);
                nodes[node] = Node::Split {
                    feature: split.feature,
                    threshold: split.threshold,
                    default_left: split.default_left,
                    left,
                    right,
                    cover: h,
                };
                routes[s] = Some((split.feature, split.threshold, split.default_left, left, right));
                next.push(left);
                next.push(right);
            }
            for (r, p) in position.iter_mut().enumerate() {
                let Some(node) = *p else { continue };
                let s = slot_of[node];
                if s == NONE {
                    continue;
                }
                if let Some((f, t, dl, left, right)) = routes[s as usize] {
                    let v = self.x[r][f];
                    let go_left = if is_missing(v) { dl } else { v < t };
                    let child = if go_left { left } else { right };
                    node_rows[child] += 1;
                    *p = Some(child);
                }
            }
            frontier = next;
        }
        Tree { nodes }
    }
}

/// Fits an ensemble to `x` (rows of equal width) and boolean labels.
pub fn fit(x: &[Vec<f64>], y: &[bool], config: &GbdtConfig) -> Result<TreeEnsemble, GbdtError> {
    config.validate()?;
    if x.is_empty() {
        return Err(GbdtError::Empty);
    }
    if y.len() != x.len() {
        return Err(GbdtError::LabelCount {
            labels: y.len(),
            rows: x.len(),
        });
    }
    let width = x[0].len();
    for (r, row) in x.iter().enumerate() {
        if row.len() != width {
            return Err(GbdtError::Width {
                row: r,
                found: row.len(),
                expected: width,
            });
        }
        if let Some(c) = row.iter().position(|v| v.is_nan()) {
            return Err(GbdtError::NaN { row: r, col: c });
        }
    }
    let positives = y.iter().filter(|v| **v).count();
    if positives == 0 || positives == y.len() {
        return Err(GbdtError::SingleClass);
    }

    let n = x.len();
    let sorted: Vec<Vec<u32>> = (0..width)
        .map(|f| {
            let mut idx: Vec<u32> = (0..n as u32).filter(|&r| !is_missing(x[r as usize][f])).collect();
            idx.sort_by(|&a, &b| x[a as usize][f].total_cmp(&x[b as usize][f]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mean = positives as f64 / n as f64;
    let base_score = (mean / (1.0 - mean)).ln();
    let mut margins = vec![base_score; n];
    let sorted_values: Vec<Vec<f64>> = sorted
        .iter()
        .enumerate()
        .map(|(f, idx)| idx.iter().map(|&r| x[r as usize][f]).collect())
        .collect();
    let builder = Builder {
        x,
        sorted: &sorted,
        sorted_values: &sorted_values,
        config,
    };
    let n_sample = ((n as f64 * config.subsample).round() as usize).clamp(1, n);
    let mut trees = Vec::with_capacity(config.n_estimators);
    let mut train_loss = Vec::with_capacity(config.n_estimators);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];

    for round in 0..config.n_estimators {
        for i in 0..n {
            let p = sigmoid(margins[i]);
            grad[i] = p - if y[i] { 1.0 } else { 0.0 };
            hess[i] = p * (1.0 - p);
        }
        let mut position: Vec<Option<usize>> = vec![None; n];
        if n_sample == n {
            position.iter_mut().for_each(|p| *p = Some(0));
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(round as u64);
            for i in sample(&mut rng, n, n_sample) {
                position[i] = Some(0);
            }
        }
        let tree = builder.grow(&grad, &hess, &mut position);
        for (i, row) in x.iter().enumerate() {
            margins[i] += config.learning_rate * tree.predict(row);
        }
        train_loss.push(log_loss(&margins, y));
        trees.push(tree);
    }

    Ok(TreeEnsemble {
        config: *config,
        n_features: width,
        base_score,
        trees,
        train_loss,
    })
}
