//! The neural plausibility scorer: a one-hidden-layer ReLU network over the
//! concatenated modifier and head representations, optionally fed by one
//! LSTM encoder per side that summarises a constituent's decade sequence.
//!
//! Everything is generic over the float type so that training can run in
//! `f32` while gradient checks use `f64`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty input sequence")]
    EmptySequence,
    #[error("training loss became non-finite in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("no training pairs")]
    NoData,
    #[error("model i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("model manifest: {0}")]
    Manifest(#[from] serde_json::Error),
}

fn cast<T: Float>(x: f64) -> T {
    T::from(x).expect("float conversion")
}

fn sigmoid<T: Float>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// log(1 + e^x) without overflow.
fn softplus<T: Float>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Float> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    /// Entries uniform in ±1/sqrt(cols).
    fn init(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (cols as f64).sqrt();
        Mat {
            rows,
            cols,
            data: (0..rows * cols)
                .map(|_| cast(rng.random_range(-bound..=bound)))
                .collect(),
        }
    }

    fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// out = M x
    fn matvec(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        for (r, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(r), x);
        }
    }

    /// out += M^T v
    fn matvec_t_acc(&self, v: &[T], out: &mut [T]) {
        for (r, &vr) in v.iter().enumerate() {
            if vr == T::zero() {
                continue;
            }
            for (o, &m) in out.iter_mut().zip(self.row(r)) {
                *o = *o + m * vr;
            }
        }
    }

    /// M += a b^T
    fn outer_acc(&mut self, a: &[T], b: &[T]) {
        let cols = self.cols;
        for (r, &ar) in a.iter().enumerate() {
            if ar == T::zero() {
                continue;
            }
            for (m, &bc) in self.data[r * cols..(r + 1) * cols].iter_mut().zip(b) {
                *m = *m + ar * bc;
            }
        }
    }
}

fn dot<T: Float>(a: &[T], b: &[T]) -> T {
    // Independent partial sums let the compiler vectorise.
    let mut acc = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] = acc[i] + x[i] * y[i];
        }
    }
    let mut total = acc.iter().fold(T::zero(), |s, &v| s + v);
    for (&x, &y) in ra.iter().zip(rb) {
        total = total + x * y;
    }
    total
}

/// Feed-forward scorer `y = W2 ReLU(W1 x + b1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams<T> {
    pub w1: Mat<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
}

pub struct NetCache<T> {
    x: Vec<T>,
    pre: Vec<T>,
    act: Vec<T>,
}

impl<T: Float> NetParams<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        NetParams {
            w1: Mat::zeros(hidden, input),
            b1: vec![T::zero(); hidden],
            w2: vec![T::zero(); hidden],
        }
    }

    fn init(input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let w1 = Mat::init(hidden, input, rng);
        let bound = 1.0 / (hidden as f64).sqrt();
        let w2 = (0..hidden).map(|_| cast(rng.random_range(-bound..=bound))).collect();
        NetParams {
            w1,
            b1: vec![T::zero(); hidden],
            w2,
        }
    }

    pub fn input_dims(&self) -> usize {
        self.w1.cols
    }

    pub fn hidden(&self) -> usize {
        self.w1.rows
    }

    pub fn forward(&self, x: &[T]) -> Result<(T, NetCache<T>), NeuralError> {
        if x.len() != self.w1.cols {
            return Err(NeuralError::Shape(format!(
                "network input has {} dims, expected {}",
                x.len(),
                self.w1.cols
            )));
        }
        let mut pre = vec![T::zero(); self.hidden()];
        self.w1.matvec(x, &mut pre);
        for (p, b) in pre.iter_mut().zip(&self.b1) {
            *p = *p + *b;
        }
        let act: Vec<T> = pre.iter().map(|&p| p.max(T::zero())).collect();
        let y = dot(&self.w2, &act);
        Ok((
            y,
            NetCache {
                x: x.to_vec(),
                pre,
                act,
            },
        ))
    }

    /// Accumulates parameter gradients into `grad`, returns dL/dx.
    fn backward(&self, cache: &NetCache<T>, dy: T, grad: &mut NetParams<T>) -> Vec<T> {
        let mut dpre = vec![T::zero(); self.hidden()];
        for j in 0..self.hidden() {
            grad.w2[j] = grad.w2[j] + dy * cache.act[j];
            if cache.pre[j] > T::zero() {
                dpre[j] = dy * self.w2[j];
            }
        }
        grad.w1.outer_acc(&dpre, &cache.x);
        for (g, d) in grad.b1.iter_mut().zip(&dpre) {
            *g = *g + *d;
        }
        let mut dx = vec![T::zero(); self.input_dims()];
        self.w1.matvec_t_acc(&dpre, &mut dx);
        dx
    }
}

/// LSTM over input vectors with a linear projection of the final hidden
/// state. Gate blocks of `w` and `b` are ordered input, forget, output,
/// candidate; `w` acts on the concatenation of input and previous hidden
/// state.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<T> {
    pub w: Mat<T>,
    pub b: Vec<T>,
    pub proj: Mat<T>,
    pub proj_b: Vec<T>,
}

pub struct LstmCache<T> {
    xh: Vec<Vec<T>>,
    gates: Vec<Vec<T>>,
    cells: Vec<Vec<T>>,
    hidden: Vec<T>,
}

impl<T: Float> LstmParams<T> {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        LstmParams {
            w: Mat::zeros(4 * hidden, input + hidden),
            b: vec![T::zero(); 4 * hidden],
            proj: Mat::zeros(output, hidden),
            proj_b: vec![T::zero(); output],
        }
    }

    fn init(input: usize, hidden: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut b = vec![T::zero(); 4 * hidden];
        for v in &mut b[hidden..2 * hidden] {
            *v = T::one();
        }
        LstmParams {
            w: Mat::init(4 * hidden, input + hidden, rng),
            b,
            proj: Mat::init(output, hidden, rng),
            proj_b: vec![T::zero(); output],
        }
    }

    pub fn input_dims(&self) -> usize {
        self.w.cols - self.hidden_dims()
    }

    pub fn hidden_dims(&self) -> usize {
        self.w.rows / 4
    }

    pub fn output_dims(&self) -> usize {
        self.proj.rows
    }

    pub fn forward(&self, seq: &[Vec<T>]) -> Result<(Vec<T>, LstmCache<T>), NeuralError> {
        if seq.is_empty() {
            return Err(NeuralError::EmptySequence);
        }
        let (n_in, d) = (self.input_dims(), self.hidden_dims());
        let mut h = vec![T::zero(); d];
        let mut c = vec![T::zero(); d];
        let mut cache = LstmCache {
            xh: Vec::with_capacity(seq.len()),
            gates: Vec::with_capacity(seq.len()),
            cells: vec![c.clone()],
            hidden: Vec::new(),
        };
        let mut z = vec![T::zero(); 4 * d];
        for x in seq {
            if x.len() != n_in {
                return Err(NeuralError::Shape(format!(
                    "sequence step has {} dims, expected {n_in}",
                    x.len()
                )));
            }
            let mut xh = Vec::with_capacity(n_in + d);
            xh.extend_from_slice(x);
            xh.extend_from_slice(&h);
            self.w.matvec(&xh, &mut z);
            let mut gates = vec![T::zero(); 4 * d];
            for j in 0..d {
                gates[j] = sigmoid(z[j] + self.b[j]);
                gates[d + j] = sigmoid(z[d + j] + self.b[d + j]);
                gates[2 * d + j] = sigmoid(z[2 * d + j] + self.b[2 * d + j]);
                gates[3 * d + j] = (z[3 * d + j] + self.b[3 * d + j]).tanh();
            }
            for j in 0..d {
                c[j] = gates[d + j] * c[j] + gates[j] * gates[3 * d + j];
                h[j] = gates[2 * d + j] * c[j].tanh();
            }
            cache.xh.push(xh);
            cache.gates.push(gates);
            cache.cells.push(c.clone());
        }
        let mut out = self.proj_b.clone();
        let mut tmp = vec![T::zero(); self.output_dims()];
        self.proj.matvec(&h, &mut tmp);
        for (o, t) in out.iter_mut().zip(&tmp) {
            *o = *o + *t;
        }
        cache.hidden = h;
        Ok((out, cache))
    }

    /// Backpropagation through time from dL/d(output).
    fn backward(&self, cache: &LstmCache<T>, dout: &[T], grad: &mut LstmParams<T>) {
        let (n_in, d) = (self.input_dims(), self.hidden_dims());
        grad.proj.outer_acc(dout, &cache.hidden);
        for (g, v) in grad.proj_b.iter_mut().zip(dout) {
            *g = *g + *v;
        }
        let mut dh = vec![T::zero(); d];
        self.proj.matvec_t_acc(dout, &mut dh);
        let mut dc = vec![T::zero(); d];
        let mut dz = vec![T::zero(); 4 * d];
        let mut dxh = vec![T::zero(); n_in + d];
        for t in (0..cache.gates.len()).rev() {
            let g = &cache.gates[t];
            let c = &cache.cells[t + 1];
            let c_prev = &cache.cells[t];
            for j in 0..d {
                let (i, f, o, cand) = (g[j], g[d + j], g[2 * d + j], g[3 * d + j]);
                let tc = c[j].tanh();
                let d_o = dh[j] * tc;
                dc[j] = dc[j] + dh[j] * o * (T::one() - tc * tc);
                let d_i = dc[j] * cand;
                let d_f = dc[j] * c_prev[j];
                let d_cand = dc[j] * i;
                dz[j] = d_i * i * (T::one() - i);
                dz[d + j] = d_f * f * (T::one() - f);
                dz[2 * d + j] = d_o * o * (T::one() - o);
                dz[3 * d + j] = d_cand * (T::one() - cand * cand);
                dc[j] = dc[j] * f;
            }
            grad.w.outer_acc(&dz, &cache.xh[t]);
            for (gb, v) in grad.b.iter_mut().zip(&dz) {
                *gb = *gb + *v;
            }
            dxh.fill(T::zero());
            self.w.matvec_t_acc(&dz, &mut dxh);
            dh.copy_from_slice(&dxh[n_in..]);
        }
    }
}

/// Scorer plus optional per-side temporal encoders.
#[derive(Debug, Clone, PartialEq)]
pub struct NnmModel<T> {
    pub net: NetParams<T>,
    /// Modifier and head encoders.
    pub encoders: Option<[LstmParams<T>; 2]>,
}

/// Shape of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    /// Dimensions of each input vector (per constituent, per step).
    pub input_dims: usize,
    /// Dimensions of each constituent representation fed to the scorer.
    pub embedding_dims: usize,
    pub hidden: usize,
    /// LSTM hidden size; `None` for static inputs.
    pub lstm_hidden: Option<usize>,
}

pub struct ForwardCache<T> {
    net: NetCache<T>,
    encoders: Option<[LstmCache<T>; 2]>,
}

impl<T: Float> NnmModel<T> {
    /// Seeded initialisation; identical seeds give identical values
    /// across float types up to rounding.
    pub fn init(arch: Architecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoders = arch.lstm_hidden.map(|d| {
            [
                LstmParams::init(arch.input_dims, d, arch.embedding_dims, &mut rng),
                LstmParams::init(arch.input_dims, d, arch.embedding_dims, &mut rng),
            ]
        });
        let net = NetParams::init(2 * arch.embedding_dims, arch.hidden, &mut rng);
        NnmModel { net, encoders }
    }

    pub fn zeros(arch: Architecture) -> Self {
        NnmModel {
            net: NetParams::zeros(2 * arch.embedding_dims, arch.hidden),
            encoders: arch.lstm_hidden.map(|d| {
                [
                    LstmParams::zeros(arch.input_dims, d, arch.embedding_dims),
                    LstmParams::zeros(arch.input_dims, d, arch.embedding_dims),
                ]
            }),
        }
    }

    pub fn architecture(&self) -> Architecture {
        match &self.encoders {
            Some([m, _]) => Architecture {
                input_dims: m.input_dims(),
                embedding_dims: m.output_dims(),
                hidden: self.net.hidden(),
                lstm_hidden: Some(m.hidden_dims()),
            },
            None => Architecture {
                input_dims: self.net.input_dims() / 2,
                embedding_dims: self.net.input_dims() / 2,
                hidden: self.net.hidden(),
                lstm_hidden: None,
            },
        }
    }

    pub fn zeros_like(&self) -> Self {
        NnmModel::zeros(self.architecture())
    }

    /// Representation of one constituent: the encoder output for a decade
    /// sequence, or the single static vector.
    pub fn encode(&self, side: usize, seq: &[Vec<T>]) -> Result<Vec<T>, NeuralError> {
        match &self.encoders {
            Some(enc) => enc[side].forward(seq).map(|(v, _)| v),
            None => match seq {
                [v] => Ok(v.clone()),
                _ => Err(NeuralError::Shape(format!(
                    "static model expects one vector per constituent, got {}",
                    seq.len()
                ))),
            },
        }
    }

    pub fn forward(&self, modifier: &[Vec<T>], head: &[Vec<T>]) -> Result<(T, ForwardCache<T>), NeuralError> {
        let (x, encoders) = match &self.encoders {
            Some(enc) => {
                let (m, mc) = enc[0].forward(modifier)?;
                let (h, hc) = enc[1].forward(head)?;
                (compose_input(&m, &h), Some([mc, hc]))
            }
            None => (compose_input(&self.encode(0, modifier)?, &self.encode(1, head)?), None),
        };
        let (y, net) = self.net.forward(&x)?;
        Ok((y, ForwardCache { net, encoders }))
    }

    pub fn score(&self, modifier: &[Vec<T>], head: &[Vec<T>]) -> Result<T, NeuralError> {
        self.forward(modifier, head).map(|(y, _)| y)
    }

    /// Accumulates dL/dparams for an upstream derivative `dy`.
    pub fn backward(&self, cache: &ForwardCache<T>, dy: T, grad: &mut NnmModel<T>) {
        let dx = self.net.backward(&cache.net, dy, &mut grad.net);
        if let (Some(enc), Some(caches), Some(genc)) = (&self.encoders, &cache.encoders, &mut grad.encoders) {
            let k = enc[0].output_dims();
            enc[0].backward(&caches[0], &dx[..k], &mut genc[0]);
            enc[1].backward(&caches[1], &dx[k..], &mut genc[1]);
        }
    }

    fn tensors(&self) -> Vec<&[T]> {
        let mut v: Vec<&[T]> = vec![&self.net.w1.data, &self.net.b1, &self.net.w2];
        if let Some(enc) = &self.encoders {
            for e in enc {
                v.extend([&e.w.data[..], &e.b[..], &e.proj.data[..], &e.proj_b[..]]);
            }
        }
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut v: Vec<&mut [T]> = vec![&mut self.net.w1.data, &mut self.net.b1, &mut self.net.w2];
        if let Some(enc) = &mut self.encoders {
            for e in enc.iter_mut() {
                v.push(&mut e.w.data);
                v.push(&mut e.b);
                v.push(&mut e.proj.data);
                v.push(&mut e.proj_b);
            }
        }
        v
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// All parameters in a fixed order.
    pub fn flat(&self) -> Vec<T> {
        self.tensors().concat()
    }

    pub fn set_flat(&mut self, values: &[T]) {
        assert_eq!(values.len(), self.n_params(), "parameter count");
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&values[offset..offset + t.len()]);
            offset += t.len();
        }
    }

    /// self += alpha * other
    pub fn axpy(&mut self, alpha: T, other: &NnmModel<T>) {
        let src = other.tensors();
        for (dst, s) in self.tensors_mut().into_iter().zip(src) {
            for (d, v) in dst.iter_mut().zip(s) {
                *d = *d + alpha * *v;
            }
        }
    }

    fn scale(&mut self, alpha: T) {
        for t in self.tensors_mut() {
            for v in t.iter_mut() {
                *v = *v * alpha;
            }
        }
    }

    fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(T::zero());
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// `[modifier, head]`.
pub fn compose_input<T: Float>(modifier: &[T], head: &[T]) -> Vec<T> {
    let mut x = Vec::with_capacity(modifier.len() + head.len());
    x.extend_from_slice(modifier);
    x.extend_from_slice(head);
    x
}

/// Plausible iff sigmoid(y) >= 0.5, i.e. y >= 0.
pub fn is_plausible<T: Float>(y: T) -> bool {
    sigmoid(y) >= cast(0.5)
}

pub fn probability<T: Float>(y: T) -> T {
    sigmoid(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    CrossEntropy,
    /// Hinge on the score gap between a positive and its paired negative.
    Margin,
}

impl std::str::FromStr for Loss {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cross-entropy" | "xent" => Ok(Loss::CrossEntropy),
            "margin" => Ok(Loss::Margin),
            _ => Err(format!("unknown loss {s:?} (cross-entropy, margin)")),
        }
    }
}

impl std::fmt::Display for Loss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Loss::CrossEntropy => "cross-entropy",
            Loss::Margin => "margin",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Examples per batch; each batch holds half as many pairs.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub loss: Loss,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 100,
            learning_rate: 0.01,
            loss: Loss::CrossEntropy,
            seed: 0,
        }
    }
}

/// One labelled example referencing constituent inputs by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Example {
    pub modifier: usize,
    pub head: usize,
    pub label: bool,
}

/// Constituent inputs (one sequence per constituent; static inputs are
/// sequences of length one) and positive/negative example pairs.
#[derive(Debug, Clone, Default)]
pub struct PairSet<T> {
    pub modifiers: Vec<Vec<Vec<T>>>,
    pub heads: Vec<Vec<Vec<T>>>,
    pub pairs: Vec<[Example; 2]>,
}

impl<T: Float> PairSet<T> {
    pub fn examples(&self) -> impl Iterator<Item = &Example> {
        self.pairs.iter().flatten()
    }

    fn inputs(&self, e: &Example) -> (&[Vec<T>], &[Vec<T>]) {
        (&self.modifiers[e.modifier], &self.heads[e.head])
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
}

fn example_loss<T: Float>(y: T, label: bool) -> (T, T) {
    if label {
        (softplus(-y), sigmoid(y) - T::one())
    } else {
        (softplus(y), sigmoid(y))
    }
}

/// Loss of one pair and its derivatives with respect to both scores.
fn pair_loss<T: Float>(loss: Loss, y_pos: T, y_neg: T) -> (T, T, T) {
    match loss {
        Loss::CrossEntropy => {
            let (lp, dp) = example_loss(y_pos, true);
            let (ln, dn) = example_loss(y_neg, false);
            (lp + ln, dp, dn)
        }
        Loss::Margin => {
            let gap = T::one() - y_pos + y_neg;
            if gap > T::zero() {
                (gap, -T::one(), T::one())
            } else {
                (T::zero(), T::zero(), T::zero())
            }
        }
    }
}

/// Mean loss per example (cross-entropy) or per pair (margin).
pub fn evaluate_loss<T: Float>(model: &NnmModel<T>, data: &PairSet<T>, loss: Loss) -> Result<f64, NeuralError> {
    if data.pairs.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for [p, n] in &data.pairs {
        let (pm, ph) = data.inputs(p);
        let (nm, nh) = data.inputs(n);
        let (l, _, _) = pair_loss(loss, model.score(pm, ph)?, model.score(nm, nh)?);
        total += l.to_f64().unwrap_or(f64::NAN);
    }
    let per = if loss == Loss::CrossEntropy { 2.0 } else { 1.0 };
    Ok(total / (per * data.pairs.len() as f64))
}

/// Encoded constituents of one side of a batch.
struct BatchSide<T> {
    slot: HashMap<usize, usize>,
    outputs: Vec<Vec<T>>,
    caches: Vec<Option<LstmCache<T>>>,
    grads: Vec<Vec<T>>,
}

impl<T> Default for BatchSide<T> {
    fn default() -> Self {
        BatchSide {
            slot: HashMap::new(),
            outputs: Vec::new(),
            caches: Vec::new(),
            grads: Vec::new(),
        }
    }
}

impl<T: Float> BatchSide<T> {
    fn add(&mut self, model: &NnmModel<T>, side: usize, idx: usize, inputs: &[Vec<Vec<T>>]) -> Result<(), NeuralError> {
        if self.slot.contains_key(&idx) {
            return Ok(());
        }
        let (out, cache) = match &model.encoders {
            Some(enc) => {
                let (v, c) = enc[side].forward(&inputs[idx])?;
                (v, Some(c))
            }
            None => (model.encode(side, &inputs[idx])?, None),
        };
        self.slot.insert(idx, self.outputs.len());
        self.grads.push(vec![T::zero(); out.len()]);
        self.outputs.push(out);
        self.caches.push(cache);
        Ok(())
    }

    fn output(&self, idx: usize) -> &[T] {
        &self.outputs[self.slot[&idx]]
    }

    fn accumulate(&mut self, idx: usize, d: &[T]) {
        for (g, v) in self.grads[self.slot[&idx]].iter_mut().zip(d) {
            *g = *g + *v;
        }
    }

    fn backward(&self, encoder: &LstmParams<T>, grad: &mut LstmParams<T>) {
        for (cache, d) in self.caches.iter().zip(&self.grads) {
            if let Some(cache) = cache {
                encoder.backward(cache, d, grad);
            }
        }
    }
}

/// Mini-batch SGD over shuffled pairs. Gradients are averaged over the
/// examples of a batch and applied once per batch.
pub fn train<T: Float>(
    mut model: NnmModel<T>,
    train: &PairSet<T>,
    validation: Option<&PairSet<T>>,
    config: &TrainConfig,
) -> Result<(NnmModel<T>, TrainHistory), NeuralError> {
    if train.pairs.is_empty() {
        return Err(NeuralError::NoData);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.pairs.len()).collect();
    let pairs_per_batch = (config.batch_size / 2).max(1);
    let lr: T = cast(config.learning_rate);
    let mut grad = model.zeros_like();
    let mut history = TrainHistory::default();
    let per = if config.loss == Loss::CrossEntropy { 2.0 } else { 1.0 };

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(pairs_per_batch) {
            grad.fill_zero();
            // Each distinct constituent of the batch is encoded once and
            // receives the summed gradient of every example using it.
            let mut mods = BatchSide::default();
            let mut heads = BatchSide::default();
            for &i in batch {
                for e in &train.pairs[i] {
                    mods.add(&model, 0, e.modifier, &train.modifiers)?;
                    heads.add(&model, 1, e.head, &train.heads)?;
                }
            }
            for &i in batch {
                let [p, n] = &train.pairs[i];
                let xp = compose_input(mods.output(p.modifier), heads.output(p.head));
                let xn = compose_input(mods.output(n.modifier), heads.output(n.head));
                let (yp, cp) = model.net.forward(&xp)?;
                let (yn, cn) = model.net.forward(&xn)?;
                let (l, dp, dn) = pair_loss(config.loss, yp, yn);
                epoch_loss += l.to_f64().unwrap_or(f64::NAN);
                for (e, cache, dy) in [(p, &cp, dp), (n, &cn, dn)] {
                    let dx = model.net.backward(cache, dy, &mut grad.net);
                    let k = dx.len() / 2;
                    mods.accumulate(e.modifier, &dx[..k]);
                    heads.accumulate(e.head, &dx[k..]);
                }
            }
            if let (Some(enc), Some(genc)) = (&model.encoders, &mut grad.encoders) {
                mods.backward(&enc[0], &mut genc[0]);
                heads.backward(&enc[1], &mut genc[1]);
            }
            grad.scale(T::one() / cast((batch.len() as f64) * per));
            model.axpy(-lr, &grad);
        }
        let mean = epoch_loss / (per * train.pairs.len() as f64);
        if !mean.is_finite() || !model.is_finite() {
            return Err(NeuralError::Diverged { epoch });
        }
        history.train_loss.push(mean);
        if let Some(v) = validation {
            history.validation_loss.push(evaluate_loss(&model, v, config.loss)?);
        }
    }
    Ok((model, history))
}

/// Fraction of examples whose predicted label matches.
pub fn accuracy<T: Float>(model: &NnmModel<T>, data: &PairSet<T>) -> Result<f64, NeuralError> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for e in data.examples() {
        let (m, h) = data.inputs(e);
        if is_plausible(model.score(m, h)?) == e.label {
            correct += 1;
        }
        total += 1;
    }
    Ok(if total == 0 { 0.0 } else { correct as f64 / total as f64 })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    file: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelManifest {
    architecture: Architecture,
    tensors: Vec<TensorEntry>,
    #[serde(default)]
    metadata: serde_json::Value,
}

impl NnmModel<f32> {
    fn named_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut v = vec![
            ("w1".to_string(), vec![self.net.w1.rows, self.net.w1.cols]),
            ("b1".to_string(), vec![self.net.b1.len()]),
            ("w2".to_string(), vec![1, self.net.w2.len()]),
        ];
        if let Some(enc) = &self.encoders {
            for (side, e) in ["modifier", "head"].iter().zip(enc) {
                v.push((format!("lstm_{side}_w"), vec![e.w.rows, e.w.cols]));
                v.push((format!("lstm_{side}_b"), vec![e.b.len()]));
                v.push((format!("lstm_{side}_proj"), vec![e.proj.rows, e.proj.cols]));
                v.push((format!("lstm_{side}_proj_b"), vec![e.proj_b.len()]));
            }
        }
        v
    }

    /// Writes `model.json` and one little-endian f32 file per tensor.
    pub fn save(&self, dir: &Path, metadata: serde_json::Value) -> Result<(), NeuralError> {
        fs::create_dir_all(dir)?;
        let mut entries = Vec::new();
        for ((name, shape), data) in self.named_shapes().into_iter().zip(self.tensors()) {
            let file = format!("{name}.f32");
            let bytes: Vec<u8> = data.iter().flat_map(|x| x.to_le_bytes()).collect();
            fs::write(dir.join(&file), bytes)?;
            entries.push(TensorEntry { name, file, shape });
        }
        let manifest = ModelManifest {
            architecture: self.architecture(),
            tensors: entries,
            metadata,
        };
        fs::write(dir.join("model.json"), serde_json::to_vec_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, NeuralError> {
        let manifest: ModelManifest = serde_json::from_slice(&fs::read(dir.join("model.json"))?)?;
        let mut model = NnmModel::zeros(manifest.architecture);
        let expected = model.named_shapes();
        if expected.len() != manifest.tensors.len() {
            return Err(NeuralError::Shape("tensor count differs from architecture".into()));
        }
        let mut values = Vec::with_capacity(model.n_params());
        for ((name, shape), entry) in expected.iter().zip(&manifest.tensors) {
            if *name != entry.name || *shape != entry.shape {
                return Err(NeuralError::Shape(format!("unexpected tensor {}", entry.name)));
            }
            let bytes = fs::read(dir.join(&entry.file))?;
            let n: usize = shape.iter().product();
            if bytes.len() != n * 4 {
                return Err(NeuralError::Shape(format!("{} holds {} bytes", entry.file, bytes.len())));
            }
            values.extend(
                bytes
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            );
        }
        model.set_flat(&values);
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn static_arch(k: usize, hidden: usize) -> Architecture {
        Architecture {
            input_dims: k,
            embedding_dims: k,
            hidden,
            lstm_hidden: None,
        }
    }

    #[test]
    fn composition_order() {
        assert_eq!(compose_input(&[1.0, 2.0], &[3.0, 4.0]), vec![1.0, 2.0, 3.0, 4.0]);
        assert_ne!(compose_input(&[1.0, 2.0], &[3.0, 4.0]), compose_input(&[3.0, 4.0], &[1.0, 2.0]));
        assert_eq!(compose_input(&[0.0; 300], &[0.0; 300]).len(), 600);
    }

    #[test]
    fn hand_evaluated_forward() {
        let net = NetParams {
            w1: Mat {
                rows: 2,
                cols: 2,
                data: vec![1.0, 0.0, 0.0, 1.0],
            },
            b1: vec![0.0, 0.0],
            w2: vec![2.0, 3.0],
        };
        let (y, cache) = net.forward(&[1.0, -1.0]).unwrap();
        assert_eq!(cache.act, vec![1.0, 0.0]);
        assert_eq!(y, 2.0);
        assert!(matches!(net.forward(&[1.0]), Err(NeuralError::Shape(_))));
    }

    #[test]
    fn zero_parameters_give_zero() {
        let m = NnmModel::<f64>::zeros(static_arch(3, 5));
        assert_eq!(m.score(&[vec![1.0, -2.0, 3.0]], &[vec![0.5, 0.5, 0.5]]).unwrap(), 0.0);
        let lstm = LstmParams::<f64>::zeros(3, 4, 2);
        let (out, _) = lstm.forward(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.0, 4.0]]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn negative_bias_zero_input() {
        let mut m = NnmModel::<f64>::init(static_arch(2, 4), 1);
        m.net.b1 = vec![-0.5, 0.0, -1.0, -0.1];
        assert_eq!(m.score(&[vec![0.0, 0.0]], &[vec![0.0, 0.0]]).unwrap(), 0.0);
    }

    #[test]
    fn single_step_is_one_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = LstmParams::<f64>::init(2, 3, 3, &mut rng);
        let x = vec![0.3, -0.7];
        let (out, _) = p.forward(std::slice::from_ref(&x)).unwrap();
        let d = 3;
        let xh = [x.clone(), vec![0.0; d]].concat();
        let mut h = vec![0.0; d];
        for j in 0..d {
            let z = |g: usize| dot(p.w.row(g * d + j), &xh) + p.b[g * d + j];
            let (i, o, g) = (sigmoid(z(0)), sigmoid(z(2)), z(3).tanh());
            h[j] = o * (i * g).tanh();
        }
        for r in 0..3 {
            let expect = dot(p.proj.row(r), &h) + p.proj_b[r];
            assert!((out[r] - expect).abs() < 1e-14);
        }
        assert!(matches!(p.forward(&[]), Err(NeuralError::EmptySequence)));
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let m = NnmModel::<f32>::init(
            Architecture {
                input_dims: 4,
                embedding_dims: 4,
                hidden: 8,
                lstm_hidden: Some(5),
            },
            3,
        );
        let enc = m.encoders.as_ref().unwrap();
        for e in enc {
            assert!(e.b[5..10].iter().all(|b| *b == 1.0));
            assert!(e.b[..5].iter().chain(&e.b[10..]).all(|b| *b == 0.0));
        }
    }

    #[test]
    fn boundary_is_plausible() {
        assert!(is_plausible(0.0f64));
        assert!(is_plausible(40.0f32));
        assert!(!is_plausible(-1e-6f64));
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let m = NnmModel::<f32>::init(
            Architecture {
                input_dims: 3,
                embedding_dims: 2,
                hidden: 4,
                lstm_hidden: Some(3),
            },
            9,
        );
        m.save(dir.path(), serde_json::json!({"seed": 9})).unwrap();
        assert_eq!(NnmModel::<f32>::load(dir.path()).unwrap(), m);
        let s = NnmModel::<f32>::init(static_arch(3, 4), 2);
        s.save(dir.path(), serde_json::Value::Null).unwrap();
        assert_eq!(NnmModel::<f32>::load(dir.path()).unwrap(), s);
    }
}
