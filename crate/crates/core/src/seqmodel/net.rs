//! Forward pass, cross-entropy in bits, and truncated backpropagation.
//!
//! Token matrices are `batch × steps`, row-major. Internally activations are
//! stored time-major (`steps × batch × width`) so each time step is one
//! contiguous block.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::LN_2;

use super::linalg::{add_column_sums, gemm, MatRef};
use super::{apply_gates, LstmModel, ModelConfig, ModelError};

/// Target id that contributes neither loss nor gradient (padding).
pub const IGNORE: u32 = u32::MAX;

/// Hidden and cell state of every layer for `batch` streams.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub batch: usize,
    /// Per layer, `batch × hidden`.
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl LstmState {
    pub fn zeros(cfg: &ModelConfig, batch: usize) -> Self {
        let layer = vec![0.0; batch * cfg.hidden_dim];
        LstmState { batch, h: vec![layer.clone(); cfg.layers], c: vec![layer; cfg.layers] }
    }
}

/// Unnormalized next-token scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits {
    pub batch: usize,
    pub steps: usize,
    pub vocab: usize,
    data: Vec<f64>,
}

impl Logits {
    /// Scores for stream `b` at step `t`.
    pub fn row(&self, b: usize, t: usize) -> &[f64] {
        let at = (t * self.batch + b) * self.vocab;
        &self.data[at..at + self.vocab]
    }

    pub fn softmax(&self, b: usize, t: usize) -> Vec<f64> {
        let row = self.row(b, t);
        let (max, lse) = log_sum_exp(row);
        row.iter().map(|&x| libm::exp(x - max - lse)).collect()
    }
}

/// `(max, ln Σ exp(x - max))`
fn log_sum_exp(row: &[f64]) -> (f64, f64) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = row.iter().map(|&x| libm::exp(x - max)).sum();
    (max, libm::log(sum))
}

/// Gradient buffer laid out like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub data: Vec<f64>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|g| g * g).sum())
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|g| *g *= k);
    }
}

struct LayerCache {
    /// `T·B × in`
    input: Vec<f64>,
    /// Hidden state entering each step, `T·B × H`.
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates, `T·B × 4H`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    /// `T·B × H`
    h_out: Vec<f64>,
}

pub(crate) struct Pass {
    layers: Vec<LayerCache>,
    pub(crate) logits: Logits,
    pub(crate) state: LstmState,
}

fn check_inputs(model: &LstmModel, ids: &[u32], batch: usize, state: &LstmState) -> Result<usize, ModelError> {
    let cfg = model.config();
    if batch == 0 || !ids.len().is_multiple_of(batch) {
        return Err(ModelError::Shape { what: "token matrix", expected: batch.max(1), got: ids.len() });
    }
    if state.batch != batch || state.h.len() != cfg.layers || state.c.len() != cfg.layers {
        return Err(ModelError::Shape { what: "state batch", expected: batch, got: state.batch });
    }
    for layer in state.h.iter().chain(&state.c) {
        if layer.len() != batch * cfg.hidden_dim {
            return Err(ModelError::Shape { what: "state", expected: batch * cfg.hidden_dim, got: layer.len() });
        }
    }
    if let Some(&id) = ids.iter().find(|&&id| id as usize >= cfg.vocab_size) {
        return Err(ModelError::TokenOutOfRange { id, vocab: cfg.vocab_size });
    }
    Ok(ids.len() / batch)
}

pub(crate) fn run(model: &LstmModel, ids: &[u32], batch: usize, state: &LstmState) -> Result<Pass, ModelError> {
    let steps = check_inputs(model, ids, batch, state)?;
    let cfg = model.config();
    let (v, e, h) = (cfg.vocab_size, cfg.embed_dim, cfg.hidden_dim);
    let rows = steps * batch;

    let emb = model.embedding();
    let mut input = vec![0.0; rows * e];
    for t in 0..steps {
        for b in 0..batch {
            let id = ids[b * steps + t] as usize;
            input[(t * batch + b) * e..][..e].copy_from_slice(&emb[id * e..(id + 1) * e]);
        }
    }

    let mut layers = Vec::with_capacity(cfg.layers);
    let mut next_state = LstmState { batch, h: Vec::new(), c: Vec::new() };
    for l in 0..cfg.layers {
        let p = model.layer(l);
        let in_dim = p.input_dim;
        let mut gates: Vec<f64> = p.b.iter().copied().cycle().take(rows * 4 * h).collect();
        gemm(1.0, MatRef::new(&input, rows, in_dim), MatRef::new(p.wx, in_dim, 4 * h), 1.0, &mut gates);
        let mut h_prev = vec![0.0; rows * h];
        let mut c_prev = vec![0.0; rows * h];
        let mut tanh_c = vec![0.0; rows * h];
        let mut h_out = vec![0.0; rows * h];
        let mut hs = state.h[l].clone();
        let mut cs = state.c[l].clone();
        let block = batch * h;
        for t in 0..steps {
            let z = &mut gates[t * batch * 4 * h..(t + 1) * batch * 4 * h];
            gemm(1.0, MatRef::new(&hs, batch, h), MatRef::new(p.wh, h, 4 * h), 1.0, z);
            h_prev[t * block..(t + 1) * block].copy_from_slice(&hs);
            c_prev[t * block..(t + 1) * block].copy_from_slice(&cs);
            apply_gates(
                z,
                &c_prev[t * block..(t + 1) * block],
                &mut cs,
                &mut tanh_c[t * block..(t + 1) * block],
                &mut h_out[t * block..(t + 1) * block],
                h,
            );
            hs.copy_from_slice(&h_out[t * block..(t + 1) * block]);
        }
        next_state.h.push(hs);
        next_state.c.push(cs);
        let next_input = h_out.clone();
        layers.push(LayerCache { input, h_prev, c_prev, gates, tanh_c, h_out });
        input = next_input;
    }

    let top = &layers.last().expect("at least one layer").h_out;
    let mut logits: Vec<f64> = model.out_b().iter().copied().cycle().take(rows * v).collect();
    gemm(1.0, MatRef::new(top, rows, h), MatRef::new(model.out_w(), h, v), 1.0, &mut logits);
    Ok(Pass { layers, logits: Logits { batch, steps, vocab: v, data: logits }, state: next_state })
}

/// Runs the stacked LSTM over `ids` (`batch × steps`) from `state`, returning
/// the scores at every position and the state after the last step.
pub fn forward(model: &LstmModel, ids: &[u32], batch: usize, state: &LstmState) -> Result<(Logits, LstmState), ModelError> {
    let pass = run(model, ids, batch, state)?;
    Ok((pass.logits, pass.state))
}

fn check_targets(logits: &Logits, targets: &[u32]) -> Result<(), ModelError> {
    let n = logits.batch * logits.steps;
    if targets.len() != n {
        return Err(ModelError::Shape { what: "targets", expected: n, got: targets.len() });
    }
    if let Some(&id) = targets.iter().find(|&&id| id != IGNORE && id as usize >= logits.vocab) {
        return Err(ModelError::TokenOutOfRange { id, vocab: logits.vocab });
    }
    Ok(())
}

/// Bits of each target under the softmax of its scores; `None` for ignored
/// positions. Indexed like `targets`.
pub(crate) fn target_bits(logits: &Logits, targets: &[u32]) -> Vec<Option<f64>> {
    let steps = logits.steps;
    targets
        .iter()
        .enumerate()
        .map(|(k, &tgt)| {
            (tgt != IGNORE).then(|| {
                let row = logits.row(k / steps, k % steps);
                let (max, lse) = log_sum_exp(row);
                -(row[tgt as usize] - max - lse) / LN_2
            })
        })
        .collect()
}

/// `Σ −log₂ softmax(logits)[target]` over non-ignored positions, with the
/// number of positions counted.
pub fn loss_bits(logits: &Logits, targets: &[u32]) -> Result<(f64, usize), ModelError> {
    check_targets(logits, targets)?;
    let bits = target_bits(logits, targets);
    let n = bits.iter().flatten().count();
    Ok((bits.iter().flatten().sum(), n))
}

/// Exact gradient of [`loss_bits`] over one window. No gradient flows into
/// `state`. Also returns the loss and the state after the window.
pub fn backward(
    model: &LstmModel,
    ids: &[u32],
    targets: &[u32],
    batch: usize,
    state: &LstmState,
) -> Result<(Gradients, f64, usize, LstmState), ModelError> {
    let pass = run(model, ids, batch, state)?;
    check_targets(&pass.logits, targets)?;
    let cfg = model.config();
    let layout = model.layout();
    let (v, e, h) = (cfg.vocab_size, cfg.embed_dim, cfg.hidden_dim);
    let steps = pass.logits.steps;
    let rows = steps * batch;

    let mut bits = 0.0;
    let mut count = 0;
    let mut dlogits = vec![0.0; rows * v];
    for t in 0..steps {
        for b in 0..batch {
            let tgt = targets[b * steps + t];
            if tgt == IGNORE {
                continue;
            }
            let row = pass.logits.row(b, t);
            let (max, lse) = log_sum_exp(row);
            bits += -(row[tgt as usize] - max - lse) / LN_2;
            count += 1;
            let d = &mut dlogits[(t * batch + b) * v..][..v];
            for (dk, &x) in d.iter_mut().zip(row) {
                *dk = libm::exp(x - max - lse) / LN_2;
            }
            d[tgt as usize] -= 1.0 / LN_2;
        }
    }

    let mut g = vec![0.0; layout.total];
    let top = &pass.layers.last().expect("at least one layer").h_out;
    gemm(1.0, MatRef::new(top, rows, h).t(), MatRef::new(&dlogits, rows, v), 0.0, &mut g[layout.out_w.clone()]);
    add_column_sums(&mut g[layout.out_b.clone()], &dlogits, v);
    let mut d_out = vec![0.0; rows * h];
    gemm(1.0, MatRef::new(&dlogits, rows, v), MatRef::new(model.out_w(), h, v).t(), 0.0, &mut d_out);

    let block = batch * h;
    for l in (0..cfg.layers).rev() {
        let cache = &pass.layers[l];
        let p = model.layer(l);
        let in_dim = p.input_dim;
        let ranges = &layout.layers[l];
        let mut dz = vec![0.0; rows * 4 * h];
        let mut dh_next = vec![0.0; block];
        let mut dc_next = vec![0.0; block];
        for t in (0..steps).rev() {
            for b in 0..batch {
                let r = t * batch + b;
                let gate = &cache.gates[r * 4 * h..(r + 1) * 4 * h];
                let dzr = &mut dz[r * 4 * h..(r + 1) * 4 * h];
                for k in 0..h {
                    let (i, f, gg, o) = (gate[k], gate[h + k], gate[2 * h + k], gate[3 * h + k]);
                    let tc = cache.tanh_c[r * h + k];
                    let dh = d_out[r * h + k] + dh_next[b * h + k];
                    let dc = dh * o * (1.0 - tc * tc) + dc_next[b * h + k];
                    dzr[k] = dc * gg * i * (1.0 - i);
                    dzr[h + k] = dc * cache.c_prev[r * h + k] * f * (1.0 - f);
                    dzr[2 * h + k] = dc * i * (1.0 - gg * gg);
                    dzr[3 * h + k] = dh * tc * o * (1.0 - o);
                    dc_next[b * h + k] = dc * f;
                }
            }
            if t > 0 {
                let dzt = &dz[t * batch * 4 * h..(t + 1) * batch * 4 * h];
                gemm(1.0, MatRef::new(dzt, batch, 4 * h), MatRef::new(p.wh, h, 4 * h).t(), 0.0, &mut dh_next);
            }
        }
        gemm(1.0, MatRef::new(&cache.input, rows, in_dim).t(), MatRef::new(&dz, rows, 4 * h), 0.0, &mut g[ranges.wx.clone()]);
        gemm(1.0, MatRef::new(&cache.h_prev, rows, h).t(), MatRef::new(&dz, rows, 4 * h), 0.0, &mut g[ranges.wh.clone()]);
        add_column_sums(&mut g[ranges.b.clone()], &dz, 4 * h);
        let mut d_in = vec![0.0; rows * in_dim];
        gemm(1.0, MatRef::new(&dz, rows, 4 * h), MatRef::new(p.wx, in_dim, 4 * h).t(), 0.0, &mut d_in);
        if l > 0 {
            d_out = d_in;
        } else {
            let ge = &mut g[layout.embed.clone()];
            for t in 0..steps {
                for b in 0..batch {
                    let id = ids[b * steps + t] as usize;
                    let src = &d_in[(t * batch + b) * e..][..e];
                    for (gk, s) in ge[id * e..(id + 1) * e].iter_mut().zip(src) {
                        *gk += s;
                    }
                }
            }
        }
    }
    Ok((Gradients { data: g }, bits, count, pass.state))
}
