//! Stateful mini-batch SGD over a token stream, and per-play perplexity.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::LN_2;

use super::net::{backward, run, target_bits, LstmState, IGNORE};
use super::{LstmModel, ModelError};
use crate::corpus::{TokenSeq, Vocab};

/// Callbacks while training. Every method defaults to doing nothing.
pub trait TrainObserver {
    fn on_batch(&mut self, _epoch: usize, _batch: usize, _perplexity: f64) {}
    fn on_epoch(&mut self, _log: &EpochLog) {}
}

impl TrainObserver for () {}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub learning_rate: f64,
    /// Perplexity of each mini-batch window, measured before its update.
    pub batch_perplexities: Vec<f64>,
    pub bits: f64,
    pub tokens: usize,
}

impl EpochLog {
    /// Perplexity over every window of the epoch.
    pub fn perplexity(&self) -> f64 {
        libm::exp2(self.bits / self.tokens as f64)
    }
}

/// One pass over `stream`.
///
/// The stream is cut into `batch` contiguous rows, which are walked in
/// windows of `unroll` steps with the LSTM state carried from window to
/// window. Each window's gradient is taken in nats per row, clipped to
/// global norm `max_grad_norm`, and applied with the epoch's learning rate.
pub fn sgd_epoch(
    model: &mut LstmModel,
    stream: &[u32],
    epoch: usize,
    observer: &mut dyn TrainObserver,
) -> Result<EpochLog, ModelError> {
    let cfg = model.config().clone();
    let batch = cfg.batch;
    let row_len = stream.len() / batch;
    if row_len < 2 {
        return Err(ModelError::EmptyCorpus);
    }
    if let Some(&id) = stream.iter().find(|&&id| id as usize >= cfg.vocab_size) {
        return Err(ModelError::TokenOutOfRange { id, vocab: cfg.vocab_size });
    }
    let lr = cfg.lr.rate(epoch);
    let mut state = LstmState::zeros(&cfg, batch);
    let mut log = EpochLog { epoch, learning_rate: lr, batch_perplexities: Vec::new(), bits: 0.0, tokens: 0 };

    let mut start = 0;
    while start + 1 < row_len {
        let steps = cfg.unroll.min(row_len - 1 - start);
        let mut ids = Vec::with_capacity(batch * steps);
        let mut targets = Vec::with_capacity(batch * steps);
        for b in 0..batch {
            let row = &stream[b * row_len..(b + 1) * row_len];
            ids.extend_from_slice(&row[start..start + steps]);
            targets.extend_from_slice(&row[start + 1..start + 1 + steps]);
        }
        let (mut grads, bits, n, next) = backward(model, &ids, &targets, batch, &state)?;
        let index = log.batch_perplexities.len();
        if !bits.is_finite() {
            return Err(ModelError::NonFinite { epoch, batch: index });
        }
        grads.scale(LN_2 / batch as f64);
        let norm = grads.norm();
        if norm > cfg.max_grad_norm {
            grads.scale(cfg.max_grad_norm / norm);
        }
        for (p, g) in model.params_mut().iter_mut().zip(&grads.data) {
            *p -= lr * g;
        }
        if !model.all_finite() {
            return Err(ModelError::NonFinite { epoch, batch: index });
        }
        let ppl = libm::exp2(bits / n as f64);
        observer.on_batch(epoch, index, ppl);
        log.batch_perplexities.push(ppl);
        log.bits += bits;
        log.tokens += n;
        state = next;
        start += steps;
    }
    observer.on_epoch(&log);
    Ok(log)
}

/// Runs every configured epoch.
pub fn train(model: &mut LstmModel, stream: &[u32], observer: &mut dyn TrainObserver) -> Result<Vec<EpochLog>, ModelError> {
    (1..=model.config().epochs).map(|e| sgd_epoch(model, stream, e, observer)).collect()
}

/// Per-token perplexity of a corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub tokens: usize,
    pub total_bits: f64,
}

impl Evaluation {
    /// Sums per-play bits in ascending order, so the total does not depend on
    /// the order of the plays.
    pub fn from_play_bits(bits: &[f64], tokens: usize) -> Self {
        let mut sorted = bits.to_vec();
        sorted.sort_by(f64::total_cmp);
        Evaluation { tokens, total_bits: sorted.iter().sum() }
    }

    /// Mean bits per token.
    pub fn cross_entropy(&self) -> f64 {
        self.total_bits / self.tokens as f64
    }

    /// `2^(total_bits / tokens)`
    pub fn perplexity(&self) -> f64 {
        libm::exp2(self.cross_entropy())
    }
}

/// Bits needed for each play, end marker included, with the state reset
/// before every play and the end marker as the first input.
///
/// Plays are batched by length to keep padding low; rows never interact, so
/// the result for a play does not depend on its batch mates.
pub fn play_bits(model: &LstmModel, plays: &[TokenSeq]) -> Result<Vec<f64>, ModelError> {
    let cfg = model.config();
    let mut order: Vec<usize> = (0..plays.len()).collect();
    order.sort_by_key(|&i| plays[i].ids().len());
    let mut out = vec![0.0; plays.len()];
    for chunk in order.chunks(cfg.batch) {
        let batch = chunk.len();
        let steps = chunk.iter().map(|&i| plays[i].ids().len()).max().unwrap_or(0);
        let mut ids = vec![Vocab::EOP; batch * steps];
        let mut targets = vec![IGNORE; batch * steps];
        for (b, &i) in chunk.iter().enumerate() {
            let seq = plays[i].ids();
            ids[b * steps + 1..b * steps + seq.len()].copy_from_slice(&seq[..seq.len() - 1]);
            targets[b * steps..b * steps + seq.len()].copy_from_slice(seq);
        }
        if let Some(&id) = targets.iter().find(|&&id| id != IGNORE && id as usize >= cfg.vocab_size) {
            return Err(ModelError::TokenOutOfRange { id, vocab: cfg.vocab_size });
        }
        let pass = run(model, &ids, batch, &LstmState::zeros(cfg, batch))?;
        let bits = target_bits(&pass.logits, &targets);
        for (row, &i) in bits.chunks(steps).zip(chunk) {
            out[i] = row.iter().flatten().sum();
        }
    }
    Ok(out)
}

pub fn perplexity(model: &LstmModel, plays: &[TokenSeq]) -> Result<Evaluation, ModelError> {
    let tokens: usize = plays.iter().map(|p| p.ids().len()).sum();
    if tokens == 0 {
        return Err(ModelError::EmptyCorpus);
    }
    Ok(Evaluation::from_play_bits(&play_bits(model, plays)?, tokens))
}
