//! A stacked LSTM language model over move tokens.
//!
//! Parameters live in one flat `f64` buffer; [`Layout`] names the tensors in
//! it. The flat order is also the serialization order:
//!
//! 1. embedding, `vocab × embed`
//! 2. per layer: input weights `in × 4H`, recurrent weights `H × 4H`, bias `4H`
//! 3. output weights `H × vocab`, output bias `vocab`
//!
//! Gate blocks within a `4H` row are ordered input, forget, candidate, output.

mod linalg;
mod net;
mod train;

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;
use thiserror::Error;

use crate::rng;

pub use net::{backward, forward, loss_bits, Gradients, Logits, LstmState, IGNORE};
pub use train::{perplexity, play_bits, sgd_epoch, train, EpochLog, Evaluation, TrainObserver};

/// Learning rate `initial` for the first `flat_epochs` epochs, then
/// multiplied by `decay` once per further epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub initial: f64,
    pub flat_epochs: usize,
    pub decay: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule { initial: 1.0, flat_epochs: 4, decay: 0.5 }
    }
}

impl LrSchedule {
    /// Rate for the 1-based `epoch`.
    pub fn rate(&self, epoch: usize) -> f64 {
        let decays = epoch.saturating_sub(self.flat_epochs) as i32;
        self.initial * libm::pow(self.decay, decays as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    /// Truncated-BPTT window length.
    pub unroll: usize,
    /// Parallel token streams per mini-batch.
    pub batch: usize,
    pub epochs: usize,
    pub lr: LrSchedule,
    pub max_grad_norm: f64,
    pub init_scale: f64,
    pub seed: u64,
}

impl ModelConfig {
    /// Two layers of 200 units, windows of 20, batches of 20, 13 epochs.
    pub fn new(vocab_size: usize) -> Self {
        ModelConfig {
            vocab_size,
            embed_dim: 200,
            hidden_dim: 200,
            layers: 2,
            unroll: 20,
            batch: 20,
            epochs: 13,
            lr: LrSchedule::default(),
            max_grad_norm: 5.0,
            init_scale: 0.1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("layers", self.layers),
            ("unroll", self.unroll),
            ("batch", self.batch),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::ZeroDimension(name));
        }
        // negated so that NaN is rejected
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.max_grad_norm > 0.0) || !(self.init_scale >= 0.0) {
            return Err(ModelError::BadHyperparameter);
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        Layout::new(self).total
    }

    pub fn layer_input_dim(&self, layer: usize) -> usize {
        if layer == 0 {
            self.embed_dim
        } else {
            self.hidden_dim
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{0} must be positive")]
    ZeroDimension(&'static str),
    #[error("gradient clip norm must be positive and init scale non-negative")]
    BadHyperparameter,
    #[error("shape mismatch: {what} has length {got}, expected {expected}")]
    Shape { what: &'static str, expected: usize, got: usize },
    #[error("token id {id} is outside the vocabulary of {vocab}")]
    TokenOutOfRange { id: u32, vocab: usize },
    #[error("corpus has no tokens to train or evaluate on")]
    EmptyCorpus,
    #[error("non-finite loss or parameter in epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct LayerRanges {
    pub wx: Range<usize>,
    pub wh: Range<usize>,
    pub b: Range<usize>,
}

/// Offsets of each tensor in the flat parameter buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub(crate) embed: Range<usize>,
    pub(crate) layers: Vec<LayerRanges>,
    pub(crate) out_w: Range<usize>,
    pub(crate) out_b: Range<usize>,
    pub(crate) total: usize,
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let h = cfg.hidden_dim;
        let embed = take(cfg.vocab_size * cfg.embed_dim);
        let layers = (0..cfg.layers)
            .map(|l| LayerRanges {
                wx: take(cfg.layer_input_dim(l) * 4 * h),
                wh: take(h * 4 * h),
                b: take(4 * h),
            })
            .collect();
        let out_w = take(h * cfg.vocab_size);
        let out_b = take(cfg.vocab_size);
        Layout { embed, layers, out_w, out_b, total: at }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// `(name, range)` for every tensor, in buffer order.
    pub fn tensors(&self) -> Vec<(alloc::string::String, Range<usize>)> {
        use alloc::format;
        let mut out = vec![("embedding".into(), self.embed.clone())];
        for (l, r) in self.layers.iter().enumerate() {
            out.push((format!("layer{l}.input_weights"), r.wx.clone()));
            out.push((format!("layer{l}.recurrent_weights"), r.wh.clone()));
            out.push((format!("layer{l}.bias"), r.b.clone()));
        }
        out.push(("output_weights".into(), self.out_w.clone()));
        out.push(("output_bias".into(), self.out_b.clone()));
        out
    }
}

/// Borrowed weights of one LSTM layer.
#[derive(Debug, Clone, Copy)]
pub struct LayerParams<'a> {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `input_dim × 4H`, row-major.
    pub wx: &'a [f64],
    /// `H × 4H`, row-major.
    pub wh: &'a [f64],
    /// `4H`
    pub b: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    config: ModelConfig,
    layout: Layout,
    params: Vec<f64>,
}

impl LstmModel {
    /// Assembles a model from a configuration and a flat parameter buffer.
    pub fn from_parts(config: ModelConfig, params: Vec<f64>) -> Result<Self, ModelError> {
        config.validate()?;
        let layout = Layout::new(&config);
        if params.len() != layout.total {
            return Err(ModelError::Shape { what: "parameters", expected: layout.total, got: params.len() });
        }
        Ok(LstmModel { config, layout, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn layer(&self, l: usize) -> LayerParams<'_> {
        let r = &self.layout.layers[l];
        LayerParams {
            input_dim: self.config.layer_input_dim(l),
            hidden_dim: self.config.hidden_dim,
            wx: &self.params[r.wx.clone()],
            wh: &self.params[r.wh.clone()],
            b: &self.params[r.b.clone()],
        }
    }

    pub(crate) fn embedding(&self) -> &[f64] {
        &self.params[self.layout.embed.clone()]
    }

    pub(crate) fn out_w(&self) -> &[f64] {
        &self.params[self.layout.out_w.clone()]
    }

    pub(crate) fn out_b(&self) -> &[f64] {
        &self.params[self.layout.out_b.clone()]
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|x| x.is_finite())
    }
}

/// Uniform `[-init_scale, init_scale]` weights from the `model-init` stream,
/// forget-gate biases 1, every other bias 0.
pub fn init_model(config: &ModelConfig) -> Result<LstmModel, ModelError> {
    config.validate()?;
    let layout = Layout::new(config);
    let mut r = rng::stream(config.seed, rng::MODEL_INIT, 0);
    let scale = config.init_scale;
    let mut params: Vec<f64> = (0..layout.total).map(|_| (r.gen::<f64>() * 2.0 - 1.0) * scale).collect();
    let h = config.hidden_dim;
    for lr in &layout.layers {
        let b = &mut params[lr.b.clone()];
        b.fill(0.0);
        b[h..2 * h].fill(1.0);
    }
    params[layout.out_b.clone()].fill(0.0);
    Ok(LstmModel { config: config.clone(), layout, params })
}

/// Turns pre-activations `z` (`rows × 4H`) into gate activations in place and
/// writes the new cell and hidden states.
pub(crate) fn apply_gates(z: &mut [f64], c_prev: &[f64], c: &mut [f64], tanh_c: &mut [f64], h: &mut [f64], hidden: usize) {
    for (r, zr) in z.chunks_exact_mut(4 * hidden).enumerate() {
        let (i, rest) = zr.split_at_mut(hidden);
        let (f, rest) = rest.split_at_mut(hidden);
        let (g, o) = rest.split_at_mut(hidden);
        let row = r * hidden..(r + 1) * hidden;
        let (cp, cr, tr, hr) = (&c_prev[row.clone()], &mut c[row.clone()], &mut tanh_c[row.clone()], &mut h[row]);
        for k in 0..hidden {
            i[k] = linalg::sigmoid(i[k]);
            f[k] = linalg::sigmoid(f[k]);
            g[k] = libm::tanh(g[k]);
            o[k] = linalg::sigmoid(o[k]);
            cr[k] = f[k] * cp[k] + i[k] * g[k];
            tr[k] = libm::tanh(cr[k]);
            hr[k] = o[k] * tr[k];
        }
    }
}

/// One LSTM step for a single example: gates from `W·x + U·h + b`, then
/// `c' = f⊙c + i⊙g` and `h' = o⊙tanh(c')`.
pub fn step_cell(x: &[f64], h: &[f64], c: &[f64], p: &LayerParams<'_>) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
    let hd = p.hidden_dim;
    let expect = |what, got: usize, expected: usize| {
        if got == expected {
            Ok(())
        } else {
            Err(ModelError::Shape { what, expected, got })
        }
    };
    expect("x", x.len(), p.input_dim)?;
    expect("h", h.len(), hd)?;
    expect("c", c.len(), hd)?;
    expect("input weights", p.wx.len(), p.input_dim * 4 * hd)?;
    expect("recurrent weights", p.wh.len(), hd * 4 * hd)?;
    expect("bias", p.b.len(), 4 * hd)?;
    let mut z = p.b.to_vec();
    linalg::gemm(1.0, linalg::MatRef::new(x, 1, p.input_dim), linalg::MatRef::new(p.wx, p.input_dim, 4 * hd), 1.0, &mut z);
    linalg::gemm(1.0, linalg::MatRef::new(h, 1, hd), linalg::MatRef::new(p.wh, hd, 4 * hd), 1.0, &mut z);
    let (mut c2, mut t2, mut h2) = (vec![0.0; hd], vec![0.0; hd], vec![0.0; hd]);
    apply_gates(&mut z, c, &mut c2, &mut t2, &mut h2, hd);
    Ok((h2, c2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_matches_published_rates() {
        let lr = LrSchedule::default();
        assert_eq!(lr.rate(1), 1.0);
        assert_eq!(lr.rate(4), 1.0);
        assert_eq!(lr.rate(5), 0.5);
        assert_eq!(lr.rate(13), 1.0 / 512.0);
        assert!((lr.rate(13) - 0.002).abs() < 1e-4);
    }

    #[test]
    fn parameter_count_default() {
        let cfg = ModelConfig::new(5);
        assert_eq!(cfg.parameter_count(), 5 * 200 + 2 * (4 * (200 + 200 + 1) * 200) + 200 * 5 + 5);
        let m = init_model(&cfg).unwrap();
        assert_eq!(m.params().len(), cfg.parameter_count());
        let names: Vec<_> = m.layout().tensors().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names.len(), 1 + 3 * 2 + 2);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let mut cfg = ModelConfig::new(7);
        cfg.hidden_dim = 16;
        cfg.embed_dim = 8;
        let a = init_model(&cfg).unwrap();
        assert_eq!(a, init_model(&cfg).unwrap());
        assert!(a.params().iter().all(|x| x.abs() <= 1.0));
        cfg.seed = 1;
        assert_ne!(a, init_model(&cfg).unwrap());

        cfg.init_scale = 0.0;
        let z = init_model(&cfg).unwrap();
        let l = z.layer(1);
        assert!(l.b[16..32].iter().all(|&b| b == 1.0));
        assert!(l.b[..16].iter().chain(&l.b[32..]).all(|&b| b == 0.0));
        assert!(l.wx.iter().chain(l.wh).all(|&w| w == 0.0));
        assert!(z.embedding().iter().chain(z.out_w()).chain(z.out_b()).all(|&w| w == 0.0));
    }

    #[test]
    fn config_validation() {
        let mut cfg = ModelConfig::new(3);
        cfg.hidden_dim = 0;
        assert_eq!(init_model(&cfg).unwrap_err(), ModelError::ZeroDimension("hidden_dim"));
        let cfg = ModelConfig::new(0);
        assert_eq!(cfg.validate(), Err(ModelError::ZeroDimension("vocab_size")));
        let mut cfg = ModelConfig::new(3);
        cfg.max_grad_norm = 0.0;
        assert_eq!(cfg.validate(), Err(ModelError::BadHyperparameter));
        assert!(matches!(
            LstmModel::from_parts(ModelConfig::new(3), vec![0.0; 4]),
            Err(ModelError::Shape { .. })
        ));
    }

    fn zero_layer(input: usize, hidden: usize, forget_bias: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut b = vec![0.0; 4 * hidden];
        b[hidden..2 * hidden].fill(forget_bias);
        (vec![0.0; input * 4 * hidden], vec![0.0; hidden * 4 * hidden], b)
    }

    #[test]
    fn step_cell_closed_forms() {
        let (wx, wh, b) = zero_layer(3, 4, 0.0);
        let p = LayerParams { input_dim: 3, hidden_dim: 4, wx: &wx, wh: &wh, b: &b };
        let (h, c) = step_cell(&[1.0, -2.0, 0.5], &[0.3; 4], &[0.0; 4], &p).unwrap();
        assert_eq!(h, vec![0.0; 4]);
        assert_eq!(c, vec![0.0; 4]);

        let beta = 0.7;
        let (wx, wh, b) = zero_layer(3, 4, beta);
        let p = LayerParams { input_dim: 3, hidden_dim: 4, wx: &wx, wh: &wh, b: &b };
        let v = [0.5, -1.0, 2.0, 0.0];
        let (_, c) = step_cell(&[1.0, 1.0, 1.0], &[0.0; 4], &v, &p).unwrap();
        let f = 1.0 / (1.0 + (-beta).exp());
        for k in 0..4 {
            assert!((c[k] - f * v[k]).abs() < 1e-15);
        }
        assert!(matches!(step_cell(&[1.0], &[0.0; 4], &v, &p), Err(ModelError::Shape { what: "x", .. })));
    }
}
