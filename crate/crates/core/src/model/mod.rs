//! Tiny retention network, evaluated recurrently.
//!
//! Each step consumes one `(addr_tok, pc_tok)` pair and produces logits over
//! `K` ordinals. Per-layer state is a `d x d` matrix decayed by a scalar and
//! updated with a rank-one outer product, so a step costs
//! `O(layers * d^2 + d * K)` regardless of how many tokens came before.

mod bench;
pub mod fit;
mod golden;
mod io;
mod step;

pub use bench::{bench_inference, InferenceBench};
pub use golden::{golden_max_error, golden_rows, read_golden, write_golden, GoldenRow};
pub use io::{decode_weights, encode_weights, load_weights, save_weights, WEIGHTS_MAGIC, WEIGHTS_VERSION};
pub use step::{embed_token, gelu, predict_topn, rms_norm, Scratch, RMS_EPS};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic {0:02x?}, expected \"MXW1\"")]
    BadMagic([u8; 4]),
    #[error("unsupported weights version {0}")]
    UnsupportedVersion(u8),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("weights payload has {found} bytes, config requires {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("parameter {index} is not finite")]
    NonFiniteWeight { index: usize },
    #[error("token {token} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { token: usize, vocab: usize },
    #[error("non-finite activation in layer {layer}; weights are likely corrupt")]
    NonFinite { layer: usize },
    #[error("recurrent state has {found} layers, model has {expected}")]
    StateMismatch { expected: usize, found: usize },
    #[error("top-n of {n} requested from {vocab} classes")]
    InvalidTopN { n: usize, vocab: usize },
}

/// Default decay for layer `l`: `1 - 2^-(5 + l)`.
pub fn default_decay(layer: usize) -> f32 {
    1.0 - (-(5.0 + layer as f32)).exp2()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Vocabulary size `K`.
    pub vocab: usize,
    /// Hidden dimension `d`.
    pub hidden: usize,
    pub layers: usize,
    pub ffn_mult: usize,
    /// Per-layer retention decay.
    pub decay: Vec<f32>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::new(crate::DEFAULT_VOCAB, 8, 2)
    }
}

impl ModelConfig {
    pub fn new(vocab: usize, hidden: usize, layers: usize) -> Self {
        Self { vocab, hidden, layers, ffn_mult: 2, decay: (0..layers).map(default_decay).collect() }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.vocab < 2 || self.vocab > u16::MAX as usize {
            return bad(format!("vocabulary size {} outside [2, 65535]", self.vocab));
        }
        if self.hidden == 0 || self.hidden > u16::MAX as usize {
            return bad(format!("hidden dimension {} outside [1, 65535]", self.hidden));
        }
        if self.layers == 0 || self.layers > u8::MAX as usize {
            return bad(format!("layer count {} outside [1, 255]", self.layers));
        }
        if self.ffn_mult == 0 || self.ffn_mult > u16::MAX as usize {
            return bad(format!("ffn multiplier {} outside [1, 65535]", self.ffn_mult));
        }
        if self.decay.len() != self.layers {
            return bad(format!("{} decays for {} layers", self.decay.len(), self.layers));
        }
        if let Some(g) = self.decay.iter().find(|g| !(**g > 0.0 && **g < 1.0)) {
            return bad(format!("decay {g} outside (0, 1)"));
        }
        Ok(())
    }

    pub fn ffn_hidden(&self) -> usize {
        self.ffn_mult * self.hidden
    }

    pub fn layer_param_count(&self) -> usize {
        let d = self.hidden;
        4 * d * d + 2 * d * self.ffn_hidden()
    }

    /// Trainable parameters: two embedding tables, per-layer projections and
    /// FFN, and the output head. Normalisation has no learned gain.
    pub fn param_count(&self) -> usize {
        2 * self.vocab * self.hidden + self.layers * self.layer_param_count() + self.hidden * self.vocab
    }
}

/// Weights of one retention block. Matrices are row-major and applied as
/// `row_vector * matrix`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerWeights {
    pub w_q: Vec<f32>,
    pub w_k: Vec<f32>,
    pub w_v: Vec<f32>,
    pub w_o: Vec<f32>,
    /// `d x (ffn_mult * d)`
    pub ffn_up: Vec<f32>,
    /// `(ffn_mult * d) x d`
    pub ffn_down: Vec<f32>,
}

impl LayerWeights {
    fn zeros(config: &ModelConfig) -> Self {
        let dd = config.hidden * config.hidden;
        let df = config.hidden * config.ffn_hidden();
        Self {
            w_q: vec![0.0; dd],
            w_k: vec![0.0; dd],
            w_v: vec![0.0; dd],
            w_o: vec![0.0; dd],
            ffn_up: vec![0.0; df],
            ffn_down: vec![0.0; df],
        }
    }

    fn tensors(&self) -> [&[f32]; 6] {
        [&self.w_q, &self.w_k, &self.w_v, &self.w_o, &self.ffn_up, &self.ffn_down]
    }

    fn tensors_mut(&mut self) -> [&mut Vec<f32>; 6] {
        [&mut self.w_q, &mut self.w_k, &mut self.w_v, &mut self.w_o, &mut self.ffn_up, &mut self.ffn_down]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelWeights {
    pub config: ModelConfig,
    /// `K x d`, indexed by `vpn mod K`.
    pub embed_addr: Vec<f32>,
    /// `K x d`, indexed by `pc mod K`.
    pub embed_pc: Vec<f32>,
    pub layers: Vec<LayerWeights>,
    /// `d x K`
    pub head: Vec<f32>,
}

impl ModelWeights {
    pub fn zeros(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let kd = config.vocab * config.hidden;
        Ok(Self {
            embed_addr: vec![0.0; kd],
            embed_pc: vec![0.0; kd],
            layers: (0..config.layers).map(|_| LayerWeights::zeros(&config)).collect(),
            head: vec![0.0; kd],
            config,
        })
    }

    /// Uniform weights in `[-scale, scale]`, deterministic in `seed`.
    pub fn random(config: ModelConfig, seed: u64, scale: f32) -> Result<Self, ModelError> {
        let mut w = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in w.tensors_mut() {
            t.iter_mut().for_each(|x| *x = rng.random_range(-scale..=scale));
        }
        Ok(w)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn param_count(&self) -> usize {
        self.tensors().map(<[f32]>::len).sum()
    }

    /// All parameter tensors in serialisation order.
    pub fn tensors(&self) -> impl Iterator<Item = &[f32]> {
        [self.embed_addr.as_slice(), self.embed_pc.as_slice()]
            .into_iter()
            .chain(self.layers.iter().flat_map(|l| l.tensors()))
            .chain(std::iter::once(self.head.as_slice()))
    }

    pub(crate) fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Vec<f32>> {
        [&mut self.embed_addr, &mut self.embed_pc]
            .into_iter()
            .chain(self.layers.iter_mut().flat_map(|l| l.tensors_mut()))
            .chain(std::iter::once(&mut self.head))
    }

    pub fn check_finite(&self) -> Result<(), ModelError> {
        match self.tensors().flatten().position(|x| !x.is_finite()) {
            Some(index) => Err(ModelError::NonFiniteWeight { index }),
            None => Ok(()),
        }
    }

    pub fn new_state(&self) -> RecurrentState {
        RecurrentState::new(&self.config)
    }
}

/// Per-layer `d x d` retention summaries.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentState {
    pub layers: Vec<Vec<f32>>,
    pub token_count: u64,
}

impl RecurrentState {
    pub fn new(config: &ModelConfig) -> Self {
        Self { layers: vec![vec![0.0; config.hidden * config.hidden]; config.layers], token_count: 0 }
    }

    pub fn reset(&mut self) {
        self.layers.iter_mut().for_each(|s| s.fill(0.0));
        self.token_count = 0;
    }
}
