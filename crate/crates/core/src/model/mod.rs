//! A small pre-norm transformer encoder with a sigmoid multi-label head.
//!
//! Gradients are derived by hand (see [`backward`]) and checked against
//! central finite differences in the test suite. Training uses AdamW with
//! linear warmup followed by linear decay.

mod encoder;
mod head;
mod optim;
mod vocab;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use encoder::{backward, batch_loss, encode, forward_logits, Example};
pub use head::{bce_loss, classify, predict, sigmoid};
pub use optim::{adamw_step, lr_at, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use vocab::{Vocabulary, UNK};

/// Smallest position table allowed, matching the longest input length used.
pub const MIN_POSITIONS: usize = 200;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("empty token sequence")]
    EmptySequence,
    #[error("token id {id} out of range for vocabulary of {vocab_size}")]
    TokenOutOfRange { id: u32, vocab_size: usize },
    #[error("length mismatch: {0}")]
    Shape(String),
    #[error("target {value} at position {index} is not 0 or 1")]
    NonBinaryTarget { index: usize, value: f64 },
    #[error("non-finite gradient in {tensor}")]
    NonFiniteGradient { tensor: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub model_dim: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub ff_dim: usize,
    pub max_positions: usize,
    pub seed: u64,
}

impl EncoderConfig {
    /// Defaults for everything but vocabulary size and width.
    pub fn new(vocab_size: usize, model_dim: usize) -> Self {
        Self {
            vocab_size,
            model_dim,
            n_layers: 2,
            n_heads: 4,
            ff_dim: 4 * model_dim,
            max_positions: MIN_POSITIONS,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.vocab_size == 0 || self.model_dim == 0 || self.ff_dim == 0 {
            return bad("vocab_size, model_dim and ff_dim must be positive".into());
        }
        if self.n_heads == 0 || !self.model_dim.is_multiple_of(self.n_heads) {
            return bad(format!(
                "model_dim {} is not divisible by n_heads {}",
                self.model_dim, self.n_heads
            ));
        }
        if self.max_positions < MIN_POSITIONS {
            return bad(format!("max_positions must be at least {MIN_POSITIONS}"));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.n_heads
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// peak learning rate reached at the end of warmup
    pub peak_lr: f64,
    pub warmup_steps: usize,
    /// maximum input length in tokens, excluding the start token
    pub max_seq_len: usize,
    /// categorization threshold: labels with probability above it are assigned
    pub threshold: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub weight_decay: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            peak_lr: 1e-4,
            warmup_steps: 50,
            max_seq_len: 131,
            threshold: 0.5,
            batch_size: 1,
            epochs: 10,
            weight_decay: 0.01,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self, enc: &EncoderConfig) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidHyperparams(m));
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold {} not in (0, 1)", self.threshold));
        }
        if self.max_seq_len == 0 || self.max_seq_len > enc.max_positions {
            return bad(format!(
                "max_seq_len {} not in 1..={}",
                self.max_seq_len, enc.max_positions
            ));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive".into());
        }
        if !(self.peak_lr >= 0.0 && self.peak_lr.is_finite()) || !(self.weight_decay >= 0.0) {
            return bad("peak_lr and weight_decay must be finite and non-negative".into());
        }
        Ok(())
    }
}

/// How a tensor is treated by the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    Norm,
}

impl ParamKind {
    pub fn decays(self) -> bool {
        self == ParamKind::Weight
    }
}

/// Row-major 2-D array; vectors are stored as a single row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut ChaCha8Rng) -> Self {
        Self {
            rows,
            cols,
            data: (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect(),
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub ln1_gain: Tensor,
    pub ln1_bias: Tensor,
    pub wq: Tensor,
    pub bq: Tensor,
    pub wk: Tensor,
    pub bk: Tensor,
    pub wv: Tensor,
    pub bv: Tensor,
    pub wo: Tensor,
    pub bo: Tensor,
    pub ln2_gain: Tensor,
    pub ln2_bias: Tensor,
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

/// Output layer: `c = σ(a·W + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    /// d × |C|
    pub w: Tensor,
    /// 1 × |C|
    pub b: Tensor,
}

impl HeadParams {
    pub fn n_labels(&self) -> usize {
        self.b.cols
    }
}

/// All trainable tensors. Gradients and optimizer moments reuse this shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub config: EncoderConfig,
    pub token_embedding: Tensor,
    pub position_embedding: Tensor,
    /// learned start token whose final state is the pooled output
    pub cls: Tensor,
    pub layers: Vec<LayerParams>,
    pub final_gain: Tensor,
    pub final_bias: Tensor,
    pub head: HeadParams,
}

impl ModelParams {
    pub fn n_labels(&self) -> usize {
        self.head.n_labels()
    }

    /// Every tensor with a stable name, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, ParamKind, &Tensor)> {
        use ParamKind::*;
        let mut v = vec![
            ("token_embedding".to_string(), Weight, &self.token_embedding),
            ("position_embedding".to_string(), Weight, &self.position_embedding),
            ("cls".to_string(), Weight, &self.cls),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            let p = |n: &str| format!("layer{i}.{n}");
            v.extend([
                (p("ln1_gain"), Norm, &l.ln1_gain),
                (p("ln1_bias"), Norm, &l.ln1_bias),
                (p("wq"), Weight, &l.wq),
                (p("bq"), Bias, &l.bq),
                (p("wk"), Weight, &l.wk),
                (p("bk"), Bias, &l.bk),
                (p("wv"), Weight, &l.wv),
                (p("bv"), Bias, &l.bv),
                (p("wo"), Weight, &l.wo),
                (p("bo"), Bias, &l.bo),
                (p("ln2_gain"), Norm, &l.ln2_gain),
                (p("ln2_bias"), Norm, &l.ln2_bias),
                (p("w1"), Weight, &l.w1),
                (p("b1"), Bias, &l.b1),
                (p("w2"), Weight, &l.w2),
                (p("b2"), Bias, &l.b2),
            ]);
        }
        v.extend([
            ("final_gain".to_string(), Norm, &self.final_gain),
            ("final_bias".to_string(), Norm, &self.final_bias),
            ("head.w".to_string(), Weight, &self.head.w),
            ("head.b".to_string(), Bias, &self.head.b),
        ]);
        v
    }

    /// Mutable counterpart of [`ModelParams::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<(ParamKind, &mut Tensor)> {
        use ParamKind::*;
        let mut v: Vec<(ParamKind, &mut Tensor)> = vec![
            (Weight, &mut self.token_embedding),
            (Weight, &mut self.position_embedding),
            (Weight, &mut self.cls),
        ];
        for l in self.layers.iter_mut() {
            v.extend([
                (Norm, &mut l.ln1_gain),
                (Norm, &mut l.ln1_bias),
                (Weight, &mut l.wq),
                (Bias, &mut l.bq),
                (Weight, &mut l.wk),
                (Bias, &mut l.bk),
                (Weight, &mut l.wv),
                (Bias, &mut l.bv),
                (Weight, &mut l.wo),
                (Bias, &mut l.bo),
                (Norm, &mut l.ln2_gain),
                (Norm, &mut l.ln2_bias),
                (Weight, &mut l.w1),
                (Bias, &mut l.b1),
                (Weight, &mut l.w2),
                (Bias, &mut l.b2),
            ]);
        }
        v.extend([
            (Norm, &mut self.final_gain),
            (Norm, &mut self.final_bias),
            (Weight, &mut self.head.w),
            (Bias, &mut self.head.b),
        ]);
        v
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, _, t)| t.len()).sum()
    }

    /// Same shapes with every value zero.
    pub fn zeros_like(&self) -> ModelParams {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x = 0.0);
        }
        z
    }

    /// Closed-form parameter count for a configuration.
    pub fn expected_count(cfg: &EncoderConfig, n_labels: usize) -> usize {
        let (v, p, d, f, l) = (
            cfg.vocab_size,
            cfg.max_positions,
            cfg.model_dim,
            cfg.ff_dim,
            cfg.n_layers,
        );
        let layer = 2 * d + 4 * d * d + 4 * d + 2 * d + d * f + f + f * d + d;
        v * d + p * d + d + l * layer + 2 * d + d * n_labels + n_labels
    }
}

/// Seeded initialization: weights and embeddings uniform in ±1/√d, biases
/// zero, layer-norm gains one.
pub fn build_model(cfg: &EncoderConfig, n_labels: usize, seed: u64) -> Result<ModelParams, ModelError> {
    cfg.validate()?;
    if n_labels == 0 {
        return Err(ModelError::InvalidConfig("label space is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = cfg.model_dim;
    let bound = 1.0 / (d as f64).sqrt();
    let mut u = |r, c| Tensor::uniform(r, c, bound, &mut rng);
    let token_embedding = u(cfg.vocab_size, d);
    let position_embedding = u(cfg.max_positions, d);
    let cls = u(1, d);
    let mut layers = Vec::with_capacity(cfg.n_layers);
    for _ in 0..cfg.n_layers {
        layers.push(LayerParams {
            ln1_gain: Tensor::filled(1, d, 1.0),
            ln1_bias: Tensor::zeros(1, d),
            wq: u(d, d),
            bq: Tensor::zeros(1, d),
            wk: u(d, d),
            bk: Tensor::zeros(1, d),
            wv: u(d, d),
            bv: Tensor::zeros(1, d),
            wo: u(d, d),
            bo: Tensor::zeros(1, d),
            ln2_gain: Tensor::filled(1, d, 1.0),
            ln2_bias: Tensor::zeros(1, d),
            w1: u(d, cfg.ff_dim),
            b1: Tensor::zeros(1, cfg.ff_dim),
            w2: u(cfg.ff_dim, d),
            b2: Tensor::zeros(1, d),
        });
    }
    let head = HeadParams {
        w: u(d, n_labels),
        b: Tensor::zeros(1, n_labels),
    };
    Ok(ModelParams {
        config: cfg.clone(),
        token_embedding,
        position_embedding,
        cls,
        layers,
        final_gain: Tensor::filled(1, d, 1.0),
        final_bias: Tensor::zeros(1, d),
        head,
    })
}

/// Everything needed to reuse a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub hyperparams: Hyperparams,
    pub label_space: Vec<String>,
    pub vocabulary: Vocabulary,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let json = serde_json::to_string(self).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        ck.params.config.validate()?;
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> EncoderConfig {
        EncoderConfig {
            vocab_size: 11,
            model_dim: 8,
            n_layers: 2,
            n_heads: 2,
            ff_dim: 12,
            max_positions: 200,
            seed: 0,
        }
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let a = build_model(&tiny(), 3, 5).unwrap();
        assert_eq!(a, build_model(&tiny(), 3, 5).unwrap());
        assert_ne!(a, build_model(&tiny(), 3, 6).unwrap());
    }

    #[test]
    fn biases_zero_and_gains_one() {
        let m = build_model(&tiny(), 3, 1).unwrap();
        for (name, kind, t) in m.tensors() {
            match kind {
                ParamKind::Bias => assert!(t.data.iter().all(|&x| x == 0.0), "{name}"),
                ParamKind::Weight => {
                    assert!(t.data.iter().all(|x| x.abs() <= 1.0 / 8f64.sqrt()), "{name}")
                }
                ParamKind::Norm => {}
            }
        }
    }

    #[test]
    fn parameter_count_formula() {
        let cfg = tiny();
        let m = build_model(&cfg, 3, 1).unwrap();
        let layer = 16 + 256 + 32 + 16 + 96 + 12 + 96 + 8;
        assert_eq!(layer, 532);
        let by_hand = 88 + 1600 + 8 + 2 * layer + 16 + 24 + 3;
        assert_eq!(m.parameter_count(), by_hand);
        assert_eq!(ModelParams::expected_count(&cfg, 3), by_hand);
        assert_eq!(m.tensors().len(), m.clone().tensors_mut().len());
    }

    #[test]
    fn config_validation() {
        let mut c = tiny();
        c.n_heads = 3;
        assert!(c.validate().is_err());
        let mut c = tiny();
        c.max_positions = 100;
        assert!(c.validate().is_err());
        let hp = Hyperparams {
            threshold: 1.0,
            ..Hyperparams::default()
        };
        assert!(hp.validate(&tiny()).is_err());
        let hp = Hyperparams {
            max_seq_len: 201,
            ..Hyperparams::default()
        };
        assert!(hp.validate(&tiny()).is_err());
        assert!(Hyperparams::default().validate(&tiny()).is_ok());
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let params = build_model(&tiny(), 3, 9).unwrap();
        let ck = Checkpoint {
            hyperparams: Hyperparams::default(),
            label_space: vec!["a".into(), "b".into(), "c".into()],
            vocabulary: Vocabulary::build(["x y z"], 1),
            params,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        for ((_, _, a), (_, _, b)) in back.params.tensors().iter().zip(ck.params.tensors().iter()) {
            assert!(a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
