//! Experiment protocol: splitting, training with periodic validation, the
//! most-frequent-labels baseline, the hyperparameter grid and reporting.

mod baseline;
mod grid;
mod report;
mod train;

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::metrics::{MetricsError, MetricsReport};
use crate::model::{EncoderConfig, Hyperparams, ModelError, MIN_POSITIONS};
use crate::taxonomy::{LabeledDataset, TaxonomyError, Variant};

pub use baseline::{baseline_eval, baseline_fit, BaselineModel, BaselineReport, DEFAULT_BASELINE_N};
pub use grid::{read_results, run_grid, Grid, GridJob};
pub use report::{report, ReportFiles};
pub use train::{evaluate, train, train_with_checkpoint};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("dataset has {0} entries, at least 10 are needed to split")]
    TooSmall(usize),
    #[error("invalid split fractions: {0}")]
    InvalidSplit(String),
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss {loss} at step {step} (lr {lr:e})")]
    Diverged { step: usize, lr: f64, loss: f64 },
    #[error("label spaces differ between splits")]
    LabelSpaceMismatch,
    #[error("nothing to report")]
    NoRows,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.72,
            validation: 0.08,
            test: 0.20,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(HarnessError::InvalidSplit("fractions must lie in [0, 1]".into()));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(HarnessError::InvalidSplit("fractions must sum to 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub train: LabeledDataset,
    pub validation: LabeledDataset,
    pub test: LabeledDataset,
}

/// Index sets of a seeded shuffle cut into train, validation and test.
/// Validation and test sizes round down; the remainder goes to train.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>), HarnessError> {
    spec.validate()?;
    if n < 10 {
        return Err(HarnessError::TooSmall(n));
    }
    let n_val = (n as f64 * spec.validation + 1e-9).floor() as usize;
    let n_test = (n as f64 * spec.test + 1e-9).floor() as usize;
    let n_train = n - n_val - n_test;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let test = order.split_off(n_train + n_val);
    let validation = order.split_off(n_train);
    Ok((order, validation, test))
}

pub fn split(dataset: &LabeledDataset, spec: &SplitSpec) -> Result<Splits, HarnessError> {
    let (tr, va, te) = split_indices(dataset.len(), spec)?;
    Ok(Splits {
        train: dataset.subset(&tr),
        validation: dataset.subset(&va),
        test: dataset.subset(&te),
    })
}

/// One training run: model shape, optimization settings and protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// free-form dataset name used to group report rows
    pub dataset: String,
    pub variant: Variant,
    pub model_dim: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub ff_dim: usize,
    pub max_positions: usize,
    pub hyperparams: Hyperparams,
    /// validations per epoch
    pub eval_interval: usize,
    /// words seen fewer times in the training split map to the unknown token
    pub vocab_min_count: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: "dataset".into(),
            variant: Variant::DropOthers,
            model_dim: 64,
            n_layers: 2,
            n_heads: 4,
            ff_dim: 256,
            max_positions: MIN_POSITIONS,
            hyperparams: Hyperparams::default(),
            eval_interval: 4,
            vocab_min_count: 2,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn encoder_config(&self, vocab_size: usize) -> EncoderConfig {
        EncoderConfig {
            vocab_size,
            model_dim: self.model_dim,
            n_layers: self.n_layers,
            n_heads: self.n_heads,
            ff_dim: self.ff_dim,
            max_positions: self.max_positions,
            seed: self.seed,
        }
    }

    /// Short name of the encoder shape, e.g. `d64-l2-h4-ff256`.
    pub fn encoder_name(&self) -> String {
        format!("d{}-l{}-h{}-ff{}", self.model_dim, self.n_layers, self.n_heads, self.ff_dim)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.eval_interval == 0 {
            return Err(HarnessError::InvalidConfig("eval_interval must be positive".into()));
        }
        let enc = self.encoder_config(1);
        enc.validate()?;
        self.hyperparams.validate(&enc)?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form; identifies a run for resuming.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))[..16].to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub config_hash: String,
    pub config: ExperimentConfig,
    #[serde(flatten)]
    pub status: RunStatus,
    /// validation metrics at the retained checkpoint
    pub validation: Option<MetricsReport>,
    /// test metrics of the retained checkpoint, computed once
    pub test: Option<MetricsReport>,
    /// optimizer step of the retained checkpoint
    pub best_step: usize,
    pub total_steps: usize,
    /// validation micro-F1 at every evaluation, in order
    pub validation_curve: Vec<f64>,
    /// mean training loss between evaluations
    pub loss_curve: Vec<f64>,
    pub wall_clock_secs: f64,
    pub checkpoint: Option<PathBuf>,
}

impl ResultRow {
    pub fn failed(config: ExperimentConfig, error: String) -> Self {
        Self {
            config_hash: config.config_hash(),
            config,
            status: RunStatus::Failed { error },
            validation: None,
            test: None,
            best_step: 0,
            total_steps: 0,
            validation_curve: Vec::new(),
            loss_curve: Vec::new(),
            wall_clock_secs: 0.0,
            checkpoint: None,
        }
    }

    pub fn test_micro_f1(&self) -> Option<f64> {
        self.test.map(|t| t.micro_f1)
    }
}
