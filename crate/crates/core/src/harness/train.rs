//! The training loop with periodic validation and best-checkpoint retention.

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ExperimentConfig, HarnessError, ResultRow, RunStatus, Splits};
use crate::metrics::{evaluate_all, LabelMatrix, MetricsReport};
use crate::model::{
    adamw_step, backward, build_model, forward_logits, lr_at, predict, sigmoid, Checkpoint, Example, Hyperparams,
    ModelParams, OptimizerState, Vocabulary, UNK,
};
use crate::taxonomy::LabeledDataset;

fn encode_text(vocab: &Vocabulary, text: &str) -> Vec<u32> {
    let ids = vocab.encode(text);
    if ids.is_empty() {
        vec![UNK]
    } else {
        ids
    }
}

fn examples(vocab: &Vocabulary, data: &LabeledDataset) -> Vec<Example> {
    data.entries
        .iter()
        .map(|e| {
            let mut targets = vec![0.0; data.n_labels()];
            for &l in &e.labels {
                targets[l] = 1.0;
            }
            Example {
                tokens: encode_text(vocab, &e.text),
                targets,
            }
        })
        .collect()
}

fn predict_matrix(
    params: &ModelParams,
    examples: &[Example],
    n_labels: usize,
    hp: &Hyperparams,
) -> Result<LabelMatrix, HarnessError> {
    let mut pred = LabelMatrix::zeros(examples.len(), n_labels);
    for (i, ex) in examples.iter().enumerate() {
        let logits = forward_logits(params, &ex.tokens, hp.max_seq_len)?;
        let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
        for l in predict(&probs, hp.threshold) {
            pred.set(i, l, true);
        }
    }
    Ok(pred)
}

/// Metrics of a trained model on a labeled split.
pub fn evaluate(
    params: &ModelParams,
    vocab: &Vocabulary,
    data: &LabeledDataset,
    hp: &Hyperparams,
) -> Result<MetricsReport, HarnessError> {
    let ex = examples(vocab, data);
    let pred = predict_matrix(params, &ex, data.n_labels(), hp)?;
    Ok(evaluate_all(&data.label_matrix(), &pred)?)
}

/// Steps within an epoch (1-based) after which validation runs.
fn eval_points(steps_per_epoch: usize, interval: usize) -> Vec<usize> {
    let mut pts: Vec<usize> = (1..=interval)
        .map(|j| (steps_per_epoch * j).div_ceil(interval).max(1))
        .collect();
    pts.dedup();
    pts
}

pub fn train(splits: &Splits, cfg: &ExperimentConfig) -> Result<ResultRow, HarnessError> {
    train_with_checkpoint(splits, cfg, None)
}

/// Trains on `splits.train`, validating `eval_interval` times per epoch,
/// and evaluates the best-validation parameters once on `splits.test`.
/// The retained parameters are written to `checkpoint` when given.
pub fn train_with_checkpoint(
    splits: &Splits,
    cfg: &ExperimentConfig,
    checkpoint: Option<&Path>,
) -> Result<ResultRow, HarnessError> {
    cfg.validate()?;
    let label_space = &splits.train.label_space;
    if &splits.validation.label_space != label_space || &splits.test.label_space != label_space {
        return Err(HarnessError::LabelSpaceMismatch);
    }
    if splits.train.is_empty() || splits.validation.is_empty() || splits.test.is_empty() {
        return Err(HarnessError::InvalidConfig("every split needs at least one entry".into()));
    }
    let started = Instant::now();
    let hp = &cfg.hyperparams;
    let n_labels = label_space.len();

    let vocab = Vocabulary::build(splits.train.entries.iter().map(|e| e.text.as_str()), cfg.vocab_min_count);
    let train_ex = examples(&vocab, &splits.train);
    let val_ex = examples(&vocab, &splits.validation);
    let val_gold = splits.validation.label_matrix();

    let enc = cfg.encoder_config(vocab.len());
    let mut params = build_model(&enc, n_labels, cfg.seed)?;
    let mut opt = OptimizerState::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x005e_ed0f_7a1e);

    let steps_per_epoch = train_ex.len().div_ceil(hp.batch_size);
    let total_steps = steps_per_epoch * hp.epochs;
    let points = eval_points(steps_per_epoch, cfg.eval_interval);
    log::info!(
        "{}: {} train / {} validation, vocabulary {}, {} parameters, {total_steps} steps",
        cfg.config_hash(),
        train_ex.len(),
        val_ex.len(),
        vocab.len(),
        params.parameter_count()
    );

    let mut best: Option<(f64, usize, MetricsReport, ModelParams)> = None;
    let mut validation_curve = Vec::new();
    let mut loss_curve = Vec::new();
    let mut loss_sum = 0.0;
    let mut loss_n = 0usize;
    let mut order: Vec<usize> = (0..train_ex.len()).collect();
    let mut step = 0usize;
    for epoch in 0..hp.epochs {
        order.shuffle(&mut rng);
        for (b, chunk) in order.chunks(hp.batch_size).enumerate() {
            step += 1;
            let batch: Vec<Example> = chunk.iter().map(|&i| train_ex[i].clone()).collect();
            let lr = lr_at(step, hp, total_steps);
            let (loss, grads) = backward(&params, &batch, hp.max_seq_len)?;
            if !loss.is_finite() {
                return Err(HarnessError::Diverged { step, lr, loss });
            }
            log::debug!("step {step} lr {lr:e} loss {loss:.6}");
            loss_sum += loss;
            loss_n += 1;
            adamw_step(&mut params, &grads, &mut opt, lr, hp.weight_decay)?;

            if points.contains(&(b + 1)) {
                let pred = predict_matrix(&params, &val_ex, n_labels, hp)?;
                let report = evaluate_all(&val_gold, &pred)?;
                validation_curve.push(report.micro_f1);
                loss_curve.push(loss_sum / loss_n.max(1) as f64);
                loss_sum = 0.0;
                loss_n = 0;
                log::info!(
                    "epoch {} step {step}/{total_steps}: loss {:.4} validation micro-F1 {:.4}",
                    epoch + 1,
                    loss_curve.last().unwrap(),
                    report.micro_f1
                );
                if best.as_ref().is_none_or(|(f, ..)| report.micro_f1 > *f) {
                    best = Some((report.micro_f1, step, report, params.clone()));
                }
            }
        }
    }

    let (_, best_step, validation, best_params) = best.expect("at least one validation per epoch");
    let test = evaluate(&best_params, &vocab, &splits.test, hp)?;
    if let Some(path) = checkpoint {
        Checkpoint {
            hyperparams: hp.clone(),
            label_space: label_space.clone(),
            vocabulary: vocab,
            params: best_params,
        }
        .save(path)?;
    }
    Ok(ResultRow {
        config_hash: cfg.config_hash(),
        config: cfg.clone(),
        status: RunStatus::Completed,
        validation: Some(validation),
        test: Some(test),
        best_step,
        total_steps,
        validation_curve,
        loss_curve,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        checkpoint: checkpoint.map(Path::to_path_buf),
    })
}
