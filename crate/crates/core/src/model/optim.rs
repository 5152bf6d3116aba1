//! AdamW with decoupled weight decay, and the learning-rate schedule.

use serde::{Deserialize, Serialize};

use super::{Hyperparams, ModelError, ModelParams};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moments per tensor, in [`ModelParams::tensors`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|(_, _, t)| vec![0.0; t.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// One bias-corrected Adam update followed by `θ ← θ − lr·wd·θ` on weight
/// tensors. Biases and layer-norm parameters are not decayed.
pub fn adamw_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut OptimizerState,
    lr: f64,
    weight_decay: f64,
) -> Result<(), ModelError> {
    let grad_tensors = grads.tensors();
    if let Some((name, _, _)) = grad_tensors
        .iter()
        .find(|(_, _, t)| t.data.iter().any(|g| !g.is_finite()))
    {
        return Err(ModelError::NonFiniteGradient { tensor: name.clone() });
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for (i, (kind, tensor)) in params.tensors_mut().into_iter().enumerate() {
        let g = &grad_tensors[i].2.data;
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        let decay = if kind.decays() { lr * weight_decay } else { 0.0 };
        for j in 0..tensor.data.len() {
            m[j] = ADAM_BETA1 * m[j] + (1.0 - ADAM_BETA1) * g[j];
            v[j] = ADAM_BETA2 * v[j] + (1.0 - ADAM_BETA2) * g[j] * g[j];
            let mhat = m[j] / c1;
            let vhat = v[j] / c2;
            let theta = tensor.data[j];
            tensor.data[j] = theta - lr * mhat / (vhat.sqrt() + ADAM_EPS) - decay * theta;
        }
    }
    Ok(())
}

/// Linear warmup from 0 to the peak over `warmup_steps`, then linear decay
/// to 0 at `total_steps`.
pub fn lr_at(step: usize, hp: &Hyperparams, total_steps: usize) -> f64 {
    let peak = hp.peak_lr;
    let w = hp.warmup_steps;
    if step < w {
        return peak * step as f64 / w as f64;
    }
    if total_steps <= w {
        return peak;
    }
    let remaining = total_steps.saturating_sub(step) as f64;
    peak * remaining / (total_steps - w) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, EncoderConfig, ParamKind};

    fn model() -> ModelParams {
        let cfg = EncoderConfig {
            vocab_size: 5,
            model_dim: 4,
            n_layers: 1,
            n_heads: 1,
            ff_dim: 4,
            max_positions: 200,
            seed: 0,
        };
        build_model(&cfg, 2, 3).unwrap()
    }

    #[test]
    fn zero_gradient_no_decay_is_identity() {
        let mut p = model();
        let before = p.clone();
        let g = p.zeros_like();
        let mut s = OptimizerState::new(&p);
        adamw_step(&mut p, &g, &mut s, 1e-3, 0.0).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn decay_scales_weights_only() {
        let mut p = model();
        for (_, t) in p.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x += 0.5);
        }
        let before = p.clone();
        let g = p.zeros_like();
        let mut s = OptimizerState::new(&p);
        adamw_step(&mut p, &g, &mut s, 1e-2, 0.1).unwrap();
        for ((_, kind, a), (_, _, b)) in p.tensors().iter().zip(before.tensors().iter()) {
            for (x, y) in a.data.iter().zip(&b.data) {
                let want = if *kind == ParamKind::Weight { y * (1.0 - 1e-3) } else { *y };
                assert!((x - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn first_step_hand_value() {
        let mut p = model();
        let before = p.head.b.data[0];
        let mut g = p.zeros_like();
        g.head.b.data[0] = 0.1;
        let mut s = OptimizerState::new(&p);
        adamw_step(&mut p, &g, &mut s, 1e-3, 0.0).unwrap();
        // m̂ = 0.1, v̂ = 0.01 after bias correction
        let want = before - 1e-3 * 0.1 / (0.01f64.sqrt() + 1e-8);
        assert!((p.head.b.data[0] - want).abs() < 1e-15);
        assert!((p.head.b.data[0] - before + 1e-3).abs() < 1e-10);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut p = model();
        let mut g = p.zeros_like();
        g.layers[0].w1.data[2] = f64::NAN;
        let mut s = OptimizerState::new(&p);
        assert_eq!(
            adamw_step(&mut p, &g, &mut s, 1e-3, 0.0),
            Err(ModelError::NonFiniteGradient { tensor: "layer0.w1".into() })
        );
    }

    #[test]
    fn schedule_points() {
        let hp = Hyperparams::default();
        assert!((lr_at(25, &hp, 1050) - 5e-5).abs() < 1e-20);
        assert_eq!(lr_at(50, &hp, 1050), 1e-4);
        assert!((lr_at(550, &hp, 1050) - 5e-5).abs() < 1e-20);
        assert_eq!(lr_at(1050, &hp, 1050), 0.0);
        assert_eq!(lr_at(0, &hp, 1050), 0.0);
    }
}
