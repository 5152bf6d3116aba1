mod common;

use ementa::metrics::{evaluate_all, LabelMatrix};
use ementa::model::*;
use proptest::prelude::*;
use rand::Rng;

fn small_model(d: usize, vocab: usize, labels: usize, seed: u64) -> ModelParams {
    let cfg = EncoderConfig {
        n_heads: 2,
        ff_dim: 2 * d,
        seed,
        ..EncoderConfig::new(vocab, d)
    };
    let mut p = build_model(&cfg, labels, seed).unwrap();
    let mut rng = common::rng(seed ^ 99);
    for (_, t) in p.tensors_mut() {
        for v in t.data.iter_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
    }
    p
}

fn toy_batch(vocab: u32, labels: usize, n: usize, seed: u64) -> Vec<Example> {
    let mut rng = common::rng(seed);
    (0..n)
        .map(|_| {
            let len = rng.random_range(1..7);
            Example {
                tokens: (0..len).map(|_| rng.random_range(0..vocab)).collect(),
                targets: (0..labels).map(|_| f64::from(u8::from(rng.random_bool(0.4)))).collect(),
            }
        })
        .collect()
}

#[test]
fn forward_matches_dense_oracle() {
    let p = small_model(16, 20, 4, 3);
    for ex in toy_batch(20, 4, 10, 5) {
        for max_len in [2, 131] {
            let got = forward_logits(&p, &ex.tokens, max_len).unwrap();
            let want = common::oracle_logits(&p, &ex.tokens, max_len);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-10, "{got:?} vs {want:?}");
            }
        }
    }
}

#[test]
fn gradients_match_central_differences() {
    let p = small_model(16, 12, 3, 7);
    let batch = toy_batch(12, 3, 2, 8);
    let (_, grads) = backward(&p, &batch, 131).unwrap();
    for (name, err) in common::gradient_errors(&p, &grads, &batch, 131, 1e-4) {
        assert!(err <= 1e-4, "{name}: relative error {err:e}");
    }
}

#[test]
fn reported_loss_matches_batch_loss() {
    let p = small_model(16, 12, 3, 1);
    let batch = toy_batch(12, 3, 4, 2);
    let (loss, _) = backward(&p, &batch, 131).unwrap();
    assert!((loss - batch_loss(&p, &batch, 131).unwrap()).abs() < 1e-12);
}

fn separable_batch() -> Vec<Example> {
    (0..8)
        .map(|i| Example {
            tokens: vec![1 + i as u32, 9 + (i % 3) as u32],
            targets: (0..4).map(|l| f64::from(u8::from((i >> (l % 3)) & 1 == 1 || l == 3 && i % 2 == 0))).collect(),
        })
        .collect()
}

#[test]
fn overfits_eight_examples() {
    let mut p = build_model(&EncoderConfig::new(12, 16), 4, 0).unwrap();
    let batch = separable_batch();
    let mut opt = OptimizerState::new(&p);
    let mut first = None;
    let mut at_50 = 0.0;
    for step in 1..=200 {
        let (loss, g) = backward(&p, &batch, 131).unwrap();
        first.get_or_insert(loss);
        if step == 50 {
            at_50 = loss;
        }
        adamw_step(&mut p, &g, &mut opt, 1e-3, 0.0).unwrap();
    }
    assert!(at_50 < first.unwrap());
    let gold = LabelMatrix::from_bools(8, 4, batch.iter().flat_map(|e| e.targets.iter().map(|&t| t == 1.0)).collect()).unwrap();
    let mut pred = LabelMatrix::zeros(8, 4);
    for (i, e) in batch.iter().enumerate() {
        let probs: Vec<f64> = forward_logits(&p, &e.tokens, 131).unwrap().into_iter().map(sigmoid).collect();
        for l in predict(&probs, 0.5) {
            pred.set(i, l, true);
        }
    }
    assert_eq!(evaluate_all(&gold, &pred).unwrap().micro_f1, 1.0);
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.json");
    let ck = Checkpoint {
        hyperparams: Hyperparams::default(),
        label_space: vec!["a".into(), "b".into(), "c".into()],
        vocabulary: Vocabulary::build(["um dois tres", "dois"], 1),
        params: small_model(16, 4, 3, 1),
    };
    ck.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back.params, ck.params);
    let e = [3u32, 1, 2];
    assert_eq!(forward_logits(&back.params, &e, 131).unwrap(), forward_logits(&ck.params, &e, 131).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn higher_threshold_predicts_subset(
        probs in prop::collection::vec(0.0f64..=1.0, 1..30),
        a in 0.0f64..1.0,
        b in 0.0f64..1.0,
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let low = predict(&probs, lo);
        prop_assert!(predict(&probs, hi).iter().all(|l| low.contains(l)));
    }
}

#[test]
fn key_bias_gradient_vanishes() {
    let p = small_model(16, 12, 3, 4);
    let (_, g) = backward(&p, &toy_batch(12, 3, 3, 6), 131).unwrap();
    for l in &g.layers {
        assert!(l.bk.data.iter().all(|v| v.abs() < 1e-12));
    }
}
