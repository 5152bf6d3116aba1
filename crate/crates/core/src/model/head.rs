//! Sigmoid output layer, threshold prediction and binary cross-entropy.

use super::{HeadParams, ModelError};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logits `a·W + b` and their elementwise logistic.
pub fn classify(a: &[f64], head: &HeadParams) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
    if a.len() != head.w.rows {
        return Err(ModelError::Shape(format!(
            "pooled vector has {} values, head expects {}",
            a.len(),
            head.w.rows
        )));
    }
    let mut logits = head.b.data.clone();
    for (ai, row) in a.iter().zip(head.w.data.chunks_exact(head.w.cols)) {
        for (z, w) in logits.iter_mut().zip(row) {
            *z += ai * w;
        }
    }
    let probs = logits.iter().map(|&z| sigmoid(z)).collect();
    Ok((logits, probs))
}

/// Labels whose probability is strictly greater than `threshold`.
pub fn predict(probs: &[f64], threshold: f64) -> Vec<usize> {
    probs
        .iter()
        .enumerate()
        .filter_map(|(i, &p)| (p > threshold).then_some(i))
        .collect()
}

/// Mean binary cross-entropy over labels, on logits:
/// `max(z, 0) − z·y + ln(1 + e^{−|z|})`.
pub fn bce_loss(logits: &[f64], targets: &[f64]) -> Result<f64, ModelError> {
    if logits.len() != targets.len() || logits.is_empty() {
        return Err(ModelError::Shape(format!(
            "{} logits for {} targets",
            logits.len(),
            targets.len()
        )));
    }
    let mut total = 0.0;
    for (index, (&z, &y)) in logits.iter().zip(targets).enumerate() {
        if y != 0.0 && y != 1.0 {
            return Err(ModelError::NonBinaryTarget { index, value: y });
        }
        total += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
    }
    Ok(total / logits.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Tensor;

    fn head(w: Vec<f64>, d: usize, b: Vec<f64>) -> HeadParams {
        let c = b.len();
        HeadParams {
            w: Tensor { rows: d, cols: c, data: w },
            b: Tensor { rows: 1, cols: c, data: b },
        }
    }

    #[test]
    fn zero_head_gives_one_half() {
        let h = head(vec![0.0; 6], 2, vec![0.0; 3]);
        let (_, p) = classify(&[0.0, 0.0], &h).unwrap();
        assert_eq!(p, vec![0.5; 3]);
        let h = head(vec![0.0; 4], 2, vec![20.0, 0.0]);
        let (_, p) = classify(&[0.0, 0.0], &h).unwrap();
        assert!(p[0] > 0.9999);
        assert!(classify(&[1.0], &h).is_err());
    }

    #[test]
    fn two_by_three_hand_case() {
        // W = [[1, -2, 0.5], [3, 0, -1]], b = (0.1, 0.2, -0.3), a = (0.5, -1)
        let h = head(vec![1.0, -2.0, 0.5, 3.0, 0.0, -1.0], 2, vec![0.1, 0.2, -0.3]);
        let (z, p) = classify(&[0.5, -1.0], &h).unwrap();
        let want = [0.5 - 3.0 + 0.1, -1.0 + 0.2, 0.25 + 1.0 - 0.3];
        for (a, b) in z.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        for (pi, zi) in p.iter().zip(want) {
            assert!((pi - 1.0 / (1.0 + (-zi).exp())).abs() < 1e-12);
        }
    }

    #[test]
    fn strict_threshold() {
        assert_eq!(predict(&[0.3, 0.6], 0.5), vec![1]);
        assert_eq!(predict(&[0.5, 0.75], 0.5), vec![1]);
        assert!(predict(&[0.25], 0.25).is_empty());
    }

    #[test]
    fn loss_anchors() {
        assert!((bce_loss(&[0.0; 4], &[1.0, 0.0, 1.0, 0.0]).unwrap() - 2f64.ln()).abs() < 1e-12);
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let l = bce_loss(&[logit(0.8), logit(0.4)], &[1.0, 0.0]).unwrap();
        assert!((l - (-(0.8f64).ln() - (0.6f64).ln()) / 2.0).abs() < 1e-12, "{l}");
        assert!((l - 0.366985).abs() < 1e-6, "{l}");
        assert!(bce_loss(&[40.0, -40.0], &[1.0, 0.0]).unwrap() < 1e-10);
        assert_eq!(
            bce_loss(&[0.0], &[0.5]),
            Err(ModelError::NonBinaryTarget { index: 0, value: 0.5 })
        );
        assert!(bce_loss(&[1e300, -1e300], &[0.0, 1.0]).unwrap().is_finite());
    }
}
