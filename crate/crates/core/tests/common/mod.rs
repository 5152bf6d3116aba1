//! Independent reference implementations shared by the integration tests
//! and the acceptance runner.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use ementa::corpus::SyntheticCorpus;
use ementa::model::{batch_loss, Example, ModelParams};
use ementa::taxonomy::{adjusted_rand_index, CategoryHierarchy};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Brute-force metric values in `MetricsReport::values` order, computed
/// from label sets rather than confusion cells.
pub fn brute_force_metrics(gold: &[Vec<bool>], pred: &[Vec<bool>]) -> [f64; 11] {
    let n_docs = gold.len();
    let n_labels = gold.first().map_or(0, Vec::len);
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let f = |p: f64, r: f64| div(2.0 * p * r, p + r);
    let set = |row: &Vec<bool>| -> BTreeSet<usize> { (0..row.len()).filter(|&i| row[i]).collect() };

    let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
    for d in 0..n_docs {
        let g = set(&gold[d]);
        let p = set(&pred[d]);
        tp += g.intersection(&p).count() as f64;
        fp += p.difference(&g).count() as f64;
        fn_ += g.difference(&p).count() as f64;
    }
    let micro_p = div(tp, tp + fp);
    let micro_r = div(tp, tp + fn_);

    let mut macro_ = [0.0; 3];
    for l in 0..n_labels {
        let g: BTreeSet<usize> = (0..n_docs).filter(|&d| gold[d][l]).collect();
        let p: BTreeSet<usize> = (0..n_docs).filter(|&d| pred[d][l]).collect();
        let both = g.intersection(&p).count() as f64;
        let pl = div(both, p.len() as f64);
        let rl = div(both, g.len() as f64);
        macro_[0] += pl / n_labels as f64;
        macro_[1] += rl / n_labels as f64;
        macro_[2] += f(pl, rl) / n_labels as f64;
    }

    let mut inst = [0.0; 3];
    let (mut agree, mut exact) = (0usize, 0usize);
    for d in 0..n_docs {
        let g = set(&gold[d]);
        let p = set(&pred[d]);
        let both = g.intersection(&p).count() as f64;
        let pi = div(both, p.len() as f64);
        let ri = div(both, g.len() as f64);
        inst[0] += pi / n_docs as f64;
        inst[1] += ri / n_docs as f64;
        inst[2] += f(pi, ri) / n_docs as f64;
        agree += (0..n_labels).filter(|&l| gold[d][l] == pred[d][l]).count();
        exact += usize::from(g == p);
    }
    [
        micro_p,
        micro_r,
        f(micro_p, micro_r),
        macro_[0],
        macro_[1],
        macro_[2],
        inst[0],
        inst[1],
        inst[2],
        div(agree as f64, (n_docs * n_labels) as f64),
        div(exact as f64, n_docs as f64),
    ]
}

/// A random binary matrix pair of up to `max_docs × max_labels`, with a
/// density drawn per instance so that empty and full rows both occur.
pub fn random_pair(rng: &mut ChaCha8Rng, max_docs: usize, max_labels: usize) -> (Vec<Vec<bool>>, Vec<Vec<bool>>) {
    let n = rng.random_range(1..=max_docs);
    let m = rng.random_range(1..=max_labels);
    let dens_g: f64 = rng.random();
    let dens_p: f64 = rng.random();
    let mut mat = |d: f64| -> Vec<Vec<bool>> { (0..n).map(|_| (0..m).map(|_| rng.random_bool(d)).collect()).collect() };
    let g = mat(dens_g);
    let p = mat(dens_p);
    (g, p)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn tensor(t: &ementa::model::Tensor) -> DMatrix<f64> {
    DMatrix::from_row_slice(t.rows, t.cols, &t.data)
}

fn layer_norm(x: &DMatrix<f64>, gain: &DMatrix<f64>, bias: &DMatrix<f64>) -> DMatrix<f64> {
    let mut y = x.clone();
    for mut row in y.row_iter_mut() {
        let mean = row.mean();
        let var = row.map(|v| (v - mean).powi(2)).mean();
        let r = 1.0 / (var + 1e-5).sqrt();
        for (j, v) in row.iter_mut().enumerate() {
            *v = gain[(0, j)] * (*v - mean) * r + bias[(0, j)];
        }
    }
    y
}

fn affine(x: &DMatrix<f64>, w: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut y = x * w;
    for mut row in y.row_iter_mut() {
        row += b.row(0);
    }
    y
}

fn gelu(z: f64) -> f64 {
    0.5 * z * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (z + 0.044715 * z.powi(3))).tanh())
}

fn softmax_rows(mut s: DMatrix<f64>) -> DMatrix<f64> {
    for mut row in s.row_iter_mut() {
        let max = row.max();
        row.apply(|v| *v = (*v - max).exp());
        let total = row.sum();
        row /= total;
    }
    s
}

/// Logits of a pre-norm encoder written with dense matrix algebra.
pub fn oracle_logits(params: &ModelParams, tokens: &[u32], max_len: usize) -> Vec<f64> {
    let cfg = &params.config;
    let d = cfg.model_dim;
    let tokens = &tokens[..tokens.len().min(max_len)];
    let n = tokens.len() + 1;
    let emb = tensor(&params.token_embedding);
    let pos = tensor(&params.position_embedding);
    let mut x = DMatrix::zeros(n, d);
    x.row_mut(0).copy_from(&tensor(&params.cls).row(0));
    for (i, &t) in tokens.iter().enumerate() {
        let r = emb.row(t as usize) + pos.row(i);
        x.row_mut(i + 1).copy_from(&r);
    }
    let dh = d / cfg.n_heads;
    for l in &params.layers {
        let h = layer_norm(&x, &tensor(&l.ln1_gain), &tensor(&l.ln1_bias));
        let q = affine(&h, &tensor(&l.wq), &tensor(&l.bq));
        let k = affine(&h, &tensor(&l.wk), &tensor(&l.bk));
        let v = affine(&h, &tensor(&l.wv), &tensor(&l.bv));
        let mut ctx = DMatrix::zeros(n, d);
        for hd in 0..cfg.n_heads {
            let qh = q.columns(hd * dh, dh);
            let kh = k.columns(hd * dh, dh);
            let vh = v.columns(hd * dh, dh);
            let a = softmax_rows(qh * kh.transpose() / (dh as f64).sqrt());
            ctx.columns_mut(hd * dh, dh).copy_from(&(a * vh));
        }
        x += affine(&ctx, &tensor(&l.wo), &tensor(&l.bo));
        let h2 = layer_norm(&x, &tensor(&l.ln2_gain), &tensor(&l.ln2_bias));
        let u = affine(&h2, &tensor(&l.w1), &tensor(&l.b1)).map(gelu);
        x += affine(&u, &tensor(&l.w2), &tensor(&l.b2));
    }
    let cls = DMatrix::from_row_slice(1, d, x.row(0).transpose().as_slice());
    let a = layer_norm(&cls, &tensor(&params.final_gain), &tensor(&params.final_bias));
    affine(&a, &tensor(&params.head.w), &tensor(&params.head.b)).row(0).iter().copied().collect()
}

/// Per-tensor relative error `‖a − n‖ / max(‖a‖ + ‖n‖, 1e-6)` between the
/// analytic gradient and central differences with step `h`.
pub fn gradient_errors(
    params: &ModelParams,
    grads: &ModelParams,
    batch: &[Example],
    max_len: usize,
    h: f64,
) -> Vec<(String, f64)> {
    let mut work = params.clone();
    let analytic: Vec<(String, Vec<f64>)> = grads.tensors().into_iter().map(|(n, _, t)| (n, t.data.clone())).collect();
    let mut out = Vec::new();
    for (ti, (name, a)) in analytic.iter().enumerate() {
        let mut numeric = vec![0.0; a.len()];
        for (j, g) in numeric.iter_mut().enumerate() {
            let orig = work.tensors_mut()[ti].1.data[j];
            work.tensors_mut()[ti].1.data[j] = orig + h;
            let up = batch_loss(&work, batch, max_len).unwrap();
            work.tensors_mut()[ti].1.data[j] = orig - h;
            let down = batch_loss(&work, batch, max_len).unwrap();
            work.tensors_mut()[ti].1.data[j] = orig;
            *g = (up - down) / (2.0 * h);
        }
        let diff: f64 = a.iter().zip(&numeric).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nn: f64 = numeric.iter().map(|x| x * x).sum::<f64>().sqrt();
        out.push((name.clone(), diff / (na + nn).max(1e-6)));
    }
    out
}

/// Symmetric-eigensolver singular values of `m`, descending.
pub fn oracle_singular_values(rows: usize, cols: usize, data: &[f64]) -> Vec<f64> {
    let m = DMatrix::from_row_slice(rows, cols, data);
    let gram = if rows >= cols { m.transpose() * &m } else { &m * m.transpose() };
    let eig = gram.symmetric_eigen();
    let mut s: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(0.0).sqrt()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Projector onto the span of the top-`k` right singular vectors, from the
/// eigenvectors of `MᵀM`.
pub fn oracle_right_projector(rows: usize, cols: usize, data: &[f64], k: usize) -> DMatrix<f64> {
    let m = DMatrix::from_row_slice(rows, cols, data);
    let eig = (m.transpose() * &m).symmetric_eigen();
    let mut idx: Vec<usize> = (0..cols).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut p = DMatrix::zeros(cols, cols);
    for &i in &idx[..k] {
        let v = eig.eigenvectors.column(i);
        p += v * v.transpose();
    }
    p
}

/// ARI between planted topics and assigned super-categories over the
/// clustered concepts that carry a planted topic.
pub fn planted_ari(h: &CategoryHierarchy, s: &SyntheticCorpus) -> f64 {
    let ids: BTreeMap<&str, usize> = h.supercategories().iter().enumerate().map(|(i, n)| (n.name.as_str(), i)).collect();
    let (mut truth, mut found) = (Vec::new(), Vec::new());
    for n in h.top_terms() {
        if let (Some(&t), Some(p)) = (s.truth.concept_topics.get(&n.name), h.parent(&n.name)) {
            truth.push(t);
            found.push(ids[p]);
        }
    }
    adjusted_rand_index(&truth, &found)
}
