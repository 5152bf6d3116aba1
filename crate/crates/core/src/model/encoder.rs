//! Forward and reverse passes of the encoder and head.
//!
//! Each layer computes, on the rows of `x` (start token first):
//!
//! ```text
//! h  = LN₁(x);   x' = x + MHA(h)·Wo + bo
//! h₂ = LN₂(x');  x'' = x' + GELU(h₂·W₁ + b₁)·W₂ + b₂
//! ```
//!
//! and the pooled output is `LN_f` applied to the start-token row of the
//! last layer. Sequences are processed one at a time without padding.

use super::head::{bce_loss, classify, sigmoid};
use super::{LayerParams, ModelError, ModelParams, Tensor};

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

/// A token sequence with its binary target vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub tokens: Vec<u32>,
    pub targets: Vec<f64>,
}

struct LnCache {
    xhat: Vec<f64>,
    rstd: Vec<f64>,
}

struct LayerCache {
    ln1: LnCache,
    h1: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// per head, n × n attention weights
    probs: Vec<f64>,
    ctx: Vec<f64>,
    ln2: LnCache,
    h2: Vec<f64>,
    u: Vec<f64>,
    f: Vec<f64>,
}

struct SeqCache {
    tokens: Vec<u32>,
    n: usize,
    layers: Vec<LayerCache>,
    lnf: LnCache,
    pooled: Vec<f64>,
}

/// `x·W + b` for `n` rows of `x`.
fn linear(x: &[f64], n: usize, w: &Tensor, b: &Tensor) -> Vec<f64> {
    let (k, m) = (w.rows, w.cols);
    let mut out = Vec::with_capacity(n * m);
    for i in 0..n {
        out.extend_from_slice(&b.data);
        let row = &mut out[i * m..(i + 1) * m];
        for (kk, &a) in x[i * k..(i + 1) * k].iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (o, wv) in row.iter_mut().zip(w.row(kk)) {
                *o += a * wv;
            }
        }
    }
    out
}

/// Accumulates `∂W += xᵀ·dy`, `∂b += Σ dy` and returns `dy·Wᵀ`. Zero rows
/// of `dy` are skipped.
fn linear_backward(x: &[f64], n: usize, w: &Tensor, dy: &[f64], gw: &mut Tensor, gb: &mut Tensor) -> Vec<f64> {
    let (k, m) = (w.rows, w.cols);
    let mut dx = vec![0.0; n * k];
    for i in 0..n {
        let dyr = &dy[i * m..(i + 1) * m];
        if dyr.iter().all(|&g| g == 0.0) {
            continue;
        }
        for (g, d) in gb.data.iter_mut().zip(dyr) {
            *g += d;
        }
        let xr = &x[i * k..(i + 1) * k];
        let dxr = &mut dx[i * k..(i + 1) * k];
        for kk in 0..k {
            let wr = w.row(kk);
            let a = xr[kk];
            let gwr = gw.row_mut(kk);
            let mut acc = 0.0;
            for j in 0..m {
                gwr[j] += a * dyr[j];
                acc += dyr[j] * wr[j];
            }
            dxr[kk] = acc;
        }
    }
    dx
}

fn layer_norm(x: &[f64], n: usize, gain: &Tensor, bias: &Tensor) -> (Vec<f64>, LnCache) {
    let d = gain.cols;
    let mut y = vec![0.0; n * d];
    let mut xhat = vec![0.0; n * d];
    let mut rstd = vec![0.0; n];
    for i in 0..n {
        let xr = &x[i * d..(i + 1) * d];
        let mean = xr.iter().sum::<f64>() / d as f64;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let r = 1.0 / (var + LN_EPS).sqrt();
        rstd[i] = r;
        for j in 0..d {
            let h = (xr[j] - mean) * r;
            xhat[i * d + j] = h;
            y[i * d + j] = gain.data[j] * h + bias.data[j];
        }
    }
    (y, LnCache { xhat, rstd })
}

fn layer_norm_backward(dy: &[f64], cache: &LnCache, gain: &Tensor, gg: &mut Tensor, gb: &mut Tensor) -> Vec<f64> {
    let d = gain.cols;
    let n = cache.rstd.len();
    let mut dx = vec![0.0; n * d];
    for i in 0..n {
        let dyr = &dy[i * d..(i + 1) * d];
        if dyr.iter().all(|&g| g == 0.0) {
            continue;
        }
        let xh = &cache.xhat[i * d..(i + 1) * d];
        let mut mean_g = 0.0;
        let mut mean_gx = 0.0;
        for j in 0..d {
            gg.data[j] += dyr[j] * xh[j];
            gb.data[j] += dyr[j];
            let g = dyr[j] * gain.data[j];
            mean_g += g;
            mean_gx += g * xh[j];
        }
        mean_g /= d as f64;
        mean_gx /= d as f64;
        for j in 0..d {
            let g = dyr[j] * gain.data[j];
            dx[i * d + j] = cache.rstd[i] * (g - mean_g - xh[j] * mean_gx);
        }
    }
    dx
}

fn gelu(u: f64) -> f64 {
    0.5 * u * (1.0 + (GELU_C * (u + 0.044715 * u * u * u)).tanh())
}

fn gelu_grad(u: f64) -> f64 {
    let t = (GELU_C * (u + 0.044715 * u * u * u)).tanh();
    0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * u * u)
}

fn check_tokens(params: &ModelParams, tokens: &[u32]) -> Result<(), ModelError> {
    if tokens.is_empty() {
        return Err(ModelError::EmptySequence);
    }
    let vocab_size = params.config.vocab_size;
    if let Some(&id) = tokens.iter().find(|&&t| t as usize >= vocab_size) {
        return Err(ModelError::TokenOutOfRange { id, vocab_size });
    }
    Ok(())
}

fn attention(layer: &LayerParams, h1: &[f64], n: usize, n_heads: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = layer.wq.cols;
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let q = linear(h1, n, &layer.wq, &layer.bq);
    let k = linear(h1, n, &layer.wk, &layer.bk);
    let v = linear(h1, n, &layer.wv, &layer.bv);
    let mut probs = vec![0.0; n_heads * n * n];
    let mut ctx = vec![0.0; n * d];
    for hd in 0..n_heads {
        let c0 = hd * dh;
        for i in 0..n {
            let qi = &q[i * d + c0..i * d + c0 + dh];
            let p = &mut probs[(hd * n + i) * n..(hd * n + i + 1) * n];
            let mut max = f64::NEG_INFINITY;
            for j in 0..n {
                let kj = &k[j * d + c0..j * d + c0 + dh];
                let s = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
                p[j] = s;
                max = max.max(s);
            }
            let mut total = 0.0;
            for pj in p.iter_mut() {
                *pj = (*pj - max).exp();
                total += *pj;
            }
            for pj in p.iter_mut() {
                *pj /= total;
            }
            let out = &mut ctx[i * d + c0..i * d + c0 + dh];
            for j in 0..n {
                let vj = &v[j * d + c0..j * d + c0 + dh];
                for (o, vv) in out.iter_mut().zip(vj) {
                    *o += p[j] * vv;
                }
            }
        }
    }
    (q, k, v, probs, ctx)
}

fn forward(params: &ModelParams, tokens: &[u32], max_len: usize) -> Result<SeqCache, ModelError> {
    check_tokens(params, tokens)?;
    let cfg = &params.config;
    if max_len > cfg.max_positions {
        return Err(ModelError::Shape(format!(
            "max_len {max_len} exceeds the {} learned positions",
            cfg.max_positions
        )));
    }
    let tokens: Vec<u32> = tokens[..tokens.len().min(max_len.max(1))].to_vec();
    let d = cfg.model_dim;
    let n = tokens.len() + 1;

    let mut x = Vec::with_capacity(n * d);
    x.extend_from_slice(&params.cls.data);
    for (pos, &t) in tokens.iter().enumerate() {
        let e = params.token_embedding.row(t as usize);
        let p = params.position_embedding.row(pos);
        x.extend(e.iter().zip(p).map(|(a, b)| a + b));
    }

    let mut caches = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let (h1, ln1) = layer_norm(&x, n, &layer.ln1_gain, &layer.ln1_bias);
        let (q, k, v, probs, ctx) = attention(layer, &h1, n, cfg.n_heads);
        let o = linear(&ctx, n, &layer.wo, &layer.bo);
        x.iter_mut().zip(&o).for_each(|(a, b)| *a += b);
        let (h2, ln2) = layer_norm(&x, n, &layer.ln2_gain, &layer.ln2_bias);
        let u = linear(&h2, n, &layer.w1, &layer.b1);
        let f: Vec<f64> = u.iter().map(|&z| gelu(z)).collect();
        let g = linear(&f, n, &layer.w2, &layer.b2);
        x.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        caches.push(LayerCache {
            ln1,
            h1,
            q,
            k,
            v,
            probs,
            ctx,
            ln2,
            h2,
            u,
            f,
        });
    }
    let (pooled, lnf) = layer_norm(&x[..d], 1, &params.final_gain, &params.final_bias);
    Ok(SeqCache {
        tokens,
        n,
        layers: caches,
        lnf,
        pooled,
    })
}

/// Pooled representation of `tokens`, truncated to `max_len`.
pub fn encode(params: &ModelParams, tokens: &[u32], max_len: usize) -> Result<Vec<f64>, ModelError> {
    Ok(forward(params, tokens, max_len)?.pooled)
}

pub fn forward_logits(params: &ModelParams, tokens: &[u32], max_len: usize) -> Result<Vec<f64>, ModelError> {
    let a = encode(params, tokens, max_len)?;
    Ok(classify(&a, &params.head)?.0)
}

/// Mean loss over a batch.
pub fn batch_loss(params: &ModelParams, batch: &[Example], max_len: usize) -> Result<f64, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::Shape("empty batch".into()));
    }
    let mut total = 0.0;
    for ex in batch {
        total += bce_loss(&forward_logits(params, &ex.tokens, max_len)?, &ex.targets)?;
    }
    Ok(total / batch.len() as f64)
}

fn attention_backward(
    layer: &LayerParams,
    cache: &LayerCache,
    dctx: &[f64],
    n: usize,
    n_heads: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = layer.wq.cols;
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let (q, k, v) = (&cache.q, &cache.k, &cache.v);
    let mut dq = vec![0.0; n * d];
    let mut dk = vec![0.0; n * d];
    let mut dv = vec![0.0; n * d];
    let mut dp = vec![0.0; n];
    for hd in 0..n_heads {
        let c0 = hd * dh;
        for i in 0..n {
            let dci = &dctx[i * d + c0..i * d + c0 + dh];
            if dci.iter().all(|&g| g == 0.0) {
                continue;
            }
            let p = &cache.probs[(hd * n + i) * n..(hd * n + i + 1) * n];
            let mut weighted = 0.0;
            for j in 0..n {
                let vj = &v[j * d + c0..j * d + c0 + dh];
                dp[j] = dci.iter().zip(vj).map(|(a, b)| a * b).sum();
                weighted += p[j] * dp[j];
                let dvj = &mut dv[j * d + c0..j * d + c0 + dh];
                for (o, g) in dvj.iter_mut().zip(dci) {
                    *o += p[j] * g;
                }
            }
            let qi: Vec<f64> = q[i * d + c0..i * d + c0 + dh].to_vec();
            for j in 0..n {
                let ds = p[j] * (dp[j] - weighted) * scale;
                if ds == 0.0 {
                    continue;
                }
                let kj = &k[j * d + c0..j * d + c0 + dh];
                let dqi = &mut dq[i * d + c0..i * d + c0 + dh];
                for (o, kv) in dqi.iter_mut().zip(kj) {
                    *o += ds * kv;
                }
                let dkj = &mut dk[j * d + c0..j * d + c0 + dh];
                for (o, qv) in dkj.iter_mut().zip(&qi) {
                    *o += ds * qv;
                }
            }
        }
    }
    (dq, dk, dv)
}

/// Adds one example's contribution given the gradient of its logits.
fn backward_one(params: &ModelParams, cache: &SeqCache, dlogits: &[f64], grads: &mut ModelParams) {
    let d = params.config.model_dim;
    let n = cache.n;
    let n_heads = params.config.n_heads;

    // head
    let a = &cache.pooled;
    let mut da = vec![0.0; d];
    for i in 0..d {
        let wr = params.head.w.row(i);
        let gr = grads.head.w.row_mut(i);
        let mut acc = 0.0;
        for (j, &g) in dlogits.iter().enumerate() {
            gr[j] += a[i] * g;
            acc += wr[j] * g;
        }
        da[i] = acc;
    }
    for (gb, g) in grads.head.b.data.iter_mut().zip(dlogits) {
        *gb += g;
    }

    let dx0 = layer_norm_backward(&da, &cache.lnf, &params.final_gain, &mut grads.final_gain, &mut grads.final_bias);
    let mut dx = vec![0.0; n * d];
    dx[..d].copy_from_slice(&dx0);

    for (li, layer) in params.layers.iter().enumerate().rev() {
        let lc = &cache.layers[li];
        let gl = &mut grads.layers[li];
        // feed-forward block
        let df = linear_backward(&lc.f, n, &layer.w2, &dx, &mut gl.w2, &mut gl.b2);
        let du: Vec<f64> = df.iter().zip(&lc.u).map(|(g, &u)| g * gelu_grad(u)).collect();
        let dh2 = linear_backward(&lc.h2, n, &layer.w1, &du, &mut gl.w1, &mut gl.b1);
        let dmid = layer_norm_backward(&dh2, &lc.ln2, &layer.ln2_gain, &mut gl.ln2_gain, &mut gl.ln2_bias);
        dx.iter_mut().zip(&dmid).for_each(|(a, b)| *a += b);
        // attention block
        let dctx = linear_backward(&lc.ctx, n, &layer.wo, &dx, &mut gl.wo, &mut gl.bo);
        let (dq, dk, dv) = attention_backward(layer, lc, &dctx, n, n_heads);
        let mut dh1 = linear_backward(&lc.h1, n, &layer.wq, &dq, &mut gl.wq, &mut gl.bq);
        let dk_in = linear_backward(&lc.h1, n, &layer.wk, &dk, &mut gl.wk, &mut gl.bk);
        let dv_in = linear_backward(&lc.h1, n, &layer.wv, &dv, &mut gl.wv, &mut gl.bv);
        for ((a, b), c) in dh1.iter_mut().zip(&dk_in).zip(&dv_in) {
            *a += b + c;
        }
        let din = layer_norm_backward(&dh1, &lc.ln1, &layer.ln1_gain, &mut gl.ln1_gain, &mut gl.ln1_bias);
        dx.iter_mut().zip(&din).for_each(|(a, b)| *a += b);
    }

    for (j, g) in grads.cls.data.iter_mut().enumerate() {
        *g += dx[j];
    }
    for (pos, &t) in cache.tokens.iter().enumerate() {
        let row = &dx[(pos + 1) * d..(pos + 2) * d];
        for (g, v) in grads.token_embedding.row_mut(t as usize).iter_mut().zip(row) {
            *g += v;
        }
        for (g, v) in grads.position_embedding.row_mut(pos).iter_mut().zip(row) {
            *g += v;
        }
    }
}

/// Mean batch loss and its exact gradient with respect to every parameter.
pub fn backward(params: &ModelParams, batch: &[Example], max_len: usize) -> Result<(f64, ModelParams), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::Shape("empty batch".into()));
    }
    let mut grads = params.zeros_like();
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for ex in batch {
        let cache = forward(params, &ex.tokens, max_len)?;
        let (logits, _) = classify(&cache.pooled, &params.head)?;
        total += bce_loss(&logits, &ex.targets)?;
        let c = logits.len() as f64;
        let dlogits: Vec<f64> = logits
            .iter()
            .zip(&ex.targets)
            .map(|(&z, &y)| (sigmoid(z) - y) / c * scale)
            .collect();
        backward_one(params, &cache, &dlogits, &mut grads);
    }
    Ok((total * scale, grads))
}
