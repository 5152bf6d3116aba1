//! Truncated SVD by seeded subspace iteration.
//!
//! A random block is repeatedly multiplied by `MᵀM` and re-orthonormalized
//! with twice-applied modified Gram–Schmidt. Once the block has converged,
//! the Ritz step runs a one-sided Jacobi SVD on `M·Q`, which keeps small
//! singular values accurate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dot, DenseMatrix, NumError};

const MAX_SUBSPACE_ITERS: usize = 2000;
const JACOBI_MAX_SWEEPS: usize = 80;

#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    /// rows × k, orthonormal columns
    pub u: DenseMatrix,
    /// k values, non-negative and non-increasing
    pub singular_values: Vec<f64>,
    /// cols × k, orthonormal columns
    pub v: DenseMatrix,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `U·diag(σ)·Vᵀ`
    pub fn reconstruct(&self) -> DenseMatrix {
        let (rows, cols, k) = (self.u.rows(), self.v.rows(), self.rank());
        let mut out = DenseMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let v: f64 = (0..k)
                    .map(|j| self.u.get(r, j) * self.singular_values[j] * self.v.get(c, j))
                    .sum();
                out.set(r, c, v);
            }
        }
        out
    }
}

/// Top-`k` singular triplets of `m`, deterministic for a given `seed`.
pub fn truncated_svd(m: &DenseMatrix, k: usize, seed: u64) -> Result<SvdResult, NumError> {
    let max = m.rows().min(m.cols());
    if k == 0 || k > max {
        return Err(NumError::RankOutOfRange { k, max });
    }
    if m.rows() >= m.cols() {
        let (u, s, v) = svd_tall(m, k, seed);
        Ok(assemble(u, s, v, m.rows(), m.cols()))
    } else {
        let (v, s, u) = svd_tall(&m.transpose(), k, seed);
        Ok(assemble(u, s, v, m.rows(), m.cols()))
    }
}

/// Projects each row onto the top-`k` right singular vectors: `U·diag(σ)`.
pub fn reduce_rows(m: &DenseMatrix, k: usize, seed: u64) -> Result<DenseMatrix, NumError> {
    let svd = truncated_svd(m, k, seed)?;
    let mut out = DenseMatrix::zeros(m.rows(), k);
    for r in 0..m.rows() {
        for j in 0..k {
            out.set(r, j, svd.u.get(r, j) * svd.singular_values[j]);
        }
    }
    Ok(out)
}

fn assemble(u: Vec<Vec<f64>>, s: Vec<f64>, v: Vec<Vec<f64>>, rows: usize, cols: usize) -> SvdResult {
    let k = s.len();
    let mut um = DenseMatrix::zeros(rows, k);
    let mut vm = DenseMatrix::zeros(cols, k);
    for j in 0..k {
        for r in 0..rows {
            um.set(r, j, u[j][r]);
        }
        for c in 0..cols {
            vm.set(c, j, v[j][c]);
        }
    }
    SvdResult {
        u: um,
        singular_values: s,
        v: vm,
    }
}

fn mat_vec(m: &DenseMatrix, x: &[f64]) -> Vec<f64> {
    (0..m.rows()).map(|r| dot(m.row(r), x)).collect()
}

fn mat_t_vec(m: &DenseMatrix, y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for (r, &yr) in y.iter().enumerate() {
        if yr == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(m.row(r)) {
            *o += yr * a;
        }
    }
    out
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Orthonormalizes `cols` in place. Columns that collapse are replaced by
/// fresh random vectors so the block keeps its width.
fn orthonormalize(cols: &mut [Vec<f64>], rng: &mut ChaCha8Rng) {
    for j in 0..cols.len() {
        let mut attempts = 0;
        loop {
            let before = norm(&cols[j]);
            for _ in 0..2 {
                for i in 0..j {
                    let proj = dot(&cols[i], &cols[j]);
                    let (head, tail) = cols.split_at_mut(j);
                    for (x, q) in tail[0].iter_mut().zip(&head[i]) {
                        *x -= proj * q;
                    }
                }
            }
            let after = norm(&cols[j]);
            if after > 1e-10 * before.max(f64::MIN_POSITIVE) && after > 1e-300 {
                cols[j].iter_mut().for_each(|x| *x /= after);
                break;
            }
            attempts += 1;
            assert!(attempts < 100, "cannot complete orthonormal basis");
            cols[j] = random_vec(cols[j].len(), rng);
        }
    }
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// One-sided Jacobi: rotates columns of `b` (and the same rotations into `w`)
/// until they are mutually orthogonal.
fn one_sided_jacobi(b: &mut [Vec<f64>], w: &mut [Vec<f64>]) {
    let n = b.len();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&b[p], &b[p]);
                let beta = dot(&b[q], &b[q]);
                let gamma = dot(&b[p], &b[q]);
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(b, p, q, c, s);
                rotate(w, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    for (xp, xq) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
        let (a, b) = (*xp, *xq);
        *xp = c * a - s * b;
        *xq = s * a + c * b;
    }
}

/// Ritz step: singular values of `M·Q` in descending order with right
/// vectors expressed in the original coordinates.
fn ritz(m: &DenseMatrix, q: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>) {
    let width = q.len();
    let mut b: Vec<Vec<f64>> = q.iter().map(|col| mat_vec(m, col)).collect();
    let mut w: Vec<Vec<f64>> = (0..width)
        .map(|j| {
            let mut e = vec![0.0; width];
            e[j] = 1.0;
            e
        })
        .collect();
    one_sided_jacobi(&mut b, &mut w);
    let mut order: Vec<usize> = (0..width).collect();
    let sig: Vec<f64> = b.iter().map(|col| norm(col)).collect();
    order.sort_by(|&i, &j| sig[j].total_cmp(&sig[i]).then(i.cmp(&j)));
    let n = m.cols();
    let mut us = Vec::with_capacity(width);
    let mut ss = Vec::with_capacity(width);
    let mut vs = Vec::with_capacity(width);
    for &j in &order {
        let mut v = vec![0.0; n];
        for (l, ql) in q.iter().enumerate() {
            let coef = w[j][l];
            for (x, y) in v.iter_mut().zip(ql) {
                *x += coef * y;
            }
        }
        us.push(b[j].clone());
        ss.push(sig[j]);
        vs.push(v);
    }
    (us, ss, vs)
}

/// SVD of a matrix with rows ≥ cols. Returns columns of U, σ, columns of V.
fn svd_tall(m: &DenseMatrix, k: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>) {
    let n = m.cols();
    let width = n.min((2 * k).max(k + 10));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<Vec<f64>> = (0..width).map(|_| random_vec(n, &mut rng)).collect();
    orthonormalize(&mut q, &mut rng);

    if width < n {
        let mut prev: Option<Vec<f64>> = None;
        for iter in 0..MAX_SUBSPACE_ITERS {
            for col in q.iter_mut() {
                let y = mat_vec(m, col);
                *col = mat_t_vec(m, &y);
            }
            orthonormalize(&mut q, &mut rng);
            if iter % 4 == 3 {
                let (_, s, _) = ritz(m, &q);
                let top: Vec<f64> = s[..k].to_vec();
                if let Some(p) = &prev {
                    let scale = top[0].max(f64::MIN_POSITIVE);
                    let delta = top.iter().zip(p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    if delta <= 1e-15 * scale {
                        break;
                    }
                }
                prev = Some(top);
            }
        }
    }

    let (b, s, vs) = ritz(m, &q);
    let sigma_max = s.first().copied().unwrap_or(0.0);
    let mut us: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut sv = Vec::with_capacity(k);
    let mut vv = Vec::with_capacity(k);
    for j in 0..k {
        let sigma = s[j];
        let mut v = vs[j].clone();
        let mut u = if sigma > 1e-14 * sigma_max && sigma > 0.0 {
            b[j].iter().map(|x| x / sigma).collect()
        } else {
            random_vec(m.rows(), &mut rng)
        };
        // deterministic sign: largest |v| entry positive
        let pivot = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
            u.iter_mut().for_each(|x| *x = -*x);
        }
        us.push(u);
        sv.push(if sigma > 1e-14 * sigma_max { sigma } else { 0.0 });
        vv.push(v);
    }
    // complete U where σ vanished
    for j in 0..k {
        if sv[j] == 0.0 {
            let mut block: Vec<Vec<f64>> = us[..=j].to_vec();
            orthonormalize(&mut block, &mut rng);
            us[j] = block.pop().unwrap();
        }
    }
    (us, sv, vv)
}
