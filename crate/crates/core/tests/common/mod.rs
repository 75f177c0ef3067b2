//! Test oracles shared by integration tests. Independent of the library's
//! solver and geometry code: plain `Vec<f64>` arithmetic only.

#![allow(dead_code)]

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `B^T B` for a `d x n` Gaussian `B`, row-major `n x n`.
pub fn random_psd(n: usize, d: usize, seed: u64) -> Vec<f64> {
    let mut g = rng(seed);
    let b: Vec<f64> = (0..d * n).map(|_| g.sample(StandardNormal)).collect();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            k[i * n + j] = (0..d).map(|t| b[t * n + i] * b[t * n + j]).sum();
        }
    }
    k
}

pub fn to_mat(k: &[f64], n: usize) -> Mat<f64> {
    Mat::from_fn(n, n, |i, j| k[i * n + j])
}

/// `1 / max_j ||K e_j||_2` for a symmetric row-major `K`.
pub fn critical_lambda(k: &[f64], n: usize) -> f64 {
    let max = (0..n)
        .map(|j| (0..n).map(|i| k[i * n + j].powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    1.0 / max
}

/// `(lambda/2) tr(R^T K R - 2 K R) + sum_i ||row_i R||` for row-major `R`.
pub fn full_objective(k: &[f64], r: &[f64], n: usize, lambda: f64) -> f64 {
    let kr = matmul(k, r, n);
    let mut quad = 0.0;
    let mut lin = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += r[i * n + j] * kr[i * n + j];
        }
        lin += kr[i * n + i];
    }
    let groups: f64 = (0..n)
        .map(|i| r[i * n..(i + 1) * n].iter().map(|x| x * x).sum::<f64>().sqrt())
        .sum();
    0.5 * lambda * (quad - 2.0 * lin) + groups
}

fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for t in 0..n {
            let a_it = a[i * n + t];
            if a_it == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += a_it * b[t * n + j];
            }
        }
    }
    c
}

fn prox_rows(v: &mut [f64], n: usize, thresh: f64) {
    for row in v.chunks_mut(n) {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = if norm > thresh { 1.0 - thresh / norm } else { 0.0 };
        row.iter_mut().for_each(|x| *x *= scale);
    }
}

/// Largest eigenvalue bound by power iteration, padded by 1%.
fn lipschitz(k: &[f64], n: usize) -> f64 {
    let mut v = vec![1.0; n];
    let mut est = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| k[i * n + j] * v[j]).sum()).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 1.0;
        }
        est = norm;
        v = w.into_iter().map(|x| x / norm).collect();
    }
    est * 1.01
}

pub struct OracleSolution {
    pub r: Vec<f64>,
    pub objective: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Accelerated proximal gradient with gradient-based adaptive restart on the
/// full problem. Stops when the fixed-point residual
/// `||prox(Y - grad/L) - Y||_F` drops below `tol`.
pub fn proximal_gradient(k: &[f64], n: usize, lambda: f64, tol: f64) -> OracleSolution {
    let l = lambda * lipschitz(k, n);
    let step = 1.0 / l;
    let mut x = vec![0.0; n * n];
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < 2_000_000 && residual > tol {
        iterations += 1;
        // grad = lambda (K Y - K)
        let ky = matmul(k, &y, n);
        let mut next: Vec<f64> = (0..n * n).map(|p| y[p] - step * lambda * (ky[p] - k[p])).collect();
        prox_rows(&mut next, n, step);
        residual = next.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let uphill: f64 = (0..n * n).map(|p| (y[p] - next[p]) * (next[p] - x[p])).sum();
        if uphill > 0.0 {
            t = 1.0;
            y.clone_from(&next);
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            y = (0..n * n).map(|p| next[p] + beta * (next[p] - x[p])).collect();
            t = t_next;
        }
        x = next;
    }
    let objective = full_objective(k, &x, n, lambda);
    OracleSolution { r: x, objective, residual, iterations }
}

/// Strict hull vertices by brute force: a point is a vertex unless it lies in
/// the closed triangle of three other distinct points or strictly between two
/// others. Exact on small integer coordinates.
pub fn brute_hull_vertices(points: &[[i64; 2]]) -> Vec<usize> {
    let cross = |o: [i64; 2], a: [i64; 2], b: [i64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let n = points.len();
    let mut out = Vec::new();
    'outer: for p in 0..n {
        let x = points[p];
        let others: Vec<[i64; 2]> = {
            let mut v: Vec<[i64; 2]> = points.iter().copied().filter(|&q| q != x).collect();
            v.sort();
            v.dedup();
            v
        };
        for a in 0..others.len() {
            for b in a + 1..others.len() {
                let (pa, pb) = (others[a], others[b]);
                if cross(pa, pb, x) == 0 {
                    let within = |lo: i64, hi: i64, v: i64| lo.min(hi) <= v && v <= lo.max(hi);
                    if within(pa[0], pb[0], x[0]) && within(pa[1], pb[1], x[1]) {
                        continue 'outer;
                    }
                }
                for c in b + 1..others.len() {
                    let pc = others[c];
                    let d1 = cross(pa, pb, x);
                    let d2 = cross(pb, pc, x);
                    let d3 = cross(pc, pa, x);
                    let neg = d1 < 0 || d2 < 0 || d3 < 0;
                    let pos = d1 > 0 || d2 > 0 || d3 > 0;
                    if cross(pa, pb, pc) != 0 && !(neg && pos) {
                        continue 'outer;
                    }
                }
            }
        }
        out.push(p);
    }
    out
}
