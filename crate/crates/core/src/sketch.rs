//! Randomized column sketching with adaptive refinement.
//!
//! The quadratic program is solved with only `r` random samples as
//! candidate representatives. After each solve the misrepresentation error of
//! every sample is computed, and the `r_hat` worst-represented samples not yet
//! in the sketch are added before the next solve.
//!
//! The sketch is kept as an index list; `K_s` and `K_c` are index-sliced
//! copies of the full kernel.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::par;
use crate::solver::{self, RepresentationMatrix, SolveDiagnostics, SolverConfig};

/// Identifier of the sampling procedure in [`random_sketch`]. Bump it if the
/// generator or the draw order ever changes.
pub const SKETCH_ALGORITHM: &str = "chacha8-shuffle-prefix-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchConfig {
    pub r: usize,
    pub r_hat: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl SketchConfig {
    /// `r = min(n, max(100, ceil(0.05 n)))`, `r_hat = ceil(0.1 r)`, three
    /// iterations.
    pub fn default_for(n: usize, seed: u64) -> Self {
        let r = n.min(100.max(n.div_ceil(20)));
        Self {
            r,
            r_hat: r.div_ceil(10),
            iterations: 3,
            seed,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.r == 0 {
            return Err(Error::param("r", "must be >= 1"));
        }
        if self.r > n {
            return Err(Error::param("r", format!("{} exceeds the {n} samples", self.r)));
        }
        if self.iterations == 0 {
            return Err(Error::param("iterations", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchIteration {
    pub iteration: usize,
    pub sketch_size: usize,
    pub objective: f64,
    pub solver_iterations: usize,
    pub converged: bool,
    pub added: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SketchState {
    pub sampled_indices: Vec<usize>,
    /// Misrepresentation error of every sample under the latest solve.
    pub errors: Vec<f64>,
    pub history: Vec<SketchIteration>,
    pub warnings: Vec<String>,
}

// Unbiased integer in [0, bound) via Lemire's widening multiply with rejection.
fn uniform_below(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let threshold = bound.wrapping_neg() % bound;
    loop {
        let m = (rng.next_u64() as u128) * (bound as u128);
        if (m as u64) >= threshold {
            return (m >> 64) as u64;
        }
    }
}

/// `r` distinct indices from `0..n`, uniformly without replacement: the
/// first `r` positions of a Fisher-Yates shuffle driven by ChaCha8 seeded
/// with `seed`.
pub fn random_sketch(n: usize, r: usize, seed: u64) -> Result<Vec<usize>> {
    if r == 0 || r > n {
        return Err(Error::param("r", format!("need 1 <= r <= n, got r = {r}, n = {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in 0..r {
        let j = i + uniform_below(&mut rng, (n - i) as u64) as usize;
        perm.swap(i, j);
    }
    perm.truncate(r);
    Ok(perm)
}

fn check_indices(n: usize, indices: &[usize]) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in indices {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::DuplicateIndex(i));
        }
    }
    Ok(())
}

/// `(K_s, K_c)` with `K_s[a][b] = K[idx_a][idx_b]` and `K_c[i][b] = K[i][idx_b]`.
pub fn slice_kernel(kernel: &KernelMatrix, indices: &[usize]) -> Result<(Mat<f64>, Mat<f64>)> {
    let n = kernel.n();
    check_indices(n, indices)?;
    if indices.is_empty() {
        return Err(Error::Empty("sketch has no indices"));
    }
    let k = kernel.values();
    let r = indices.len();
    let k_s = Mat::from_fn(r, r, |a, b| k[(indices[a], indices[b])]);
    let k_c = Mat::from_fn(n, r, |i, b| k[(i, indices[b])]);
    Ok((k_s, k_c))
}

/// Squared feature-space distance between each sample and its
/// reconstruction from the candidates of `rep`:
/// `e_j = k_jj - 2 K_c[j,:] r_j + r_j^T K_s r_j`, with `r_j` column `j`.
/// Tiny negative round-off is clamped to zero.
pub fn misrepresentation_errors(
    kernel: &KernelMatrix,
    rep: &RepresentationMatrix,
) -> Result<Vec<f64>> {
    let n = kernel.n();
    if rep.ncols() != n {
        return Err(Error::ShapeMismatch(format!(
            "representation has {} columns, kernel has {n} samples",
            rep.ncols()
        )));
    }
    let idx = rep.candidate_indices();
    let (k_s, k_c) = slice_kernel(kernel, idx)?;
    let r = idx.len();
    // column j of R is row j of this n x r view
    let rt = MatRef::from_column_major_slice(rep.as_slice(), n, r);
    let mut rt_ks = Mat::<f64>::zeros(n, r);
    matmul(rt_ks.as_mut(), Accum::Replace, rt, k_s.as_ref(), 1.0, par::faer_par());
    let errors = par::map_range(n, |j| {
        let mut cross = 0.0;
        let mut quad = 0.0;
        for b in 0..r {
            let coef = rt[(j, b)];
            cross += k_c[(j, b)] * coef;
            quad += rt_ks[(j, b)] * coef;
        }
        (kernel.diag(j) - 2.0 * cross + quad).max(0.0)
    });
    Ok(errors)
}

/// Appends the `r_hat` unsampled samples with the largest current errors
/// (ties by ascending index) and returns them. Caps at the number of
/// unsampled samples, recording a warning.
pub fn refine(state: &mut SketchState, r_hat: usize) -> Vec<usize> {
    let n = state.errors.len();
    let mut in_sketch = vec![false; n];
    for &i in &state.sampled_indices {
        if i < n {
            in_sketch[i] = true;
        }
    }
    let mut pool: Vec<usize> = (0..n).filter(|&i| !in_sketch[i]).collect();
    if r_hat > pool.len() {
        state.warnings.push(format!(
            "requested {r_hat} refinement samples but only {} remain unsampled",
            pool.len()
        ));
    }
    pool.sort_by(|&a, &b| state.errors[b].total_cmp(&state.errors[a]).then(a.cmp(&b)));
    pool.truncate(r_hat);
    state.sampled_indices.extend_from_slice(&pool);
    pool
}

#[derive(Debug, Clone)]
pub struct SketchOutcome {
    /// Solution over the final sketch; candidate indices are the sketch.
    pub representation: RepresentationMatrix,
    pub state: SketchState,
    pub diagnostics: SolveDiagnostics,
}

/// Solve, score, refine; `iterations` solves with a refinement between
/// consecutive solves. Stops early once a refinement adds nothing, since the
/// next solve would repeat the last one.
pub fn solve_sketched(
    kernel: &KernelMatrix,
    sketch: &SketchConfig,
    solver_config: &SolverConfig,
) -> Result<SketchOutcome> {
    let n = kernel.n();
    sketch.validate(n)?;
    solver_config.validate()?;
    let mut state = SketchState {
        sampled_indices: random_sketch(n, sketch.r, sketch.seed)?,
        ..Default::default()
    };
    let mut last: Option<(RepresentationMatrix, SolveDiagnostics)> = None;
    for it in 1..=sketch.iterations {
        let (k_s, k_c) = slice_kernel(kernel, &state.sampled_indices)?;
        let (rep, diag) = solver::solve(k_s.as_ref(), k_c.as_ref(), solver_config)?;
        let rep = rep.with_candidates(state.sampled_indices.clone())?;
        state.errors = misrepresentation_errors(kernel, &rep)?;
        let sketch_size = state.sampled_indices.len();
        let added = if it < sketch.iterations {
            refine(&mut state, sketch.r_hat)
        } else {
            Vec::new()
        };
        let stop = added.is_empty();
        state.history.push(SketchIteration {
            iteration: it,
            sketch_size,
            objective: diag.objective,
            solver_iterations: diag.iterations,
            converged: diag.converged,
            added,
        });
        last = Some((rep, diag));
        if stop {
            break;
        }
    }
    let (representation, diagnostics) = last.expect("at least one iteration");
    Ok(SketchOutcome {
        representation,
        state,
        diagnostics,
    })
}
