//! ADMM solver for the row-sparse kernel quadratic program
//!
//! ```text
//! minimize  (lambda/2) tr(R^T K_s R - 2 K_c R) + sum_i ||row_i(R)||_2
//! ```
//!
//! over `R` of shape `r x n`, where `K_s` (`r x r`) is the kernel restricted
//! to the candidate columns and `K_c` (`n x r`) holds the kernel between all
//! samples and the candidates. The full problem is `K_s = K_c = K`.
//!
//! The splitting is `f(Delta) + g(R)` subject to `Delta = R`, with scaled dual
//! `Q`:
//!
//! ```text
//! Delta <- (lambda K_s + rho I)^-1 (lambda K_c^T + rho (R - Q))
//! R     <- row-wise group soft thresholding of Delta + Q at 1/rho
//! Q     <- Q + Delta - R
//! ```
//!
//! The returned `R` is the thresholded iterate, so zero rows are exact zeros.
//!
//! Internally every `r x n` variable is stored row-major ("group-major"): the
//! entries of one candidate's row are contiguous, which makes the per-row
//! shrinkage a slice operation and lets the `Delta` update run as a single
//! `n x r` by `r x r` product.

use faer::linalg::matmul::matmul;
use faer::linalg::solvers::DenseSolveCore;
use faer::{Accum, Mat, MatMut, MatRef, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub lambda: f64,
    pub rho: f64,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_iter: usize,
}

impl SolverConfig {
    pub const DEFAULT_RHO: f64 = 1.0;
    pub const DEFAULT_TOL_ABS: f64 = 1e-6;
    pub const DEFAULT_TOL_REL: f64 = 1e-4;
    pub const DEFAULT_MAX_ITER: usize = 10_000;

    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            rho: Self::DEFAULT_RHO,
            tol_abs: Self::DEFAULT_TOL_ABS,
            tol_rel: Self::DEFAULT_TOL_REL,
            max_iter: Self::DEFAULT_MAX_ITER,
        }
    }

    pub fn with_tolerances(mut self, tol_abs: f64, tol_rel: f64) -> Self {
        self.tol_abs = tol_abs;
        self.tol_rel = tol_rel;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::param("lambda", format!("must be > 0, got {}", self.lambda)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::param("rho", format!("must be > 0, got {}", self.rho)));
        }
        if !(self.tol_abs > 0.0) || !(self.tol_rel > 0.0) {
            return Err(Error::param("tol", "tolerances must be > 0"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be >= 1"));
        }
        Ok(())
    }
}

/// Coefficients expressing every sample through a set of candidates.
///
/// Row `i` belongs to sample `candidate_indices[i]`; column `j` is the
/// representation of sample `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    candidate_indices: Vec<usize>,
}

impl RepresentationMatrix {
    /// `data` is row-major `rows x cols`.
    pub fn new(
        data: Vec<f64>,
        rows: usize,
        cols: usize,
        candidate_indices: Vec<usize>,
    ) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if candidate_indices.len() != rows {
            return Err(Error::ShapeMismatch(format!(
                "{} candidate indices for {rows} rows",
                candidate_indices.len()
            )));
        }
        if rows > cols {
            return Err(Error::ShapeMismatch(format!(
                "{rows} candidates exceed {cols} samples"
            )));
        }
        let mut seen = vec![false; cols];
        for &c in &candidate_indices {
            if c >= cols {
                return Err(Error::IndexOutOfRange { index: c, len: cols });
            }
            if std::mem::replace(&mut seen[c], true) {
                return Err(Error::DuplicateIndex(c));
            }
        }
        Ok(Self {
            rows,
            cols,
            data,
            candidate_indices,
        })
    }

    /// Full-problem matrix: candidates are `0..rows`.
    pub fn from_mat(values: MatRef<'_, f64>) -> Result<Self> {
        let (rows, cols) = (values.nrows(), values.ncols());
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(values[(i, j)]);
            }
        }
        Self::new(data, rows, cols, (0..rows).collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(vec![0.0; rows * cols], rows, cols, (0..rows).collect())
    }

    /// Replaces the candidate indices, keeping the coefficients.
    pub fn with_candidates(self, candidate_indices: Vec<usize>) -> Result<Self> {
        Self::new(self.data, self.rows, self.cols, candidate_indices)
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn candidate_indices(&self) -> &[usize] {
        &self.candidate_indices
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        norm2(self.row(i))
    }

    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row_norm(i)).collect()
    }

    /// Row-major view of the coefficients.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mat_ref(&self) -> MatRef<'_, f64> {
        MatRef::from_row_major_slice(&self.data, self.rows, self.cols)
    }

    pub fn to_mat(&self) -> Mat<f64> {
        self.as_mat_ref().to_owned()
    }

    /// Expands to the `n x n` full-problem matrix by zero-padding rows of
    /// samples that are not candidates.
    pub fn zero_padded(&self) -> Self {
        let n = self.cols;
        let mut data = vec![0.0; n * n];
        for (i, &c) in self.candidate_indices.iter().enumerate() {
            data[c * n..(c + 1) * n].copy_from_slice(self.row(i));
        }
        Self {
            rows: n,
            cols: n,
            data,
            candidate_indices: (0..n).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    pub converged: bool,
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_blocks(k_s: MatRef<'_, f64>, k_c: MatRef<'_, f64>) -> Result<(usize, usize)> {
    let r = k_s.nrows();
    if k_s.ncols() != r {
        return Err(Error::NotSquare {
            rows: r,
            cols: k_s.ncols(),
        });
    }
    if k_c.ncols() != r {
        return Err(Error::ShapeMismatch(format!(
            "K_c has {} columns, K_s is {r}x{r}",
            k_c.ncols()
        )));
    }
    let n = k_c.nrows();
    if r == 0 || r > n {
        return Err(Error::ShapeMismatch(format!("{r} candidates for {n} samples")));
    }
    Ok((r, n))
}

/// `(lambda/2) tr(R^T K_s R - 2 K_c R) + sum_i ||row_i(R)||_2`.
pub fn objective(
    k_s: MatRef<'_, f64>,
    k_c: MatRef<'_, f64>,
    rep: &RepresentationMatrix,
    lambda: f64,
) -> Result<f64> {
    let (r, n) = check_blocks(k_s, k_c)?;
    if rep.nrows() != r || rep.ncols() != n {
        return Err(Error::ShapeMismatch(format!(
            "R is {}x{}, kernel blocks imply {r}x{n}",
            rep.nrows(),
            rep.ncols()
        )));
    }
    Ok(objective_group_major(k_s, k_c, rep.as_slice(), lambda))
}

/// Same as [`objective`] on a raw row-major buffer.
fn objective_group_major(
    k_s: MatRef<'_, f64>,
    k_c: MatRef<'_, f64>,
    data: &[f64],
    lambda: f64,
) -> f64 {
    let r = k_s.nrows();
    let n = k_c.nrows();
    // (R^T K_s)^T = K_s R, stored transposed as n x r column-major.
    let rt = MatRef::from_column_major_slice(data, n, r);
    let mut ksr_t = Mat::<f64>::zeros(n, r);
    matmul(ksr_t.as_mut(), Accum::Replace, rt, k_s, 1.0, par::faer_par());
    let mut quad = 0.0;
    let mut lin = 0.0;
    let mut group = 0.0;
    for i in 0..r {
        let row = &data[i * n..(i + 1) * n];
        let mut q = 0.0;
        let mut l = 0.0;
        for (j, &v) in row.iter().enumerate() {
            q += v * ksr_t[(j, i)];
            l += v * k_c[(j, i)];
        }
        quad += q;
        lin += l;
        group += norm2(row);
    }
    0.5 * lambda * (quad - 2.0 * lin) + group
}

/// Cached linear operator for the `Delta` step of one fixed sketch.
///
/// `lambda K_s + rho I` is Cholesky-factored once; from the factor we keep
/// `rho (lambda K_s + rho I)^-1` and the constant term
/// `(lambda K_s + rho I)^-1 lambda K_c^T`, so each iteration costs one
/// `n x r` by `r x r` product.
pub struct DeltaSystem {
    r: usize,
    n: usize,
    scaled_inverse: Mat<f64>,
    // n x r column-major == r x n row-major
    offset: Vec<f64>,
}

impl DeltaSystem {
    pub fn new(
        k_s: MatRef<'_, f64>,
        k_c: MatRef<'_, f64>,
        lambda: f64,
        rho: f64,
    ) -> Result<Self> {
        let (r, n) = check_blocks(k_s, k_c)?;
        if !(rho > 0.0) {
            return Err(Error::param("rho", "must be > 0"));
        }
        if !(lambda >= 0.0) {
            return Err(Error::param("lambda", "must be >= 0"));
        }
        let system = Mat::from_fn(r, r, |i, j| {
            lambda * k_s[(i, j)] + if i == j { rho } else { 0.0 }
        });
        let llt = system.llt(Side::Lower).map_err(|_| Error::Factorization)?;
        let inverse = llt.inverse();
        if (0..r).any(|i| !inverse[(i, i)].is_finite() || inverse[(i, i)] <= 0.0) {
            return Err(Error::Factorization);
        }
        let scaled_inverse = Mat::from_fn(r, r, |i, j| rho * inverse[(i, j)]);
        let mut offset = vec![0.0; n * r];
        if lambda != 0.0 {
            let dst = MatMut::from_column_major_slice_mut(&mut offset, n, r);
            matmul(dst, Accum::Replace, k_c, inverse.as_ref(), lambda, par::faer_par());
        }
        Ok(Self {
            r,
            n,
            scaled_inverse,
            offset,
        })
    }

    /// `out = offset + rho (lambda K_s + rho I)^-1 w`, all row-major `r x n`.
    fn apply(&self, w: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.offset);
        let w_t = MatRef::from_column_major_slice(w, self.n, self.r);
        let dst = MatMut::from_column_major_slice_mut(out, self.n, self.r);
        matmul(
            dst,
            Accum::Add,
            w_t,
            self.scaled_inverse.as_ref(),
            1.0,
            par::faer_par(),
        );
    }
}

/// One `Delta` step on explicit `r x n` matrices. Factorizes every call;
/// the iterative solver caches a [`DeltaSystem`] instead.
pub fn delta_update(
    k_s: MatRef<'_, f64>,
    k_c: MatRef<'_, f64>,
    r_mat: MatRef<'_, f64>,
    q_mat: MatRef<'_, f64>,
    lambda: f64,
    rho: f64,
) -> Result<Mat<f64>> {
    let system = DeltaSystem::new(k_s, k_c, lambda, rho)?;
    let (r, n) = (system.r, system.n);
    for (name, m) in [("R", r_mat), ("Q", q_mat)] {
        if m.nrows() != r || m.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "{name} is {}x{}, expected {r}x{n}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    let mut w = vec![0.0; r * n];
    for i in 0..r {
        for j in 0..n {
            w[i * n + j] = r_mat[(i, j)] - q_mat[(i, j)];
        }
    }
    let mut out = vec![0.0; r * n];
    system.apply(&w, &mut out);
    Ok(MatRef::from_row_major_slice(&out, r, n).to_owned())
}

/// Group soft thresholding: `max(0, 1 - (1/rho)/||v||) v`. Returns exact
/// zeros, without any division, whenever `||v|| <= 1/rho`.
pub fn row_shrink(v: &[f64], rho: f64) -> Vec<f64> {
    let norm = norm2(v);
    if rho * norm <= 1.0 {
        return vec![0.0; v.len()];
    }
    let scale = 1.0 - 1.0 / (rho * norm);
    v.iter().map(|x| scale * x).collect()
}

/// `Q + Delta - R`.
pub fn dual_update(
    q: MatRef<'_, f64>,
    delta: MatRef<'_, f64>,
    r_mat: MatRef<'_, f64>,
) -> Result<Mat<f64>> {
    if q.shape() != delta.shape() || q.shape() != r_mat.shape() {
        return Err(Error::ShapeMismatch(format!(
            "Q {:?}, Delta {:?}, R {:?}",
            q.shape(),
            delta.shape(),
            r_mat.shape()
        )));
    }
    Ok(Mat::from_fn(q.nrows(), q.ncols(), |i, j| {
        q[(i, j)] + delta[(i, j)] - r_mat[(i, j)]
    }))
}

/// Largest `lambda` for which `R = 0` is optimal:
/// `1 / max_i ||column i of K_c||_2`.
pub fn lambda_critical(k_c: MatRef<'_, f64>) -> Result<f64> {
    let mut max_norm = 0f64;
    for i in 0..k_c.ncols() {
        let col = k_c.col(i);
        let s: f64 = (0..k_c.nrows()).map(|j| col[j] * col[j]).sum();
        max_norm = max_norm.max(s.sqrt());
    }
    if max_norm == 0.0 || !max_norm.is_finite() {
        return Err(Error::ZeroKernel);
    }
    Ok(1.0 / max_norm)
}

// Per-row contributions to the stopping test.
#[derive(Default, Clone, Copy)]
struct RowStats {
    primal: f64,
    dual: f64,
    delta: f64,
    rep: f64,
    scaled_dual: f64,
}

/// Runs ADMM from all-zero variables until both residuals drop below
///
/// ```text
/// primal: ||Delta - R||_F       <= tol_abs sqrt(r n) + tol_rel max(||Delta||_F, ||R||_F)
/// dual:   rho ||R_t+1 - R_t||_F <= tol_abs sqrt(r n) + tol_rel rho ||Q||_F
/// ```
///
/// or `max_iter` is reached (`converged = false`, result still returned).
/// Candidate indices of the result are `0..r`.
pub fn solve(
    k_s: MatRef<'_, f64>,
    k_c: MatRef<'_, f64>,
    config: &SolverConfig,
) -> Result<(RepresentationMatrix, SolveDiagnostics)> {
    config.validate()?;
    let (r, n) = check_blocks(k_s, k_c)?;
    let system = DeltaSystem::new(k_s, k_c, config.lambda, config.rho)?;
    let rho = config.rho;
    let len = r * n;
    let mut rep = vec![0.0; len];
    let mut dual = vec![0.0; len];
    let mut delta = vec![0.0; len];
    let mut work = vec![0.0; len];
    let eps_abs = config.tol_abs * (len as f64).sqrt();

    let mut diag = SolveDiagnostics {
        iterations: 0,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        objective: 0.0,
        converged: false,
    };

    for it in 1..=config.max_iter {
        par::for_each_chunk_mut(&mut work, n, |i, w| {
            let (rrow, qrow) = (&rep[i * n..(i + 1) * n], &dual[i * n..(i + 1) * n]);
            for ((w, &x), &q) in w.iter_mut().zip(rrow).zip(qrow) {
                *w = x - q;
            }
        });
        system.apply(&work, &mut delta);

        // One fused pass per row: x <- shrink(d + q), q <- q + d - x.
        let stats = par::map_zip3_chunks(&delta, &mut dual, &mut rep, n, |d, q, x| {
            let norm_sq: f64 = d.iter().zip(q.iter()).map(|(a, b)| (a + b) * (a + b)).sum();
            let norm = norm_sq.sqrt();
            let scale = if rho * norm <= 1.0 {
                0.0
            } else {
                1.0 - 1.0 / (rho * norm)
            };
            let mut s = RowStats::default();
            for ((xv, &dv), qv) in x.iter_mut().zip(d).zip(q.iter_mut()) {
                let next = if scale == 0.0 { 0.0 } else { scale * (dv + *qv) };
                s.dual += (next - *xv) * (next - *xv);
                *xv = next;
                *qv += dv - next;
                s.primal += (dv - next) * (dv - next);
                s.delta += dv * dv;
                s.rep += next * next;
                s.scaled_dual += *qv * *qv;
            }
            s
        });
        let total = stats.iter().fold(RowStats::default(), |a, s| RowStats {
            primal: a.primal + s.primal,
            dual: a.dual + s.dual,
            delta: a.delta + s.delta,
            rep: a.rep + s.rep,
            scaled_dual: a.scaled_dual + s.scaled_dual,
        });
        let primal = total.primal.sqrt();
        let dual_res = rho * total.dual.sqrt();
        let eps_pri = eps_abs + config.tol_rel * total.delta.sqrt().max(total.rep.sqrt());
        let eps_dual = eps_abs + config.tol_rel * rho * total.scaled_dual.sqrt();
        diag.iterations = it;
        diag.primal_residual = primal;
        diag.dual_residual = dual_res;
        if primal <= eps_pri && dual_res <= eps_dual {
            diag.converged = true;
            break;
        }
    }

    diag.objective = objective_group_major(k_s, k_c, &rep, config.lambda);
    let rep = RepresentationMatrix::new(rep, r, n, (0..r).collect())?;
    Ok((rep, diag))
}

/// Full problem: `K_s = K_c = K`.
pub fn solve_full(
    kernel: &KernelMatrix,
    config: &SolverConfig,
) -> Result<(RepresentationMatrix, SolveDiagnostics)> {
    solve(kernel.values(), kernel.values(), config)
}
