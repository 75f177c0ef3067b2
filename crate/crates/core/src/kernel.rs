//! Data matrices and symmetric PSD similarity (Gram) matrices.
//!
//! Columns of a [`DataMatrix`] are samples; the column index is the sample
//! identity used by every other module. A [`KernelMatrix`] is always exactly
//! symmetric once constructed.

use faer::{Mat, MatRef, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Relative asymmetry that is silently averaged away.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Samples considered by the median bandwidth heuristic.
pub const MEDIAN_SUBSAMPLE: usize = 200;

/// `m x n` real matrix with samples as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Mat<f64>,
}

impl DataMatrix {
    pub fn new(values: Mat<f64>) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::Empty("data matrix has no features"));
        }
        if values.ncols() == 0 {
            return Err(Error::Empty("data matrix has no samples"));
        }
        for j in 0..values.ncols() {
            for i in 0..values.nrows() {
                if !values[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Self { values })
    }

    /// Builds the matrix from per-sample feature vectors (one `Vec` per column).
    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        let n = samples.len();
        if n == 0 {
            return Err(Error::Empty("data matrix has no samples"));
        }
        let m = samples[0].len();
        if let Some((j, s)) = samples.iter().enumerate().find(|(_, s)| s.len() != m) {
            return Err(Error::ShapeMismatch(format!(
                "sample {j} has {} features, expected {m}",
                s.len()
            )));
        }
        Self::new(Mat::from_fn(m, n, |i, j| samples[j][i]))
    }

    /// Number of features (rows).
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// Number of samples (columns).
    pub fn n_samples(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> MatRef<'_, f64> {
        self.values.as_ref()
    }

    pub fn sample(&self, j: usize) -> Vec<f64> {
        (0..self.dim()).map(|i| self.values[(i, j)]).collect()
    }

    pub fn into_inner(self) -> Mat<f64> {
        self.values
    }

    /// Keeps the given sample columns, in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Self> {
        for &j in indices {
            if j >= self.n_samples() {
                return Err(Error::IndexOutOfRange {
                    index: j,
                    len: self.n_samples(),
                });
            }
        }
        Self::new(Mat::from_fn(self.dim(), indices.len(), |i, c| {
            self.values[(i, indices[c])]
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Cosine,
    Rbf { gamma: f64 },
    Precomputed,
}

impl KernelKind {
    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Cosine => "cosine",
            KernelKind::Rbf { .. } => "rbf",
            KernelKind::Precomputed => "precomputed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub psd_repair: bool,
    pub psd_tolerance: f64,
}

impl KernelSpec {
    /// Built-in kernels are PSD by construction, so repair defaults off.
    pub fn new(kind: KernelKind) -> Self {
        Self {
            kind,
            psd_repair: matches!(kind, KernelKind::Precomputed),
            psd_tolerance: 1e-8,
        }
    }

    pub fn linear() -> Self {
        Self::new(KernelKind::Linear)
    }

    pub fn cosine() -> Self {
        Self::new(KernelKind::Cosine)
    }

    pub fn rbf(gamma: f64) -> Self {
        Self::new(KernelKind::Rbf { gamma })
    }

    pub fn precomputed() -> Self {
        Self::new(KernelKind::Precomputed)
    }

    pub fn validate(&self) -> Result<()> {
        if let KernelKind::Rbf { gamma } = self.kind {
            if !(gamma > 0.0 && gamma.is_finite()) {
                return Err(Error::param("gamma", format!("must be > 0, got {gamma}")));
            }
        }
        if !(self.psd_tolerance >= 0.0) {
            return Err(Error::param("psd_tolerance", "must be non-negative"));
        }
        Ok(())
    }
}

/// Symmetric `n x n` similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    values: Mat<f64>,
}

impl KernelMatrix {
    /// Wraps a user-supplied matrix: symmetrizes small asymmetries, then either
    /// repairs or checks positive semidefiniteness according to `spec`.
    pub fn from_precomputed(values: Mat<f64>, spec: &KernelSpec) -> Result<Self> {
        spec.validate()?;
        let sym = symmetrize(values)?;
        if spec.psd_repair {
            return psd_repair(&Self { values: sym });
        }
        let kernel = Self { values: sym };
        let report = validate_psd(kernel.values(), spec.psd_tolerance)?;
        if !report.is_psd {
            return Err(Error::NotPsd {
                min_eigenvalue: report.min_eigenvalue,
                tolerance: spec.psd_tolerance,
            });
        }
        Ok(kernel)
    }

    /// Symmetrizes (within tolerance) without any PSD check. Callers own the
    /// PSD guarantee; the solver reports a factorization error otherwise.
    pub fn from_symmetric(values: Mat<f64>) -> Result<Self> {
        Ok(Self {
            values: symmetrize(values)?,
        })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> MatRef<'_, f64> {
        self.values.as_ref()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.values[(i, i)]
    }

    pub fn into_inner(self) -> Mat<f64> {
        self.values
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.n(),
            });
        }
        Ok(())
    }
}

fn check_finite(values: MatRef<'_, f64>) -> Result<()> {
    for j in 0..values.ncols() {
        for i in 0..values.nrows() {
            if !values[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

fn symmetrize(mut values: Mat<f64>) -> Result<Mat<f64>> {
    let (rows, cols) = (values.nrows(), values.ncols());
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if rows == 0 {
        return Err(Error::Empty("kernel matrix is empty"));
    }
    check_finite(values.as_ref())?;
    let mut worst: Option<(f64, usize, usize)> = None;
    for j in 0..cols {
        for i in 0..j {
            let (a, b) = (values[(i, j)], values[(j, i)]);
            let diff = (a - b).abs();
            let scale = 1f64.max(a.abs()).max(b.abs());
            if diff > SYMMETRY_TOLERANCE * scale && worst.is_none_or(|(w, _, _)| diff > w) {
                worst = Some((diff, i, j));
            }
        }
    }
    if let Some((max_abs_diff, row, col)) = worst {
        return Err(Error::Asymmetric {
            max_abs_diff,
            row,
            col,
        });
    }
    for j in 0..cols {
        for i in 0..j {
            let avg = 0.5 * (values[(i, j)] + values[(j, i)]);
            values[(i, j)] = avg;
            values[(j, i)] = avg;
        }
    }
    Ok(values)
}

/// Median heuristic bandwidth: `1 / median ||x_i - x_j||^2` over an evenly
/// strided subsample of at most [`MEDIAN_SUBSAMPLE`] samples.
pub fn median_heuristic_gamma(data: &DataMatrix) -> f64 {
    let n = data.n_samples();
    let take = n.min(MEDIAN_SUBSAMPLE);
    let idx: Vec<usize> = (0..take).map(|k| k * n / take).collect();
    let x = data.values();
    let mut d2 = Vec::with_capacity(take * take.saturating_sub(1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            d2.push(sq_dist(x, i, j));
        }
    }
    d2.retain(|&d| d > 0.0);
    if d2.is_empty() {
        return 1.0;
    }
    d2.sort_by(f64::total_cmp);
    let mid = d2.len() / 2;
    let median = if d2.len() % 2 == 0 {
        0.5 * (d2[mid - 1] + d2[mid])
    } else {
        d2[mid]
    };
    1.0 / median
}

fn sq_dist(x: MatRef<'_, f64>, i: usize, j: usize) -> f64 {
    let (a, b) = (x.col(i), x.col(j));
    let mut s = 0.0;
    for f in 0..x.nrows() {
        let d = a[f] - b[f];
        s += d * d;
    }
    s
}

fn dot(x: MatRef<'_, f64>, i: usize, j: usize) -> f64 {
    let (a, b) = (x.col(i), x.col(j));
    let mut s = 0.0;
    for f in 0..x.nrows() {
        s += a[f] * b[f];
    }
    s
}

/// Evaluates the kernel on every pair of samples.
///
/// Only the upper triangle is computed (each entry independently) and then
/// mirrored, so the result is exactly symmetric and does not depend on the
/// degree of parallelism.
pub fn build_gram(data: &DataMatrix, spec: &KernelSpec) -> Result<KernelMatrix> {
    spec.validate()?;
    let x = data.values();
    let n = data.n_samples();

    let norms: Vec<f64> = match spec.kind {
        KernelKind::Cosine => {
            let norms: Vec<f64> = (0..n).map(|j| dot(x, j, j).sqrt()).collect();
            if let Some(column) = norms.iter().position(|&v| v == 0.0) {
                return Err(Error::ZeroColumn { column });
            }
            norms
        }
        KernelKind::Precomputed => {
            return Err(Error::param(
                "kernel",
                "precomputed kernels are loaded with KernelMatrix::from_precomputed",
            ))
        }
        _ => Vec::new(),
    };

    let entry = |i: usize, j: usize| -> f64 {
        match spec.kind {
            KernelKind::Linear => dot(x, i, j),
            KernelKind::Cosine => {
                if i == j {
                    1.0
                } else {
                    (dot(x, i, j) / (norms[i] * norms[j])).clamp(-1.0, 1.0)
                }
            }
            KernelKind::Rbf { gamma } => {
                if i == j {
                    1.0
                } else {
                    (-gamma * sq_dist(x, i, j)).exp()
                }
            }
            KernelKind::Precomputed => unreachable!(),
        }
    };

    // Row i of the upper triangle: entries (i, i..n).
    let upper: Vec<Vec<f64>> = par::map_range(n, |i| (i..n).map(|j| entry(i, j)).collect());
    let mut values = Mat::<f64>::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + off;
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    let kernel = KernelMatrix { values };
    if spec.psd_repair {
        psd_repair(&kernel)
    } else {
        Ok(kernel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdReport {
    pub symmetric: bool,
    pub max_asymmetry: f64,
    pub min_eigenvalue: f64,
    pub is_psd: bool,
}

/// Smallest eigenvalue of the symmetrized matrix and the PSD verdict.
pub fn validate_psd(values: MatRef<'_, f64>, tol: f64) -> Result<PsdReport> {
    let (rows, cols) = (values.nrows(), values.ncols());
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if rows == 0 {
        return Err(Error::Empty("kernel matrix is empty"));
    }
    check_finite(values)?;
    let mut max_asymmetry = 0f64;
    let mut symmetric = true;
    for j in 0..cols {
        for i in 0..j {
            let (a, b) = (values[(i, j)], values[(j, i)]);
            let diff = (a - b).abs();
            max_asymmetry = max_asymmetry.max(diff);
            if diff > 1e-12 * 1f64.max(a.abs()) {
                symmetric = false;
            }
        }
    }
    let sym = Mat::from_fn(rows, cols, |i, j| 0.5 * (values[(i, j)] + values[(j, i)]));
    let eig = sym
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::Eigen)?;
    let min_eigenvalue = eig.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PsdReport {
        symmetric,
        max_asymmetry,
        min_eigenvalue,
        is_psd: min_eigenvalue >= -tol,
    })
}

/// Nearest PSD matrix in Frobenius norm: clip negative eigenvalues to zero.
pub fn psd_repair(kernel: &KernelMatrix) -> Result<KernelMatrix> {
    let n = kernel.n();
    let evd = kernel
        .values
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::Eigen)?;
    let u = evd.U();
    let s = evd.S().column_vector();
    if (0..n).all(|k| s[k] >= 0.0) {
        return Ok(kernel.clone());
    }
    let clipped: Vec<f64> = (0..n).map(|k| s[k].max(0.0)).collect();
    let mut scaled = u.to_owned();
    for (k, &w) in clipped.iter().enumerate() {
        for i in 0..n {
            scaled[(i, k)] *= w;
        }
    }
    let mut values = &scaled * u.transpose();
    for j in 0..n {
        for i in 0..j {
            let avg = 0.5 * (values[(i, j)] + values[(j, i)]);
            values[(i, j)] = avg;
            values[(j, i)] = avg;
        }
    }
    Ok(KernelMatrix { values })
}

/// Feature-space distance `sqrt(max(0, k_ii + k_jj - 2 k_ij))`.
pub fn kernel_distance(kernel: &KernelMatrix, i: usize, j: usize) -> Result<f64> {
    kernel.check_index(i)?;
    kernel.check_index(j)?;
    if i == j {
        return Ok(0.0);
    }
    let d2 = kernel.diag(i) + kernel.diag(j) - 2.0 * kernel.get(i, j);
    Ok(d2.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mat(rows: &[&[f64]]) -> Mat<f64> {
        Mat::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn linear_gram_of_identity_is_identity() {
        let d = DataMatrix::new(Mat::identity(2, 2)).unwrap();
        let k = build_gram(&d, &KernelSpec::linear()).unwrap();
        assert_eq!(k.values(), Mat::<f64>::identity(2, 2).as_ref());
    }

    #[test]
    fn rbf_diagonal_is_one() {
        let d = DataMatrix::new(Mat::from_fn(3, 7, |i, j| (i * 7 + j) as f64 * 0.3 - 2.0)).unwrap();
        let k = build_gram(&d, &KernelSpec::rbf(0.7)).unwrap();
        for i in 0..7 {
            assert_eq!(k.diag(i), 1.0);
        }
    }

    #[test]
    fn cosine_of_parallel_columns_is_all_ones() {
        let d = DataMatrix::new(mat(&[&[1.0, 2.0], &[0.0, 0.0]])).unwrap();
        let k = build_gram(&d, &KernelSpec::cosine()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(k.get(i, j), 1.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn cosine_rejects_zero_column() {
        let d = DataMatrix::new(mat(&[&[1.0, 0.0, 3.0], &[1.0, 0.0, 1.0]])).unwrap();
        match build_gram(&d, &KernelSpec::cosine()) {
            Err(Error::ZeroColumn { column }) => assert_eq!(column, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_data_rejected() {
        let err = DataMatrix::new(mat(&[&[1.0, f64::NAN]])).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 0, col: 1 }));
    }

    #[test]
    fn rbf_requires_positive_gamma() {
        let d = DataMatrix::new(Mat::identity(2, 2)).unwrap();
        assert!(build_gram(&d, &KernelSpec::rbf(0.0)).is_err());
        assert!(build_gram(&d, &KernelSpec::rbf(-1.0)).is_err());
    }

    #[test]
    fn validate_psd_examples() {
        let r = validate_psd(Mat::<f64>::identity(3, 3).as_ref(), 0.0).unwrap();
        assert!(r.is_psd && r.symmetric);
        assert_abs_diff_eq!(r.min_eigenvalue, 1.0, epsilon = 1e-14);

        let r = validate_psd(mat(&[&[1.0, 0.0], &[0.0, -0.5]]).as_ref(), 1e-8).unwrap();
        assert!(!r.is_psd);
        assert_abs_diff_eq!(r.min_eigenvalue, -0.5, epsilon = 1e-14);

        // eigenvalues 1 +- 2 from the characteristic polynomial
        let r = validate_psd(mat(&[&[1.0, 2.0], &[2.0, 1.0]]).as_ref(), 1e-8).unwrap();
        assert_abs_diff_eq!(r.min_eigenvalue, -1.0, epsilon = 1e-13);
    }

    #[test]
    fn validate_psd_rejects_non_square() {
        let err = validate_psd(Mat::<f64>::zeros(2, 3).as_ref(), 0.0).unwrap_err();
        assert!(matches!(err, Error::NotSquare { rows: 2, cols: 3 }));
    }

    #[test]
    fn repair_examples() {
        let k = KernelMatrix::from_symmetric(mat(&[&[1.0, 0.0], &[0.0, -0.5]])).unwrap();
        let r = psd_repair(&k).unwrap();
        assert_abs_diff_eq!(r.get(0, 0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.get(1, 1), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.get(0, 1), 0.0, epsilon = 1e-12);

        let k = KernelMatrix::from_symmetric(mat(&[&[1.0, 2.0], &[2.0, 1.0]])).unwrap();
        let r = psd_repair(&k).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(r.get(i, j), 1.5, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn repair_leaves_psd_matrix_unchanged() {
        let k = KernelMatrix::from_symmetric(mat(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap();
        let r = psd_repair(&k).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(r.get(i, j), k.get(i, j), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn small_asymmetry_is_averaged_large_is_rejected() {
        let k = KernelMatrix::from_symmetric(mat(&[&[1.0, 0.5 + 1e-10], &[0.5, 1.0]])).unwrap();
        assert_eq!(k.get(0, 1), k.get(1, 0));

        match KernelMatrix::from_symmetric(mat(&[&[1.0, 0.6], &[0.5, 1.0]])) {
            Err(Error::Asymmetric { max_abs_diff, .. }) => {
                assert_abs_diff_eq!(max_abs_diff, 0.1, epsilon = 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn precomputed_without_repair_rejects_indefinite() {
        let mut spec = KernelSpec::precomputed();
        spec.psd_repair = false;
        let err =
            KernelMatrix::from_precomputed(mat(&[&[1.0, 2.0], &[2.0, 1.0]]), &spec).unwrap_err();
        assert!(matches!(err, Error::NotPsd { .. }));
        // default precomputed spec repairs
        let k = KernelMatrix::from_precomputed(
            mat(&[&[1.0, 2.0], &[2.0, 1.0]]),
            &KernelSpec::precomputed(),
        )
        .unwrap();
        assert_abs_diff_eq!(k.get(0, 1), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn distance_examples() {
        let k = KernelMatrix::from_symmetric(Mat::identity(2, 2)).unwrap();
        assert_abs_diff_eq!(kernel_distance(&k, 0, 1).unwrap(), 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(kernel_distance(&k, 1, 1).unwrap(), 0.0);
        let ones = KernelMatrix::from_symmetric(Mat::from_fn(2, 2, |_, _| 1.0)).unwrap();
        assert_eq!(kernel_distance(&ones, 0, 1).unwrap(), 0.0);
        assert!(matches!(
            kernel_distance(&k, 0, 2),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn median_gamma_of_unit_spacing() {
        // three collinear points at 0, 1, 2: squared distances {1, 1, 4}
        let d = DataMatrix::new(mat(&[&[0.0, 1.0, 2.0]])).unwrap();
        assert_abs_diff_eq!(median_heuristic_gamma(&d), 1.0, epsilon = 1e-15);
    }
}
