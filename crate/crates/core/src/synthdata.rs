//! Synthetic manifolds and outlier contamination.
//!
//! Every generator is a pure function of its parameters and seed (ChaCha8),
//! so identical calls give identical bytes.

use std::collections::BTreeMap;

use faer::Mat;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::DataMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutlierKind {
    Random,
    Repetitive,
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Inlier(u32),
    Outlier(OutlierKind),
}

impl Label {
    pub fn is_outlier(self) -> bool {
        matches!(self, Label::Outlier(_))
    }

    /// Integer form used in CSV label columns: the cluster id for inliers,
    /// `-1` random, `-2` repetitive, `-3` structured outliers.
    pub fn code(self) -> i64 {
        match self {
            Label::Inlier(c) => c as i64,
            Label::Outlier(OutlierKind::Random) => -1,
            Label::Outlier(OutlierKind::Repetitive) => -2,
            Label::Outlier(OutlierKind::Structured) => -3,
        }
    }

    pub fn from_code(code: i64) -> Result<Self> {
        Ok(match code {
            -1 => Label::Outlier(OutlierKind::Random),
            -2 => Label::Outlier(OutlierKind::Repetitive),
            -3 => Label::Outlier(OutlierKind::Structured),
            c if c >= 0 && c <= u32::MAX as i64 => Label::Inlier(c as u32),
            c => return Err(Error::param("label", format!("unknown label code {c}"))),
        })
    }
}

/// One generation or contamination step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorStep {
    pub name: String,
    pub seed: u64,
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub data: DataMatrix,
    pub labels: Vec<Label>,
    pub steps: Vec<GeneratorStep>,
    /// `origin[p]` is the position sample `p` had when first generated
    /// (inliers first, then outliers in injection order).
    pub origin: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(data: DataMatrix, labels: Vec<Label>, steps: Vec<GeneratorStep>) -> Result<Self> {
        if labels.len() != data.n_samples() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} samples",
                labels.len(),
                data.n_samples()
            )));
        }
        if !labels.iter().any(|l| !l.is_outlier()) {
            return Err(Error::Empty("dataset has no inliers"));
        }
        let origin = (0..labels.len()).collect();
        Ok(Self {
            data,
            labels,
            steps,
            origin,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn outlier_indices(&self) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i].is_outlier())
            .collect()
    }

    pub fn count_inliers(&self) -> usize {
        self.labels.iter().filter(|l| !l.is_outlier()).count()
    }
}

fn step(name: &str, seed: u64, params: &[(&str, f64)]) -> GeneratorStep {
    GeneratorStep {
        name: name.to_string(),
        seed,
        params: params.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
    }
}

fn check_size(n: usize, name: &'static str) -> Result<()> {
    if n == 0 {
        return Err(Error::param(name, "must be >= 1"));
    }
    Ok(())
}

fn check_noise(sigma: f64) -> Result<()> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::param("noise", "must be finite and >= 0"));
    }
    Ok(())
}

fn single_manifold(
    name: &str,
    n1: usize,
    seed: u64,
    params: &[(&str, f64)],
    mut point: impl FnMut(&mut ChaCha8Rng) -> [f64; 3],
    noise: f64,
) -> Result<LabeledDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Mat::<f64>::zeros(3, n1);
    for j in 0..n1 {
        let p = point(&mut rng);
        for (d, v) in p.into_iter().enumerate() {
            let e: f64 = rng.sample(StandardNormal);
            values[(d, j)] = v + noise * e;
        }
    }
    LabeledDataset::new(
        DataMatrix::new(values)?,
        vec![Label::Inlier(0); n1],
        vec![step(name, seed, params)],
    )
}

/// `(t cos t, h, t sin t)` with `t ~ U[1.5 pi, 4.5 pi]`, `h ~ U[0, 21]`, plus
/// isotropic Gaussian noise.
pub fn swiss_roll(n1: usize, noise_sigma: f64, seed: u64) -> Result<LabeledDataset> {
    check_size(n1, "n1")?;
    check_noise(noise_sigma)?;
    let pi = std::f64::consts::PI;
    single_manifold(
        "swiss_roll",
        n1,
        seed,
        &[("n1", n1 as f64), ("noise", noise_sigma)],
        |rng| {
            let t = rng.random_range(1.5 * pi..=4.5 * pi);
            let h = rng.random_range(0.0..=21.0);
            [t * t.cos(), h, t * t.sin()]
        },
        noise_sigma,
    )
}

/// Uniform points on the sphere of the given radius (normalized Gaussians).
pub fn sphere(n1: usize, radius: f64, ambient_noise: f64, seed: u64) -> Result<LabeledDataset> {
    check_size(n1, "n1")?;
    check_noise(ambient_noise)?;
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::param("radius", "must be finite and > 0"));
    }
    single_manifold(
        "sphere",
        n1,
        seed,
        &[("n1", n1 as f64), ("radius", radius), ("noise", ambient_noise)],
        |rng| loop {
            let g: [f64; 3] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            let norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            if norm > 1e-12 {
                break g.map(|x| radius * x / norm);
            }
        },
        ambient_noise,
    )
}

/// Trefoil point at parameter `t`.
pub fn trefoil_point(t: f64) -> [f64; 3] {
    [
        t.sin() + 2.0 * (2.0 * t).sin(),
        t.cos() - 2.0 * (2.0 * t).cos(),
        -(3.0 * t).sin(),
    ]
}

/// Trefoil knot with `t ~ U[0, 2 pi)`.
pub fn trefoil(n1: usize, noise: f64, seed: u64) -> Result<LabeledDataset> {
    check_size(n1, "n1")?;
    check_noise(noise)?;
    let tau = std::f64::consts::TAU;
    single_manifold(
        "trefoil",
        n1,
        seed,
        &[("n1", n1 as f64), ("noise", noise)],
        |rng| trefoil_point(rng.random_range(0.0..tau)),
        noise,
    )
}

/// `m x d` matrix with orthonormal columns: thin Q of a seeded Gaussian
/// matrix, or the zero-padded identity when `seed` is `None`.
pub fn orthonormal_map(m: usize, d: usize, seed: Option<u64>) -> Result<Mat<f64>> {
    if m < d {
        return Err(Error::param(
            "ambient_dim",
            format!("{m} is smaller than the data dimension {d}"),
        ));
    }
    Ok(match seed {
        None => Mat::from_fn(m, d, |i, j| if i == j { 1.0 } else { 0.0 }),
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut g = Mat::<f64>::zeros(m, d);
            for j in 0..d {
                for i in 0..m {
                    g[(i, j)] = rng.sample(StandardNormal);
                }
            }
            g.qr().compute_thin_Q()
        }
    })
}

/// Maps `D` into `m` dimensions by an isometry (see [`orthonormal_map`]).
pub fn embed(data: &DataMatrix, ambient_dim: usize, seed: Option<u64>) -> Result<DataMatrix> {
    let map = orthonormal_map(ambient_dim, data.dim(), seed)?;
    DataMatrix::new(&map * data.values())
}

/// [`embed`] applied to a labeled dataset.
pub fn embed_dataset(
    ds: &LabeledDataset,
    ambient_dim: usize,
    seed: Option<u64>,
) -> Result<LabeledDataset> {
    let mut out = ds.clone();
    out.data = embed(&ds.data, ambient_dim, seed)?;
    out.steps.push(step(
        "embed",
        seed.unwrap_or(0),
        &[
            ("ambient_dim", ambient_dim as f64),
            ("identity", if seed.is_none() { 1.0 } else { 0.0 }),
        ],
    ));
    Ok(out)
}

/// Per-coordinate `(min, max)` over the inliers.
pub fn inlier_bounds(ds: &LabeledDataset) -> Vec<(f64, f64)> {
    let x = ds.data.values();
    (0..x.nrows())
        .map(|d| {
            (0..x.ncols())
                .filter(|&j| !ds.labels[j].is_outlier())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), j| {
                    (lo.min(x[(d, j)]), hi.max(x[(d, j)]))
                })
        })
        .collect()
}

fn uniform_box(rng: &mut ChaCha8Rng, bounds: &[(f64, f64)], n2: usize) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(bounds.len(), n2);
    for j in 0..n2 {
        for (d, &(lo, hi)) in bounds.iter().enumerate() {
            let u: f64 = rng.random();
            out[(d, j)] = lo + (hi - lo) * u;
        }
    }
    out
}

// Appends the new columns, then applies one seeded shuffle to everything.
fn append_and_shuffle(
    ds: &LabeledDataset,
    extra: Mat<f64>,
    extra_labels: Vec<Label>,
    rng: &mut ChaCha8Rng,
    record: GeneratorStep,
) -> Result<LabeledDataset> {
    let x = ds.data.values();
    let n = ds.n_samples() + extra.ncols();
    let mut labels = ds.labels.clone();
    labels.extend(extra_labels);
    let mut origin = ds.origin.clone();
    let base = origin.len();
    origin.extend(base..base + extra.ncols());

    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let values = Mat::from_fn(x.nrows(), n, |d, p| {
        let src = perm[p];
        if src < x.ncols() {
            x[(d, src)]
        } else {
            extra[(d, src - x.ncols())]
        }
    });
    let mut steps = ds.steps.clone();
    steps.push(record);
    Ok(LabeledDataset {
        data: DataMatrix::new(values)?,
        labels: perm.iter().map(|&s| labels[s]).collect(),
        steps,
        origin: perm.iter().map(|&s| origin[s]).collect(),
    })
}

/// Adds `n2` points uniform on the inlier bounding box, then shuffles.
pub fn inject_uniform_outliers(ds: &LabeledDataset, n2: usize, seed: u64) -> Result<LabeledDataset> {
    inject_repetitive_outliers(ds, n2, 0.0, seed)
}

/// Like [`inject_uniform_outliers`], but `ceil(repeat_fraction n2)` of the
/// outliers are exact copies of one of the drawn points and are labeled
/// repetitive.
pub fn inject_repetitive_outliers(
    ds: &LabeledDataset,
    n2: usize,
    repeat_fraction: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if !(0.0..=1.0).contains(&repeat_fraction) {
        return Err(Error::param("repeat_fraction", "must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = uniform_box(&mut rng, &inlier_bounds(ds), n2);
    let copies = ((repeat_fraction * n2 as f64).ceil() as usize).min(n2);
    for j in 1..copies {
        for d in 0..points.nrows() {
            points[(d, j)] = points[(d, 0)];
        }
    }
    let labels = (0..n2)
        .map(|j| {
            Label::Outlier(if j < copies {
                OutlierKind::Repetitive
            } else {
                OutlierKind::Random
            })
        })
        .collect();
    let record = if copies == 0 {
        step("uniform_outliers", seed, &[("n2", n2 as f64)])
    } else {
        step(
            "repetitive_outliers",
            seed,
            &[("n2", n2 as f64), ("repeat_fraction", repeat_fraction)],
        )
    };
    append_and_shuffle(ds, points, labels, &mut rng, record)
}

/// Adds `n2` points from a random `rank`-dimensional affine subspace through
/// the inlier mean, with coordinates uniform on `[-s, s]` where `s` is half
/// the inlier bounding-box diagonal, then shuffles.
pub fn inject_structured_outliers(
    ds: &LabeledDataset,
    n2: usize,
    rank: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    let m = ds.data.dim();
    if rank == 0 || rank > m {
        return Err(Error::param("rank", format!("must lie in 1..={m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = orthonormal_map(m, rank, Some(rng.random()))?;
    let bounds = inlier_bounds(ds);
    let half_diag = 0.5
        * bounds
            .iter()
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt();
    let x = ds.data.values();
    let inliers: Vec<usize> = (0..x.ncols()).filter(|&j| !ds.labels[j].is_outlier()).collect();
    let mean: Vec<f64> = (0..m)
        .map(|d| inliers.iter().map(|&j| x[(d, j)]).sum::<f64>() / inliers.len() as f64)
        .collect();
    let mut coef = Mat::<f64>::zeros(rank, n2);
    for j in 0..n2 {
        for k in 0..rank {
            coef[(k, j)] = rng.random_range(-half_diag..=half_diag);
        }
    }
    let mut points = &basis * &coef;
    for j in 0..n2 {
        for d in 0..m {
            points[(d, j)] += mean[d];
        }
    }
    let labels = vec![Label::Outlier(OutlierKind::Structured); n2];
    let record = step(
        "structured_outliers",
        seed,
        &[("n2", n2 as f64), ("rank", rank as f64)],
    );
    append_and_shuffle(ds, points, labels, &mut rng, record)
}

/// `k` unit-variance Gaussian blobs in `dim` dimensions with means
/// `c * separation * e_0`, so distinct means are at least `separation` apart.
pub fn clustered_gaussians(
    k: usize,
    per_cluster: usize,
    separation: f64,
    dim: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    check_size(k, "k")?;
    check_size(per_cluster, "per_cluster")?;
    check_size(dim, "dim")?;
    if !(separation >= 0.0) || !separation.is_finite() {
        return Err(Error::param("separation", "must be finite and >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = k * per_cluster;
    let mut values = Mat::<f64>::zeros(dim, n);
    let mut labels = Vec::with_capacity(n);
    for c in 0..k {
        for s in 0..per_cluster {
            let j = c * per_cluster + s;
            for d in 0..dim {
                let e: f64 = rng.sample(StandardNormal);
                values[(d, j)] = e + if d == 0 { c as f64 * separation } else { 0.0 };
            }
            labels.push(Label::Inlier(c as u32));
        }
    }
    LabeledDataset::new(
        DataMatrix::new(values)?,
        labels,
        vec![step(
            "clustered_gaussians",
            seed,
            &[
                ("k", k as f64),
                ("per_cluster", per_cluster as f64),
                ("separation", separation),
                ("dim", dim as f64),
            ],
        )],
    )
}
