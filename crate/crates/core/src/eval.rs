//! Metrics and geometric oracles.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{kernel_distance, KernelMatrix};
use crate::sketch::slice_kernel;
use crate::solver::{objective, RepresentationMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryClassificationReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl BinaryClassificationReport {
    /// Precision and recall are 0 when their denominators are 0.
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if a + b == 0 { 0.0 } else { a as f64 / (a + b) as f64 };
        let precision = ratio(tp, fp);
        let recall = ratio(tp, fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
            tp,
            fp,
            tn,
            fn_,
        }
    }
}

/// Outliers are the positive class. `is_outlier[j]` is the truth for sample
/// `j`; `predicted` lists the flagged samples (duplicates are ignored).
pub fn outlier_f1(is_outlier: &[bool], predicted: &[usize]) -> Result<BinaryClassificationReport> {
    let n = is_outlier.len();
    let mut flagged = vec![false; n];
    for &p in predicted {
        if p >= n {
            return Err(Error::IndexOutOfRange { index: p, len: n });
        }
        flagged[p] = true;
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&truth, &pred) in is_outlier.iter().zip(&flagged) {
        match (truth, pred) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
            (true, false) => fn_ += 1,
        }
    }
    Ok(BinaryClassificationReport::from_counts(tp, fp, tn, fn_))
}

/// Negated objective over the full kernel; rows of `rep` are placed at its
/// candidate indices.
pub fn coverage_score(kernel: &KernelMatrix, rep: &RepresentationMatrix, lambda: f64) -> Result<f64> {
    let (k_s, k_c) = slice_kernel(kernel, rep.candidate_indices())?;
    Ok(-objective(k_s.as_ref(), k_c.as_ref(), rep, lambda)?)
}

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite input")
}

/// Sign of the cross product `(b - a) x (c - a)`: positive for a
/// counter-clockwise turn. Falls back to exact rational arithmetic when the
/// floating-point result is within its rounding-error bound.
pub fn orientation(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Ordering {
    let left = (b[0] - a[0]) * (c[1] - a[1]);
    let right = (b[1] - a[1]) * (c[0] - a[0]);
    let det = left - right;
    let bound = 3.3306690738754716e-16 * (left.abs() + right.abs());
    if det > bound {
        return Ordering::Greater;
    }
    if -det > bound {
        return Ordering::Less;
    }
    let [ax, ay] = a.map(exact);
    let [bx, by] = b.map(exact);
    let [cx, cy] = c.map(exact);
    let det = (bx - &ax) * (cy - &ay) - (by - ay) * (cx - ax);
    if det.is_zero() {
        Ordering::Equal
    } else if det.is_positive() {
        Ordering::Greater
    } else {
        Ordering::Less
    }
}

/// Indices of the strict vertices of the convex hull (points in the middle
/// of a hull edge are excluded). Coincident copies of a vertex are all
/// reported. Result is sorted ascending.
pub fn hull_vertices_2d(points: &[[f64; 2]]) -> Result<Vec<usize>> {
    if points.len() < 3 {
        return Err(Error::param("points", "need at least 3 points"));
    }
    for (row, p) in points.iter().enumerate() {
        if !p[0].is_finite() || !p[1].is_finite() {
            return Err(Error::NonFinite { row, col: 0 });
        }
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        points[i][0]
            .total_cmp(&points[j][0])
            .then(points[i][1].total_cmp(&points[j][1]))
    });
    order.dedup_by(|a, b| points[*a] == points[*b]);
    if order.len() < 3 {
        return Err(Error::Collinear);
    }

    // Andrew's monotone chain, popping on non-left turns.
    let mut hull: Vec<usize> = Vec::with_capacity(2 * order.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &usize>> = if pass == 0 {
            Box::new(order.iter())
        } else {
            Box::new(order.iter().rev())
        };
        for &i in iter {
            while hull.len() >= start + 2 {
                let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                if orientation(points[a], points[b], points[i]) == Ordering::Greater {
                    break;
                }
                hull.pop();
            }
            hull.push(i);
        }
        hull.pop();
    }
    if hull.len() < 3 {
        return Err(Error::Collinear);
    }
    let vertices: Vec<[f64; 2]> = hull.iter().map(|&i| points[i]).collect();
    Ok((0..points.len())
        .filter(|&i| vertices.contains(&points[i]))
        .collect())
}

/// Classifies each test sample by majority label among its `k` nearest
/// representatives in kernel distance (ties: smaller summed distance, then
/// lower label) and returns the fraction classified correctly.
pub fn rep_knn_accuracy<L: Copy + Ord>(
    representatives: &[usize],
    kernel: &KernelMatrix,
    labels: &[L],
    test: &[usize],
    k: usize,
) -> Result<f64> {
    let n = kernel.n();
    if representatives.is_empty() {
        return Err(Error::NoRepresentatives);
    }
    if k == 0 {
        return Err(Error::param("k", "must be >= 1"));
    }
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!("{} labels for {n} samples", labels.len())));
    }
    for &i in representatives.iter().chain(test) {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
    }
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let k = k.min(representatives.len());
    let mut correct = 0usize;
    for &t in test {
        let mut near: Vec<(f64, usize)> = representatives
            .iter()
            .map(|&r| Ok((kernel_distance(kernel, t, r)?, r)))
            .collect::<Result<_>>()?;
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes: BTreeMap<L, (usize, f64)> = BTreeMap::new();
        for &(d, r) in &near[..k] {
            let e = votes.entry(labels[r]).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += d;
        }
        let predicted = votes
            .iter()
            .min_by(|(la, a), (lb, b)| {
                b.0.cmp(&a.0)
                    .then(a.1.total_cmp(&b.1))
                    .then(la.cmp(lb))
            })
            .map(|(l, _)| *l)
            .expect("k >= 1");
        if predicted == labels[t] {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded 70/10/20 train/validation/test split of `0..n` (sizes rounded
/// down for train and validation).
pub fn train_val_test_split(n: usize, seed: u64) -> Split {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = n * 7 / 10;
    let n_val = n / 10;
    let test = idx.split_off(n_train + n_val);
    let validation = idx.split_off(n_train);
    Split {
        train: idx,
        validation,
        test,
    }
}
