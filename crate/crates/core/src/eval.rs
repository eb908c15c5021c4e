//! Evaluation metrics: relative errors, false-zero detection scores, PCA,
//! k-means and the adjusted Rand index.

use std::collections::HashMap;

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, ZitsError};
use crate::tensor::{DenseTensor3, Mat};

/// `‖truth - estimate‖_F / ‖truth‖_F`.
pub fn rel_error(estimate: &DenseTensor3, truth: &DenseTensor3) -> Result<f64> {
    if estimate.dims() != truth.dims() {
        return Err(ZitsError::DimensionMismatch(format!(
            "estimate {:?} vs truth {:?}",
            estimate.dims(),
            truth.dims()
        )));
    }
    let denom = truth.frobenius_norm();
    if denom == 0.0 {
        return Err(ZitsError::InvalidData(
            "relative error against an all-zero truth".into(),
        ));
    }
    let num: f64 = estimate
        .values()
        .iter()
        .zip(truth.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(num / denom)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    /// False when nothing was flagged, so precision was reported as 1.
    pub precision_defined: bool,
    /// False when there were no positives, so recall was reported as 1.
    pub recall_defined: bool,
}

/// Confusion-matrix scores over observed zeros; `flags[c]` is the detector's
/// verdict and `truth[c]` whether cell `c` is a genuine false zero.
pub fn detection_metrics(flags: &[bool], truth: &[bool]) -> Result<DetectionMetrics> {
    if flags.len() != truth.len() {
        return Err(ZitsError::DimensionMismatch(format!(
            "{} flags vs {} truth labels",
            flags.len(),
            truth.len()
        )));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&f, &t) in flags.iter().zip(truth) {
        match (f, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let total = tp + fp + fn_ + tn;
    let accuracy = if total == 0 {
        1.0
    } else {
        (tp + tn) as f64 / total as f64
    };
    let precision_defined = tp + fp > 0;
    let recall_defined = tp + fn_ > 0;
    Ok(DetectionMetrics {
        accuracy,
        precision: if precision_defined {
            tp as f64 / (tp + fp) as f64
        } else {
            1.0
        },
        recall: if recall_defined {
            tp as f64 / (tp + fn_) as f64
        } else {
            1.0
        },
        tp,
        fp,
        fn_,
        tn,
        precision_defined,
        recall_defined,
    })
}

fn center_columns(rows: &Mat) -> Mat {
    let mut x = rows.clone();
    let m = x.nrows() as f64;
    for mut col in x.column_iter_mut() {
        let mean = col.sum() / m;
        col.add_scalar_mut(-mean);
    }
    x
}

/// Eigenpairs of a symmetric matrix sorted by decreasing eigenvalue.
pub(crate) fn sorted_eigen(a: Mat) -> (Vec<f64>, Mat) {
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&x, &y| {
        eig.eigenvalues[y]
            .total_cmp(&eig.eigenvalues[x])
            .then(x.cmp(&y))
    });
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = Mat::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (vals, vecs)
}

/// Flips each column so that its largest-magnitude entry is positive.
pub(crate) fn fix_column_signs(m: &mut Mat) {
    for mut col in m.column_iter_mut() {
        let pivot = col
            .iter()
            .cloned()
            .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if pivot < 0.0 {
            col.neg_mut();
        }
    }
}

/// Projects centered rows onto their leading principal directions. Returns
/// `M × min(n_components, rank)` scores.
pub fn pca_project(rows: &Mat, n_components: usize) -> Result<Mat> {
    let (m, f) = rows.shape();
    if m < 2 {
        return Err(ZitsError::InvalidData("PCA needs at least two rows".into()));
    }
    let x = center_columns(rows);
    let mut loadings = if f <= m {
        let (vals, vecs) = sorted_eigen(x.transpose() * &x);
        keep_leading(&vals, vecs, n_components)
    } else {
        // work with the smaller M × M Gram matrix
        let (vals, vecs) = sorted_eigen(&x * x.transpose());
        let u = keep_leading(&vals, vecs, n_components);
        let mut v = x.transpose() * &u;
        for (d, mut col) in v.column_iter_mut().enumerate() {
            col /= vals[d].sqrt();
        }
        v
    };
    fix_column_signs(&mut loadings);
    Ok(x * loadings)
}

fn keep_leading(vals: &[f64], vecs: Mat, n: usize) -> Mat {
    let top = vals.first().copied().unwrap_or(0.0).max(0.0);
    let rank = vals
        .iter()
        .take_while(|&&v| v > 1e-12 * top && v > 0.0)
        .count();
    let keep = n.min(rank);
    vecs.columns(0, keep).into_owned()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centers: Mat,
    pub sse: f64,
}

const KMEANS_RESTARTS: u64 = 10;
const KMEANS_MAX_ITERS: usize = 300;

fn sq_dist(rows: &Mat, i: usize, centers: &Mat, c: usize) -> f64 {
    (0..rows.ncols())
        .map(|f| (rows[(i, f)] - centers[(c, f)]).powi(2))
        .sum()
}

fn kmeanspp(rows: &Mat, r: usize, rng: &mut ChaCha8Rng) -> Mat {
    let m = rows.nrows();
    let mut centers = Mat::zeros(r, rows.ncols());
    let first = rng.random_range(0..m);
    centers.row_mut(0).copy_from(&rows.row(first));
    let mut best: Vec<f64> = (0..m).map(|i| sq_dist(rows, i, &centers, 0)).collect();
    for c in 1..r {
        let total: f64 = best.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = m - 1;
            for (i, &d) in best.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..m)
        };
        centers.row_mut(c).copy_from(&rows.row(pick));
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.min(sq_dist(rows, i, &centers, c));
        }
    }
    centers
}

fn lloyd(rows: &Mat, mut centers: Mat) -> KMeansResult {
    let (m, f) = rows.shape();
    let r = centers.nrows();
    let mut labels = vec![usize::MAX; m];
    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let mut best = (f64::INFINITY, 0);
            for c in 0..r {
                let d = sq_dist(rows, i, &centers, c);
                if d < best.0 {
                    best = (d, c);
                }
            }
            if *label != best.1 {
                *label = best.1;
                changed = true;
            }
        }
        let mut sums = Mat::zeros(r, f);
        let mut counts = vec![0usize; r];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for ff in 0..f {
                sums[(l, ff)] += rows[(i, ff)];
            }
        }
        for c in 0..r {
            if counts[c] == 0 {
                // re-seed an empty cluster at the point farthest from its center
                let far = (0..m)
                    .max_by(|&a, &b| {
                        sq_dist(rows, a, &centers, labels[a])
                            .total_cmp(&sq_dist(rows, b, &centers, labels[b]))
                            .then(b.cmp(&a))
                    })
                    .unwrap();
                centers.row_mut(c).copy_from(&rows.row(far));
                labels[far] = c;
                changed = true;
            } else {
                for ff in 0..f {
                    centers[(c, ff)] = sums[(c, ff)] / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let sse = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(rows, i, &centers, l))
        .sum();
    KMeansResult {
        labels,
        centers,
        sse,
    }
}

/// Lloyd's algorithm with k-means++ seeding; the best of 10 seeded restarts by
/// within-cluster sum of squares.
pub fn kmeans_full(rows: &Mat, r: usize, seed: u64) -> Result<KMeansResult> {
    let m = rows.nrows();
    if r == 0 || r > m {
        return Err(ZitsError::Clustering(format!(
            "cannot form {r} clusters from {m} rows"
        )));
    }
    let mut best: Option<KMeansResult> = None;
    for restart in 0..KMEANS_RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart);
        let res = lloyd(rows, kmeanspp(rows, r, &mut rng));
        if best.as_ref().is_none_or(|b| res.sse < b.sse) {
            best = Some(res);
        }
    }
    Ok(best.expect("at least one restart"))
}

pub fn kmeans(rows: &Mat, r: usize, seed: u64) -> Result<Vec<usize>> {
    Ok(kmeans_full(rows, r, seed)?.labels)
}

fn choose2(n: usize) -> f64 {
    (n as f64) * (n as f64 - 1.0) / 2.0
}

/// Hubert–Arabie adjusted Rand index.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(ZitsError::DimensionMismatch(format!(
            "labelings of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    let mut table: HashMap<(usize, usize), usize> = HashMap::new();
    let mut rows: HashMap<usize, usize> = HashMap::new();
    let mut cols: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    if max_index == expected {
        // both partitions trivial in the same way, or one is constant
        return Ok(if index == expected && sum_a == sum_b {
            1.0
        } else {
            0.0
        });
    }
    Ok((index - expected) / (max_index - expected))
}

/// Rows of the upper triangle `i <= j` of each frontal slice, one row per cell.
pub fn slice_features(t: &DenseTensor3) -> Mat {
    let (n, _, k) = t.dims();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    Mat::from_fn(k, pairs.len(), |kk, p| t.get(pairs[p].0, pairs[p].1, kk))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rel_error_cases() {
        let t = DenseTensor3::from_fn(2, 2, 2, |i, j, k| (i + j + k) as f64 + 1.0);
        assert_eq!(rel_error(&t, &t).unwrap(), 0.0);
        assert!((rel_error(&DenseTensor3::zeros(2, 2, 2), &t).unwrap() - 1.0).abs() < 1e-15);
        assert!((rel_error(&t.map(|v| 2.0 * v), &t).unwrap() - 1.0).abs() < 1e-15);
        assert!(rel_error(&t, &DenseTensor3::zeros(2, 2, 2)).is_err());
    }

    #[test]
    fn detection_hand_cases() {
        let m =
            detection_metrics(&[true, true, false, false], &[true, false, true, false]).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall), (0.5, 0.5, 0.5));
        let m = detection_metrics(&[false, false], &[true, false]).unwrap();
        assert_eq!(m.recall, 0.0);
        assert!(!m.precision_defined && m.precision == 1.0);
        let m = detection_metrics(&[true, false], &[true, false]).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall), (1.0, 1.0, 1.0));
    }

    #[test]
    fn ari_cases() {
        assert_eq!(ari(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(ari(&[0, 0, 0, 0], &[0, 1, 0, 1]).unwrap(), 0.0);
        // pairs: (0,1) same/diff, (2,3) same/diff, the other four diff/mixed
        // a = 0011, b = 0101: index 0, sums 2 and 2, expected 2*2/6
        let v = ari(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
        let expected = 4.0 / 6.0;
        assert!((v - (0.0 - expected) / (2.0 - expected)).abs() < 1e-15);
        assert!(ari(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn pca_rank_one() {
        let rows = Mat::from_fn(6, 4, |i, j| (i as f64 - 2.5) * (j as f64 + 1.0));
        let s = pca_project(&rows, 20).unwrap();
        assert_eq!(s.ncols(), 1);
    }

    #[test]
    fn pca_wide_and_tall_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows = Mat::from_fn(5, 9, |_, _| rng.random::<f64>());
        let wide = pca_project(&rows, 3).unwrap();
        let tall = {
            let x = center_columns(&rows);
            let (vals, vecs) = sorted_eigen(x.transpose() * &x);
            let mut v = keep_leading(&vals, vecs, 3);
            fix_column_signs(&mut v);
            x * v
        };
        assert!((&wide - &tall).amax() < 1e-8, "{wide} {tall}");
    }

    #[test]
    fn kmeans_separated_blobs() {
        let rows = Mat::from_fn(20, 2, |i, j| {
            if i < 10 {
                (i + j) as f64 * 0.01
            } else {
                100.0 + (i * j) as f64 * 0.01
            }
        });
        let labels = kmeans(&rows, 2, 3).unwrap();
        let truth: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        assert_eq!(ari(&labels, &truth).unwrap(), 1.0);
        assert!(kmeans(&rows, 21, 0).is_err());
    }

    #[test]
    fn kmeans_one_cluster_per_point() {
        let rows = Mat::from_fn(5, 2, |i, j| (i * 10 + j) as f64);
        let res = kmeans_full(&rows, 5, 1).unwrap();
        assert_eq!(res.sse, 0.0);
        let mut l = res.labels.clone();
        l.sort();
        l.dedup();
        assert_eq!(l.len(), 5);
    }
}
