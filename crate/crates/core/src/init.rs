//! Starting values for the fitter.
//!
//! Pairwise method-of-moments estimates give `N × N` matrices `η⁰`, `Θ⁰`
//! that are then factored as `η⁰ ≈ α diag(b0) αᵀ`, `Θ⁰ ≈ α diag(x0) αᵀ` by one
//! of six schemes. Every cell starts with the same weight rows `b0`, `x0`
//! (or its cluster's rows in the multi-cluster path).

use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::BasisMatrix;
use crate::error::{Result, ZitsError};
use crate::eval::{fix_column_signs, kmeans, pca_project, slice_features};
use crate::model::ModelParams;
use crate::tensor::{khatri_rao_rows, CountTensor, Mat};

pub const LAMBDA_FLOOR: f64 = 1e-3;
pub const P_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentInit {
    pub lambda0: Mat,
    pub p0: Mat,
    pub eta0: Mat,
    pub theta0: Mat,
    /// Number of pairs `(i, j)`, `i <= j`, whose raw estimate needed clamping.
    pub clamp_report: usize,
}

/// Per-pair mean `m` and variance `v` over cells (population normalization),
/// inverted as `λ⁰ = (v + m²)/m - 1`, `p⁰ = (v - m)/(v + m² - m)`.
pub fn moments_init(data: &CountTensor) -> Result<MomentInit> {
    let (n, k) = (data.n_loci(), data.n_cells());
    if k < 2 {
        return Err(ZitsError::InvalidData(format!(
            "method of moments needs at least two cells, got {k}"
        )));
    }
    let mut sum = Mat::zeros(n, n);
    let mut sumsq = Mat::zeros(n, n);
    for (i, j, _, c) in data.iter_upper() {
        let c = c as f64;
        sum[(i, j)] += c;
        sumsq[(i, j)] += c * c;
    }
    let mut lambda0 = Mat::zeros(n, n);
    let mut p0 = Mat::zeros(n, n);
    let mut clamped = 0;
    for i in 0..n {
        for j in i..n {
            let m = sum[(i, j)] / k as f64;
            let v = (sumsq[(i, j)] / k as f64 - m * m).max(0.0);
            let (lam, p, was_clamped) = invert_moments(m, v);
            clamped += usize::from(was_clamped);
            for (a, b) in [(i, j), (j, i)] {
                lambda0[(a, b)] = lam;
                p0[(a, b)] = p;
            }
        }
    }
    let eta0 = lambda0.map(f64::ln);
    let theta0 = p0.map(|p| ((1.0 - p) / p).ln());
    Ok(MomentInit {
        lambda0,
        p0,
        eta0,
        theta0,
        clamp_report: clamped,
    })
}

fn invert_moments(m: f64, v: f64) -> (f64, f64, bool) {
    if m <= 0.0 {
        return (LAMBDA_FLOOR, 1.0 - P_FLOOR, true);
    }
    let denom = v + m * m - m;
    if denom <= 0.0 {
        // underdispersed beyond what any ZIP allows
        return (LAMBDA_FLOOR, P_FLOOR, true);
    }
    let raw_lambda = (v + m * m) / m - 1.0;
    let raw_p = (v - m) / denom;
    let lambda = raw_lambda.max(LAMBDA_FLOOR);
    let p = raw_p.clamp(P_FLOOR, 1.0 - P_FLOOR);
    (lambda, p, lambda != raw_lambda || p != raw_p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Random,
    Cp,
    CpAvg,
    EigenB,
    EigenX,
    EigenBX,
}

impl InitKind {
    pub const ALL: [InitKind; 6] = [
        InitKind::Random,
        InitKind::Cp,
        InitKind::CpAvg,
        InitKind::EigenB,
        InitKind::EigenX,
        InitKind::EigenBX,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InitKind::Random => "random",
            InitKind::Cp => "cp",
            InitKind::CpAvg => "cpavg",
            InitKind::EigenB => "eigenb",
            InitKind::EigenX => "eigenx",
            InitKind::EigenBX => "eigenbx",
        }
    }
}

impl fmt::Display for InitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InitKind {
    type Err = ZitsError;

    fn from_str(s: &str) -> Result<Self> {
        InitKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            ZitsError::InvalidParameter(format!(
                "unknown init scheme '{s}'; valid schemes: random, cp, cpavg, eigenb, eigenx, eigenbx"
            ))
        })
    }
}

/// Loci factors and the shared weight vectors of one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeInit {
    pub alpha: Mat,
    pub b0: Vec<f64>,
    pub x0: Vec<f64>,
    /// False when a CP-ALS run hit its sweep limit.
    pub converged: bool,
}

/// Least-squares `w` minimizing `‖M - α diag(w) αᵀ‖_F`, via the normal
/// equations `G w = r` with `G[d, e] = (α_dᵀ α_e)²`, `r_d = α_dᵀ M α_d`.
pub fn diag_weight_regression(m0: &Mat, alpha: &Mat) -> Result<Vec<f64>> {
    if m0.nrows() != alpha.nrows() || m0.ncols() != alpha.nrows() {
        return Err(ZitsError::DimensionMismatch(format!(
            "matrix is {}x{} but alpha has {} rows",
            m0.nrows(),
            m0.ncols(),
            alpha.nrows()
        )));
    }
    let cross = alpha.transpose() * alpha;
    let g = cross.map(|v| v * v);
    let ma = m0 * alpha;
    let rhs = nalgebra::DVector::from_fn(alpha.ncols(), |d, _| alpha.column(d).dot(&ma.column(d)));
    let eps = 1e-12 * g.amax().max(f64::MIN_POSITIVE);
    let pinv = g
        .pseudo_inverse(eps)
        .map_err(|e| ZitsError::Numerical(e.to_string()))?;
    Ok((pinv * rhs).iter().copied().collect())
}

/// Leading `d` eigenpairs of a symmetric matrix by decreasing |eigenvalue|.
fn leading_eigen(m: &Mat, d: usize) -> (Mat, Vec<f64>) {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .abs()
            .total_cmp(&eig.eigenvalues[a].abs())
            .then(a.cmp(&b))
    });
    order.truncate(d);
    let mut vecs = Mat::from_fn(m.nrows(), d, |r, c| eig.eigenvectors[(r, order[c])]);
    fix_column_signs(&mut vecs);
    (vecs, order.iter().map(|&i| eig.eigenvalues[i]).collect())
}

const CP_MAX_SWEEPS: usize = 200;
const CP_TOL: f64 = 1e-8;

struct CpFactors {
    a: Mat,
    b: Mat,
    c: Mat,
    converged: bool,
}

/// Rank-`d` CP-ALS of the two-slice stack `[η⁰, Θ⁰]`. Columns of `A`, `B` are
/// kept at unit norm with the scale carried by `C` (2 × d).
fn cp_two_slice(slices: [&Mat; 2], d: usize, seed: u64) -> Result<CpFactors> {
    let n = slices[0].nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0xC9);
    let mut a = Mat::from_fn(n, d, |_, _| rng.random_range(-0.5..0.5));
    let mut b = Mat::from_fn(n, d, |_, _| rng.random_range(-0.5..0.5));
    let mut c = Mat::from_fn(2, d, |_, _| rng.random_range(-0.5..0.5));
    let x_norm_sq: f64 = slices.iter().map(|s| s.norm_squared()).sum();
    let pinv = |g: Mat| -> Result<Mat> {
        g.clone()
            .pseudo_inverse(1e-12 * g.amax().max(f64::MIN_POSITIVE))
            .map_err(|e| ZitsError::Numerical(e.to_string()))
    };
    let mut prev_fit = f64::NAN;
    let mut converged = false;
    for _ in 0..CP_MAX_SWEEPS {
        // A ← Σ_s X_s B diag(c_s) (CᵀC ∗ BᵀB)⁺
        let mut mttkrp = Mat::zeros(n, d);
        for (s, x) in slices.iter().enumerate() {
            let mut xb = *x * &b;
            for dd in 0..d {
                xb.column_mut(dd).scale_mut(c[(s, dd)]);
            }
            mttkrp += xb;
        }
        a = mttkrp * pinv((c.transpose() * &c).component_mul(&(b.transpose() * &b)))?;

        let mut mttkrp = Mat::zeros(n, d);
        for (s, x) in slices.iter().enumerate() {
            let mut xa = x.transpose() * &a;
            for dd in 0..d {
                xa.column_mut(dd).scale_mut(c[(s, dd)]);
            }
            mttkrp += xa;
        }
        b = mttkrp * pinv((c.transpose() * &c).component_mul(&(a.transpose() * &a)))?;

        let mut mttkrp = Mat::zeros(2, d);
        for (s, x) in slices.iter().enumerate() {
            let xb = *x * &b;
            for dd in 0..d {
                mttkrp[(s, dd)] = a.column(dd).dot(&xb.column(dd));
            }
        }
        c = mttkrp * pinv((a.transpose() * &a).component_mul(&(b.transpose() * &b)))?;

        for dd in 0..d {
            let (na, nb) = (a.column(dd).norm(), b.column(dd).norm());
            if na > 0.0 && nb > 0.0 {
                a.column_mut(dd).unscale_mut(na);
                b.column_mut(dd).unscale_mut(nb);
                c.column_mut(dd).scale_mut(na * nb);
            }
        }

        let mut resid = 0.0;
        for (s, x) in slices.iter().enumerate() {
            let mut approx = Mat::zeros(n, n);
            for dd in 0..d {
                approx += a.column(dd) * b.column(dd).transpose() * c[(s, dd)];
            }
            resid += (*x - approx).norm_squared();
        }
        let fit = 1.0 - (resid / x_norm_sq.max(f64::MIN_POSITIVE)).sqrt();
        if (fit - prev_fit).abs() < CP_TOL {
            converged = true;
            break;
        }
        prev_fit = fit;
    }
    if !converged {
        warn!("two-slice CP-ALS stopped after {CP_MAX_SWEEPS} sweeps without meeting tolerance {CP_TOL}");
    }
    Ok(CpFactors { a, b, c, converged })
}

/// Factors `η⁰` and `Θ⁰` with the requested scheme.
pub fn init_scheme(kind: InitKind, mi: &MomentInit, d: usize, seed: u64) -> Result<SchemeInit> {
    let n = mi.eta0.nrows();
    if d == 0 || d > n {
        return Err(ZitsError::InvalidParameter(format!(
            "rank D = {d} must satisfy 1 <= D <= N = {n}"
        )));
    }
    let done = |alpha: Mat, b0: Vec<f64>, x0: Vec<f64>| SchemeInit {
        alpha,
        b0,
        x0,
        converged: true,
    };
    Ok(match kind {
        InitKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(0xA1);
            let alpha = Mat::from_fn(n, d, |_, _| rng.random_range(-0.5..0.5));
            let b0 = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
            let x0 = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
            done(alpha, b0, x0)
        }
        InitKind::EigenB => {
            let (alpha, b0) = leading_eigen(&mi.eta0, d);
            let x0 = diag_weight_regression(&mi.theta0, &alpha)?;
            done(alpha, b0, x0)
        }
        InitKind::EigenX => {
            let (alpha, x0) = leading_eigen(&mi.theta0, d);
            let b0 = diag_weight_regression(&mi.eta0, &alpha)?;
            done(alpha, b0, x0)
        }
        InitKind::EigenBX => {
            let (ab, _) = leading_eigen(&mi.eta0, d);
            let (ax, _) = leading_eigen(&mi.theta0, d);
            let stacked = Mat::from_fn(
                n,
                2 * d,
                |r, c| if c < d { ab[(r, c)] } else { ax[(r, c - d)] },
            );
            let svd = stacked.svd(true, false);
            let u = svd
                .u
                .ok_or_else(|| ZitsError::Numerical("SVD did not return U".into()))?;
            let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
            order.sort_by(|&a, &b| {
                svd.singular_values[b]
                    .total_cmp(&svd.singular_values[a])
                    .then(a.cmp(&b))
            });
            let mut alpha = Mat::from_fn(n, d, |r, c| u[(r, order[c])]);
            fix_column_signs(&mut alpha);
            let b0 = diag_weight_regression(&mi.eta0, &alpha)?;
            let x0 = diag_weight_regression(&mi.theta0, &alpha)?;
            done(alpha, b0, x0)
        }
        InitKind::Cp | InitKind::CpAvg => {
            let CpFactors {
                a,
                mut b,
                mut c,
                converged,
            } = cp_two_slice([&mi.eta0, &mi.theta0], d, seed)?;
            // B may come out as -A on a column; flip it (and C) so that averaging
            // does not cancel the column
            for dd in 0..d {
                if a.column(dd).dot(&b.column(dd)) < 0.0 {
                    b.column_mut(dd).neg_mut();
                    c.column_mut(dd).neg_mut();
                }
            }
            let alpha = if kind == InitKind::Cp {
                a
            } else {
                (a + b) * 0.5
            };
            SchemeInit {
                alpha,
                b0: c.row(0).iter().copied().collect(),
                x0: c.row(1).iter().copied().collect(),
                converged,
            }
        }
    })
}

/// Loci factors and per-cell weights ready to be lifted onto a basis.
#[derive(Debug, Clone, PartialEq)]
pub struct InitFactors {
    pub alpha: Mat,
    pub w_beta: Mat,
    pub w_xi: Mat,
    /// Initial cell partition (all zeros for a single cluster).
    pub labels: Vec<usize>,
    pub clamp_report: usize,
    pub converged: bool,
}

impl InitFactors {
    /// `Γ = Hᵀ α`, the least-squares coefficients of `α` in the basis.
    pub fn into_params(self, basis: BasisMatrix, r: usize) -> Result<ModelParams> {
        let gamma = basis.h().transpose() * &self.alpha;
        let d = gamma.ncols();
        let m = ModelParams::new(gamma, basis, self.w_beta, self.w_xi)?;
        if !d.is_multiple_of(r) {
            return Err(ZitsError::InvalidParameter(format!(
                "rank {d} is not a multiple of R = {r}"
            )));
        }
        m.with_blocks(r, d / r)
    }
}

pub fn single_cluster_init(
    data: &CountTensor,
    d: usize,
    kind: InitKind,
    seed: u64,
) -> Result<InitFactors> {
    let mi = moments_init(data)?;
    let s = init_scheme(kind, &mi, d, seed)?;
    let k = data.n_cells();
    let lift = |v: &[f64]| Mat::from_fn(k, d, |_, c| v[c]);
    Ok(InitFactors {
        w_beta: lift(&s.b0),
        w_xi: lift(&s.x0),
        alpha: s.alpha,
        labels: vec![0; k],
        clamp_report: mi.clamp_report,
        converged: s.converged,
    })
}

/// Slice features with every zero replaced by the mean of that locus pair
/// over the cells where it is positive (0 if it never is). Dropout zeros
/// otherwise dominate the leading principal components.
pub fn zero_filled_features(data: &CountTensor) -> Mat {
    let mut features = slice_features(&data.to_dense());
    for mut col in features.column_iter_mut() {
        let (sum, cnt) = col
            .iter()
            .filter(|&&v| v > 0.0)
            .fold((0.0, 0usize), |(s, c), &v| (s + v, c + 1));
        let fill = if cnt > 0 { sum / cnt as f64 } else { 0.0 };
        col.iter_mut()
            .filter(|v| **v == 0.0)
            .for_each(|v| *v = fill);
    }
    features
}

/// Initial partition of cells: k-means on the leading 20 principal components
/// of the zero-filled upper-triangular slices (see [`zero_filled_features`]).
pub fn initial_partition(data: &CountTensor, r: usize, seed: u64) -> Result<Vec<usize>> {
    let k = data.n_cells();
    if r > k {
        return Err(ZitsError::Clustering(format!(
            "cannot split {k} cells into {r} clusters"
        )));
    }
    if r == 1 {
        return Ok(vec![0; k]);
    }
    let features = zero_filled_features(data);
    let scores = pca_project(&features, 20)?;
    let scores = if scores.ncols() == 0 {
        features
    } else {
        scores
    };
    kmeans(&scores, r, seed)
}

/// Multi-cluster start: partition the cells, initialize each cluster on its own
/// with rank `L = D / R`, and place cluster `r`'s factors in column block `r`.
pub fn multi_cluster_init(
    data: &CountTensor,
    d: usize,
    r: usize,
    kind: InitKind,
    seed: u64,
) -> Result<InitFactors> {
    if r == 0 {
        return Err(ZitsError::InvalidParameter("R must be at least 1".into()));
    }
    if r == 1 {
        return single_cluster_init(data, d, kind, seed);
    }
    if !d.is_multiple_of(r) {
        return Err(ZitsError::InvalidParameter(format!(
            "rank D = {d} is not a multiple of R = {r}"
        )));
    }
    let l = d / r;
    let k = data.n_cells();
    let labels = initial_partition(data, r, seed)?;
    let mut alpha = Mat::zeros(data.n_loci(), d);
    let mut b0 = Mat::zeros(r, l);
    let mut x0 = Mat::zeros(r, l);
    let mut clamped = 0;
    let mut converged = true;
    for cluster in 0..r {
        let cells: Vec<usize> = (0..k).filter(|&c| labels[c] == cluster).collect();
        if cells.len() < 2 {
            return Err(ZitsError::Clustering(format!(
                "initial cluster {cluster} has {} cells; at least two are needed",
                cells.len()
            )));
        }
        let sub = data.select_cells(&cells)?;
        let mi = moments_init(&sub)?;
        let s = init_scheme(kind, &mi, l, seed.wrapping_add(cluster as u64))?;
        clamped += mi.clamp_report;
        converged &= s.converged;
        alpha.columns_mut(cluster * l, l).copy_from(&s.alpha);
        for c in 0..l {
            b0[(cluster, c)] = s.b0[c];
            x0[(cluster, c)] = s.x0[c];
        }
    }
    let z = Mat::from_fn(k, r, |c, rr| if labels[c] == rr { 1.0 } else { 0.0 });
    Ok(InitFactors {
        alpha,
        w_beta: khatri_rao_rows(&z, &(&z * &b0))?,
        w_xi: khatri_rao_rows(&z, &(&z * &x0))?,
        labels,
        clamp_report: clamped,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_pair_tensor(c: u64, k: usize) -> CountTensor {
        CountTensor::new(1, k, (0..k).map(|kk| (0, 0, kk, c))).unwrap()
    }

    #[test]
    fn all_zero_pair_uses_floors() {
        let data = CountTensor::new(2, 3, [(0, 0, 0, 1)]).unwrap();
        let mi = moments_init(&data).unwrap();
        assert_eq!(mi.lambda0[(0, 1)], LAMBDA_FLOOR);
        assert_eq!(mi.p0[(0, 1)], 1.0 - P_FLOOR);
        assert!(mi.clamp_report >= 2);
    }

    #[test]
    fn constant_counts_clamp_p() {
        let mi = moments_init(&constant_pair_tensor(3, 5)).unwrap();
        assert!((mi.lambda0[(0, 0)] - 2.0).abs() < 1e-15);
        assert_eq!(mi.p0[(0, 0)], P_FLOOR);
        assert_eq!(mi.clamp_report, 1);
    }

    #[test]
    fn single_cell_rejected() {
        assert!(moments_init(&constant_pair_tensor(1, 1)).is_err());
    }

    #[test]
    fn links_match_moments() {
        let data = CountTensor::new(
            3,
            4,
            [(0, 1, 0, 5), (0, 1, 1, 2), (1, 2, 2, 7), (0, 0, 3, 1)],
        )
        .unwrap();
        let mi = moments_init(&data).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((mi.eta0[(i, j)] - mi.lambda0[(i, j)].ln()).abs() < 1e-15);
                let p = mi.p0[(i, j)];
                assert!((mi.theta0[(i, j)] - ((1.0 - p) / p).ln()).abs() < 1e-15);
                assert_eq!(mi.eta0[(i, j)], mi.eta0[(j, i)]);
            }
        }
    }

    #[test]
    fn regression_recovers_exact_weights() {
        let alpha = Mat::from_fn(6, 3, |i, j| {
            ((i + 1) * (j + 2)) as f64 % 5.0 - 1.5 + 0.1 * i as f64
        });
        let w = [0.7, -1.3, 2.1];
        let m = &alpha
            * Mat::from_diagonal(&nalgebra::DVector::from_column_slice(&w))
            * alpha.transpose();
        let est = diag_weight_regression(&m, &alpha).unwrap();
        for d in 0..3 {
            assert!((est[d] - w[d]).abs() < 1e-10);
        }
        assert!(diag_weight_regression(&Mat::zeros(6, 6), &alpha)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn regression_orthonormal_closed_form() {
        let q = Mat::from_fn(5, 2, |i, j| ((i * 3 + j * 7) % 5) as f64 + 0.5 * j as f64)
            .qr()
            .q();
        let m = Mat::from_fn(5, 5, |i, j| (i + j) as f64 * 0.3 - (i * j) as f64 * 0.1);
        let est = diag_weight_regression(&m, &q).unwrap();
        for d in 0..2 {
            let direct = q.column(d).dot(&(&m * q.column(d)));
            assert!((est[d] - direct).abs() < 1e-10);
        }
    }

    fn rank_d_moments(d: usize) -> MomentInit {
        let n = 7;
        let basis = Mat::from_fn(n, d, |i, j| {
            ((i * 5 + j * 3) % 7) as f64 - 3.0 + 0.2 * j as f64
        })
        .qr()
        .q();
        let eta = &basis
            * Mat::from_diagonal(&nalgebra::DVector::from_fn(d, |j, _| {
                4.0 - 1.5 * j as f64 - 0.3
            }))
            * basis.transpose();
        let theta = &basis
            * Mat::from_diagonal(&nalgebra::DVector::from_fn(d, |j, _| 1.0 + j as f64))
            * basis.transpose();
        MomentInit {
            lambda0: eta.map(f64::exp),
            p0: theta.map(|t| 1.0 / (1.0 + t.exp())),
            eta0: eta,
            theta0: theta,
            clamp_report: 0,
        }
    }

    #[test]
    fn eigenb_reconstructs_low_rank() {
        let mi = rank_d_moments(3);
        let s = init_scheme(InitKind::EigenB, &mi, 3, 0).unwrap();
        let rec = &s.alpha
            * Mat::from_diagonal(&nalgebra::DVector::from_column_slice(&s.b0))
            * s.alpha.transpose();
        assert!((rec - &mi.eta0).norm() < 1e-8);
    }

    #[test]
    fn eigenbx_alpha_is_orthonormal() {
        let mi = rank_d_moments(2);
        let s = init_scheme(InitKind::EigenBX, &mi, 2, 0).unwrap();
        let g = s.alpha.transpose() * &s.alpha;
        assert!((g - Mat::identity(2, 2)).amax() < 1e-10);
    }

    #[test]
    fn random_is_seeded() {
        let mi = rank_d_moments(2);
        let a = init_scheme(InitKind::Random, &mi, 2, 11).unwrap();
        let b = init_scheme(InitKind::Random, &mi, 2, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.alpha.iter().all(|v| (-0.5..0.5).contains(v)));
        assert_ne!(a, init_scheme(InitKind::Random, &mi, 2, 12).unwrap());
    }

    #[test]
    fn cp_fits_exact_two_slice_stack() {
        let mi = rank_d_moments(2);
        for kind in [InitKind::Cp, InitKind::CpAvg] {
            let s = init_scheme(kind, &mi, 2, 3).unwrap();
            let rec = &s.alpha
                * Mat::from_diagonal(&nalgebra::DVector::from_column_slice(&s.b0))
                * s.alpha.transpose();
            assert!((rec - &mi.eta0).norm() / mi.eta0.norm() < 1e-4, "{kind}");
        }
    }

    #[test]
    fn scheme_names_round_trip() {
        for k in InitKind::ALL {
            assert_eq!(k.name().parse::<InitKind>().unwrap(), k);
        }
        let err = "bogus".parse::<InitKind>().unwrap_err().to_string();
        assert!(err.contains("eigenbx") && err.contains("cpavg"));
    }

    #[test]
    fn too_many_clusters_is_an_error() {
        let data = CountTensor::new(3, 2, [(0, 1, 0, 1)]).unwrap();
        assert!(multi_cluster_init(&data, 3, 3, InitKind::EigenB, 0).is_err());
    }
}
