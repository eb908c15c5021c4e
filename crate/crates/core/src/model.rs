//! The doubly low-rank ZIP tensor model.
//!
//! Loci embeddings are `α = H Γ` (N × D). Each cell `k` carries two weight
//! rows `β̃_k`, `ξ̃_k`, and the link tensors are
//!
//! ```text
//! η[i, j, k] = Σ_d α[i, d] α[j, d] β̃[k, d]      λ = exp(η)
//! θ[i, j, k] = Σ_d α[i, d] α[j, d] ξ̃[k, d]      p = 1 / (1 + exp(θ))
//! ```
//!
//! The objective is the ZIP negative log-likelihood over modelled pairs
//! `i <= j`, dropping the `ln C!` constant and scaled by `2 / (N (N + 1) K)`.
//!
//! Per-entry losses use forms that never evaluate `exp(exp(η))`:
//! an observed zero costs `softplus(θ) - softplus(θ - λ)`, a positive count
//! `softplus(-θ) + λ - C η`. Only an overflowing `λ` itself is reported as a
//! [`ZitsError::NonFinite`].

use rayon::prelude::*;

use crate::basis::BasisMatrix;
use crate::error::{Result, ZitsError};
use crate::tensor::{
    cp3_sym, diag_frontal, diag_horizontal, mode_product, CountTensor, DenseTensor3, Mat,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockMeta {
    pub r: usize,
    pub l: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub gamma: Mat,
    pub basis: BasisMatrix,
    pub w_beta: Mat,
    pub w_xi: Mat,
    pub blocks: Option<BlockMeta>,
}

impl ModelParams {
    pub fn new(gamma: Mat, basis: BasisMatrix, w_beta: Mat, w_xi: Mat) -> Result<Self> {
        let m = Self {
            gamma,
            basis,
            w_beta,
            w_xi,
            blocks: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_blocks(mut self, r: usize, l: usize) -> Result<Self> {
        if r * l != self.rank() {
            return Err(ZitsError::DimensionMismatch(format!(
                "R * L = {} * {} does not match rank D = {}",
                r,
                l,
                self.rank()
            )));
        }
        self.blocks = Some(BlockMeta { r, l });
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let (q, d) = self.gamma.shape();
        if q != self.basis.n_basis() {
            return Err(ZitsError::DimensionMismatch(format!(
                "gamma has {q} rows but the basis has {} columns",
                self.basis.n_basis()
            )));
        }
        for (name, w) in [("w_beta", &self.w_beta), ("w_xi", &self.w_xi)] {
            if w.ncols() != d || w.nrows() != self.w_beta.nrows() {
                return Err(ZitsError::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {}x{d}",
                    w.nrows(),
                    w.ncols(),
                    self.w_beta.nrows()
                )));
            }
        }
        let finite = self
            .gamma
            .iter()
            .chain(self.w_beta.iter())
            .chain(self.w_xi.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(ZitsError::InvalidParameter(
                "model parameters contain non-finite values".into(),
            ));
        }
        Ok(())
    }

    pub fn alpha(&self) -> Mat {
        self.basis.h() * &self.gamma
    }

    pub fn n_loci(&self) -> usize {
        self.basis.n_loci()
    }

    pub fn n_cells(&self) -> usize {
        self.w_beta.nrows()
    }

    pub fn n_basis(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn rank(&self) -> usize {
        self.gamma.ncols()
    }

    pub fn check_data(&self, data: &CountTensor) -> Result<()> {
        if data.n_loci() != self.n_loci() || data.n_cells() != self.n_cells() {
            return Err(ZitsError::DimensionMismatch(format!(
                "data is N = {}, K = {} but the model is N = {}, K = {}",
                data.n_loci(),
                data.n_cells(),
                self.n_loci(),
                self.n_cells()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkTensors {
    pub eta: DenseTensor3,
    pub theta: DenseTensor3,
}

/// Dense view of a count tensor restricted to its modelled pairs, shared by
/// every likelihood evaluation during a fit.
#[derive(Debug, Clone)]
pub struct Observed {
    n: usize,
    k: usize,
    band: usize,
    counts: Vec<f64>,
}

impl Observed {
    pub fn new(data: &CountTensor) -> Self {
        let n = data.n_loci();
        let mut counts = vec![0.0; n * n * data.n_cells()];
        for (i, j, k, c) in data.iter_full() {
            counts[(k * n + i) * n + j] = c as f64;
        }
        Self {
            n,
            k: data.n_cells(),
            band: data.excluded_band(),
            counts,
        }
    }

    /// Real-valued observations, used for stationarity probes.
    pub fn from_dense(t: &DenseTensor3, band: usize) -> Result<Self> {
        let (n, n2, k) = t.dims();
        if n != n2 || !t.is_symmetric_12() {
            return Err(ZitsError::InvalidData(
                "observations must be symmetric in (i, j)".into(),
            ));
        }
        Ok(Self {
            n,
            k,
            band,
            counts: t.values().to_vec(),
        })
    }

    pub fn n_loci(&self) -> usize {
        self.n
    }

    pub fn n_cells(&self) -> usize {
        self.k
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn count(&self, i: usize, j: usize, k: usize) -> f64 {
        self.counts[(k * self.n + i) * self.n + j]
    }

    /// Normalizer `2 / (N (N + 1) K)`, kept even when a band is excluded.
    pub fn scale(&self) -> f64 {
        2.0 / (self.n * (self.n + 1) * self.k) as f64
    }

    fn check(&self, dims: (usize, usize, usize)) -> Result<()> {
        if dims != (self.n, self.n, self.k) {
            return Err(ZitsError::DimensionMismatch(format!(
                "link tensor is {:?}, observations are {:?}",
                dims,
                (self.n, self.n, self.k)
            )));
        }
        Ok(())
    }
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn build_links(m: &ModelParams) -> Result<LinkTensors> {
    let alpha = m.alpha();
    Ok(LinkTensors {
        eta: cp3_sym(&alpha, &m.w_beta)?,
        theta: cp3_sym(&alpha, &m.w_xi)?,
    })
}

/// `(Λ, P)` from the links: `λ = e^η`, `p = 1 / (1 + e^θ)`.
pub fn lambda_p_of(links: &LinkTensors) -> (DenseTensor3, DenseTensor3) {
    (links.eta.map(f64::exp), links.theta.map(|t| logistic(-t)))
}

pub(crate) fn intensity(eta: f64, i: usize, j: usize, k: usize) -> Result<f64> {
    let lambda = eta.exp();
    if lambda.is_finite() && eta.is_finite() {
        Ok(lambda)
    } else {
        Err(ZitsError::NonFinite {
            i,
            j,
            k,
            what: format!("intensity exp({eta}) overflows"),
        })
    }
}

/// Sums `cell(i, j, k, idx)` over modelled pairs `i <= j` of every slice, with
/// a fixed reduction order.
fn sum_cells(
    obs: &Observed,
    cell: impl Fn(usize, usize, usize, usize) -> Result<f64> + Sync,
) -> Result<f64> {
    let n = obs.n;
    let partial: Vec<Result<f64>> = (0..obs.k)
        .into_par_iter()
        .map(|k| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in (i + obs.band)..n {
                    acc += cell(i, j, k, (k * n + i) * n + j)?;
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = 0.0;
    for p in partial {
        total += p?;
    }
    Ok(total)
}

/// Fills two symmetric per-entry tensors from `cell(i, j, k, idx)` over modelled
/// pairs; unmodelled pairs stay zero.
fn fill_cells(
    obs: &Observed,
    want_second: bool,
    cell: impl Fn(usize, usize, usize, usize) -> Result<(f64, f64)> + Sync,
) -> Result<(DenseTensor3, Option<DenseTensor3>)> {
    let n = obs.n;
    let mut first = DenseTensor3::zeros(n, n, obs.k);
    let mut second = DenseTensor3::zeros(n, n, if want_second { obs.k } else { 0 });
    let slab = n * n;
    let mut second_chunks: Vec<&mut [f64]> = if want_second {
        second.values_mut().chunks_mut(slab).collect()
    } else {
        (0..obs.k).map(|_| <&mut [f64]>::default()).collect()
    };
    first
        .values_mut()
        .par_chunks_mut(slab)
        .zip(second_chunks.par_iter_mut())
        .enumerate()
        .try_for_each(|(k, (a, b))| -> Result<()> {
            for i in 0..n {
                for j in (i + obs.band)..n {
                    let (x, y) = cell(i, j, k, (k * n + i) * n + j)?;
                    a[i * n + j] = x;
                    a[j * n + i] = x;
                    if want_second {
                        b[i * n + j] = y;
                        b[j * n + i] = y;
                    }
                }
            }
            Ok(())
        })?;
    Ok((first, if want_second { Some(second) } else { None }))
}

pub fn nll_from_links(links: &LinkTensors, obs: &Observed) -> Result<f64> {
    obs.check(links.eta.dims())?;
    obs.check(links.theta.dims())?;
    let (eta, theta) = (links.eta.values(), links.theta.values());
    let total = sum_cells(obs, |i, j, k, idx| {
        let (e, t) = (eta[idx], theta[idx]);
        let lambda = intensity(e, i, j, k)?;
        let c = obs.counts[idx];
        Ok(if c == 0.0 {
            softplus(t) - softplus(t - lambda)
        } else {
            softplus(-t) + lambda - c * e
        })
    })?;
    Ok(total * obs.scale())
}

/// Per-entry gradients `(∂L/∂η, ∂L/∂θ)`, mirrored onto `i > j`.
pub fn grad_links_from(
    links: &LinkTensors,
    obs: &Observed,
) -> Result<(DenseTensor3, DenseTensor3)> {
    obs.check(links.eta.dims())?;
    obs.check(links.theta.dims())?;
    let f = obs.scale();
    let (eta, theta) = (links.eta.values(), links.theta.values());
    let (ge, gt) = fill_cells(obs, true, |i, j, k, idx| {
        let (e, t) = (eta[idx], theta[idx]);
        let lambda = intensity(e, i, j, k)?;
        let c = obs.counts[idx];
        Ok(if c == 0.0 {
            // λ / (1 + e^{λ - θ}) and 1/(1 + e^{θ - λ}) - 1/(1 + e^θ), rearranged
            (
                f * lambda * logistic(t - lambda),
                f * (logistic(t) - logistic(t - lambda)),
            )
        } else {
            (f * (lambda - c), f * (logistic(t) - 1.0))
        })
    })?;
    Ok((ge, gt.expect("second tensor requested")))
}

pub fn nll(m: &ModelParams, data: &CountTensor) -> Result<f64> {
    m.check_data(data)?;
    nll_from_links(&build_links(m)?, &Observed::new(data))
}

pub fn grad_links(m: &ModelParams, data: &CountTensor) -> Result<(DenseTensor3, DenseTensor3)> {
    m.check_data(data)?;
    grad_links_from(&build_links(m)?, &Observed::new(data))
}

/// Pushes a symmetric per-entry gradient `G` through the CP map with weights
/// `w`, returning `(∂L/∂α, ∂L/∂w)`.
///
/// With `S_k = G_k α`, `∂L/∂w[k, d] = ½ (Σ_i α[i,d] S_k[i,d] + Σ_i G[i,i,k] α[i,d]²)`
/// and `∂L/∂α[m, d] = Σ_k w[k, d] (S_k[m, d] + G[m,m,k] α[m, d])`.
pub fn contract_link_grad(alpha: &Mat, g: &DenseTensor3, w: &Mat) -> Result<(Mat, Mat)> {
    let (n, n2, k_dim) = g.dims();
    let d = alpha.ncols();
    if n != n2 || alpha.nrows() != n || w.nrows() != k_dim || w.ncols() != d {
        return Err(ZitsError::DimensionMismatch(format!(
            "gradient tensor {:?}, alpha {}x{}, w {}x{}",
            g.dims(),
            alpha.nrows(),
            d,
            w.nrows(),
            w.ncols()
        )));
    }
    let per_cell: Vec<(Mat, Vec<f64>)> = (0..k_dim)
        .into_par_iter()
        .map(|k| {
            // G_k is symmetric, so the row-major slab reads correctly column-major
            let gk = nalgebra::DMatrixView::from_slice(g.slice(k), n, n);
            let mut s = gk * alpha;
            let mut wk = vec![0.0; d];
            for dd in 0..d {
                let mut acc = 0.0;
                for i in 0..n {
                    let a = alpha[(i, dd)];
                    let gii = gk[(i, i)];
                    acc += a * s[(i, dd)] + gii * a * a;
                    s[(i, dd)] += gii * a;
                }
                wk[dd] = 0.5 * acc;
            }
            for dd in 0..d {
                let scale = w[(k, dd)];
                s.column_mut(dd).scale_mut(scale);
            }
            (s, wk)
        })
        .collect();
    let mut grad_alpha = Mat::zeros(n, d);
    let mut grad_w = Mat::zeros(k_dim, d);
    for (k, (s, wk)) in per_cell.into_iter().enumerate() {
        grad_alpha += s;
        for dd in 0..d {
            grad_w[(k, dd)] = wk[dd];
        }
    }
    Ok((grad_alpha, grad_w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Beta,
    Xi,
}

/// `½ Diag(G ×₁ αᵀ ×₂ αᵀ)ᵀ + ½ Diag(G)ᵀ (α ∗ α)`, computed literally.
pub fn grad_w(m: &ModelParams, grad_link: &DenseTensor3, which: Which) -> Result<Mat> {
    let _ = which;
    let alpha = m.alpha();
    let at = alpha.transpose();
    let proj = mode_product(&mode_product(grad_link, &at, 1)?, &at, 2)?;
    // proj is D×D×K; the frontal diagonal gives a D×K matrix
    let first = diag_frontal(&proj)?;
    let second = diag_frontal(grad_link)?.transpose() * alpha.component_mul(&alpha);
    Ok(first.transpose() * 0.5 + second * 0.5)
}

/// Γ-gradient as `Hᵀ ∂L/∂α`, summed over the (η, β̃) and (θ, ξ̃) pairs.
pub fn grad_gamma(
    m: &ModelParams,
    grad_eta: &DenseTensor3,
    grad_theta: &DenseTensor3,
) -> Result<Mat> {
    let alpha = m.alpha();
    let (ga, _) = contract_link_grad(&alpha, grad_eta, &m.w_beta)?;
    let (gx, _) = contract_link_grad(&alpha, grad_theta, &m.w_xi)?;
    Ok(m.basis.h().transpose() * (ga + gx))
}

/// The same Γ-gradient through horizontal-slice diagonals:
/// `D̃iag(G ×₁ Hᵀ ×₂ αᵀ ×₃ wᵀ) + Hᵀ (Diag(G) w ∗ α)` per link.
pub fn grad_gamma_tensor_form(
    m: &ModelParams,
    grad_eta: &DenseTensor3,
    grad_theta: &DenseTensor3,
) -> Result<Mat> {
    let alpha = m.alpha();
    let ht = m.basis.h().transpose();
    let mut out = Mat::zeros(m.n_basis(), m.rank());
    for (g, w) in [(grad_eta, &m.w_beta), (grad_theta, &m.w_xi)] {
        let t = mode_product(
            &mode_product(&mode_product(g, &ht, 1)?, &alpha.transpose(), 2)?,
            &w.transpose(),
            3,
        )?;
        out += diag_horizontal(&t)?;
        out += &ht * (diag_frontal(g)? * w).component_mul(&alpha);
    }
    Ok(out)
}

pub fn nll_poisson_from_links(eta: &DenseTensor3, obs: &Observed) -> Result<f64> {
    obs.check(eta.dims())?;
    let ev = eta.values();
    let total = sum_cells(obs, |i, j, k, idx| {
        let lambda = intensity(ev[idx], i, j, k)?;
        Ok(lambda - obs.counts[idx] * ev[idx])
    })?;
    Ok(total * obs.scale())
}

pub fn grad_poisson_from_links(eta: &DenseTensor3, obs: &Observed) -> Result<DenseTensor3> {
    obs.check(eta.dims())?;
    let f = obs.scale();
    let ev = eta.values();
    let (g, _) = fill_cells(obs, false, |i, j, k, idx| {
        Ok((f * (intensity(ev[idx], i, j, k)? - obs.counts[idx]), 0.0))
    })?;
    Ok(g)
}

/// Pure-Poisson objective: per entry `e^η - C η`, with `θ` unused.
pub fn nll_poisson(m: &ModelParams, data: &CountTensor) -> Result<f64> {
    m.check_data(data)?;
    nll_poisson_from_links(&cp3_sym(&m.alpha(), &m.w_beta)?, &Observed::new(data))
}

pub fn grad_poisson(m: &ModelParams, data: &CountTensor) -> Result<DenseTensor3> {
    m.check_data(data)?;
    grad_poisson_from_links(&cp3_sym(&m.alpha(), &m.w_beta)?, &Observed::new(data))
}
