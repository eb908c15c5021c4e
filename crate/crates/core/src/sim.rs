//! Synthetic data with piece-wise constant loci embeddings and block-constant
//! cell embeddings.
//!
//! Loci are cut into `L` contiguous segments; locus `i` in segment `s` gets the
//! embedding row `ᾱ_s + U` with `U` uniform noise, where `ᾱ` has `μ_α` on the
//! diagonal and `μ_α / L` elsewhere. Cells are cut into `R` contiguous blocks
//! whose weight rows are drawn as `Unif[μ, μ + width]`.
//!
//! Every random matrix row draws from its own ChaCha stream, so enlarging `K`
//! leaves the loci embeddings untouched.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, ZitsError};
use crate::model::logistic;
use crate::tensor::{cp3_sym, CountTensor, DenseTensor3, Mat};
use crate::zip::sample_zip_parts;

/// How a scale parameter `σ` turns into the width of its uniform noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseWidth {
    /// Width `w` with `w² / 12 = σ²`, so the noise has variance `σ²`.
    VarianceMatched,
    /// Width `σ` itself.
    Sigma,
}

impl NoiseWidth {
    pub fn width(self, sigma: f64) -> f64 {
        match self {
            NoiseWidth::VarianceMatched => sigma * 12f64.sqrt(),
            NoiseWidth::Sigma => sigma,
        }
    }
}

impl fmt::Display for NoiseWidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseWidth::VarianceMatched => "variance",
            NoiseWidth::Sigma => "sigma",
        })
    }
}

impl FromStr for NoiseWidth {
    type Err = ZitsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "variance" => Ok(NoiseWidth::VarianceMatched),
            "sigma" => Ok(NoiseWidth::Sigma),
            other => Err(ZitsError::InvalidParameter(format!(
                "unknown noise width '{other}' (expected variance or sigma)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub r: usize,
    pub mu_alpha: f64,
    pub sigma_alpha: f64,
    pub mu_beta: f64,
    pub sigma_beta: f64,
    pub mu_xi: f64,
    pub sigma_xi: f64,
    pub noise: NoiseWidth,
    pub seed: u64,
}

impl SimConfig {
    /// Standard settings: `μ_α = 0.5`, `μ_β = 5`, every `σ² = μ / 4`.
    pub fn standard(n: usize, k: usize, l: usize, r: usize, mu_xi: f64, seed: u64) -> Self {
        let (mu_alpha, mu_beta) = (0.5, 5.0);
        Self {
            n,
            k,
            l,
            r,
            mu_alpha,
            sigma_alpha: (mu_alpha / 4.0f64).sqrt(),
            mu_beta,
            sigma_beta: (mu_beta / 4.0f64).sqrt(),
            mu_xi,
            sigma_xi: (mu_xi / 4.0f64).sqrt(),
            noise: NoiseWidth::Sigma,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.l == 0 || self.r == 0 {
            return Err(ZitsError::InvalidParameter(
                "N, K, L and R must all be positive".into(),
            ));
        }
        if self.l > self.n {
            return Err(ZitsError::InvalidParameter(format!(
                "L = {} exceeds N = {}",
                self.l, self.n
            )));
        }
        if self.r > self.k {
            return Err(ZitsError::InvalidParameter(format!(
                "R = {} exceeds K = {}",
                self.r, self.k
            )));
        }
        let scales = [
            ("mu_alpha", self.mu_alpha),
            ("sigma_alpha", self.sigma_alpha),
            ("mu_beta", self.mu_beta),
            ("sigma_beta", self.sigma_beta),
            ("mu_xi", self.mu_xi),
            ("sigma_xi", self.sigma_xi),
        ];
        for (name, v) in scales {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ZitsError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    pub alpha: Mat,
    pub beta: Mat,
    pub xi: Mat,
    pub beta_bar: Mat,
    pub xi_bar: Mat,
    pub lambda: DenseTensor3,
    pub p: DenseTensor3,
    /// Upper-triangle cells with `B = 0`, sorted by `(k, i, j)`.
    pub masked: Vec<(usize, usize, usize)>,
    /// Masked cells whose latent count was positive.
    pub false_zeros: Vec<(usize, usize, usize)>,
    pub labels: Vec<usize>,
}

impl SimTruth {
    pub fn is_false_zero(&self, i: usize, j: usize, k: usize) -> bool {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.false_zeros
            .binary_search_by_key(&(k, i, j), |&(a, b, c)| (c, a, b))
            .is_ok()
    }
}

const STREAM_ALPHA: u64 = 1;
const STREAM_BETA: u64 = 2;
const STREAM_XI: u64 = 3;
const STREAM_COUNTS: u64 = 4;

fn stream(seed: u64, tag: u64, row: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((tag << 32) | row as u64);
    rng
}

/// Group index of item `x` when `total` items are cut into `groups` contiguous
/// pieces of size `floor(total / groups)`, the last one absorbing the rest.
pub fn contiguous_group(x: usize, total: usize, groups: usize) -> usize {
    (x / (total / groups)).min(groups - 1)
}

pub fn simulate(cfg: &SimConfig) -> Result<(CountTensor, SimTruth)> {
    cfg.validate()?;
    let (n, k, l, r) = (cfg.n, cfg.k, cfg.l, cfg.r);

    let center = |s: usize, c: usize| {
        if s == c {
            cfg.mu_alpha
        } else {
            cfg.mu_alpha / l as f64
        }
    };
    let w_alpha = cfg.noise.width(cfg.sigma_alpha);
    let mut alpha = Mat::zeros(n, l);
    for i in 0..n {
        let seg = contiguous_group(i, n, l);
        let mut rng = stream(cfg.seed, STREAM_ALPHA, i);
        for c in 0..l {
            alpha[(i, c)] = center(seg, c) + w_alpha * rng.random::<f64>();
        }
    }

    let block_rows = |tag: u64, mu: f64, sigma: f64| {
        let width = cfg.noise.width(sigma);
        let mut m = Mat::zeros(r, l);
        for rr in 0..r {
            let mut rng = stream(cfg.seed, tag, rr);
            for c in 0..l {
                m[(rr, c)] = mu + width * rng.random::<f64>();
            }
        }
        m
    };
    let beta_bar = block_rows(STREAM_BETA, cfg.mu_beta, cfg.sigma_beta);
    let xi_bar = block_rows(STREAM_XI, cfg.mu_xi, cfg.sigma_xi);
    let labels: Vec<usize> = (0..k).map(|kk| contiguous_group(kk, k, r)).collect();
    let beta = Mat::from_fn(k, l, |kk, c| beta_bar[(labels[kk], c)]);
    let xi = Mat::from_fn(k, l, |kk, c| xi_bar[(labels[kk], c)]);

    let eta = cp3_sym(&alpha, &beta)?;
    let theta = cp3_sym(&alpha, &xi)?;
    let lambda = eta.map(f64::exp);
    let p = theta.map(|t| logistic(-t));

    let mut entries = Vec::new();
    let mut masked = Vec::new();
    let mut false_zeros = Vec::new();
    for kk in 0..k {
        let mut rng = stream(cfg.seed, STREAM_COUNTS, kk);
        for i in 0..n {
            for j in i..n {
                let lam = lambda.get(i, j, kk);
                let (keep, latent) =
                    sample_zip_parts(p.get(i, j, kk), lam, &mut rng).map_err(|e| {
                        ZitsError::NonFinite {
                            i,
                            j,
                            k: kk,
                            what: format!("cannot sample the simulated cell: {e}"),
                        }
                    })?;
                if keep {
                    if latent > 0 {
                        entries.push((i, j, kk, latent));
                    }
                } else {
                    masked.push((i, j, kk));
                    if latent > 0 {
                        false_zeros.push((i, j, kk));
                    }
                }
            }
        }
    }
    let data = CountTensor::new(n, k, entries)?;
    Ok((
        data,
        SimTruth {
            alpha,
            beta,
            xi,
            beta_bar,
            xi_bar,
            lambda,
            p,
            masked,
            false_zeros,
            labels,
        },
    ))
}

/// Fraction of upper-triangle cells that are observed zeros.
pub fn zero_fraction(data: &CountTensor) -> f64 {
    let total = data.n_cells_upper();
    1.0 - data.nnz() as f64 / total as f64
}
