//! False-zero detection and imputation on a fitted model.

use std::fmt;
use std::str::FromStr;

use crate::error::{Result, ZitsError};
use crate::eval::{detection_metrics, DetectionMetrics};
use crate::model::{build_links, intensity, logistic, ModelParams};
use crate::sim::SimTruth;
use crate::tensor::{CountTensor, DenseTensor3};
use crate::zip::{false_zero_rule, posterior_false_zero_raw, ZeroKind};

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// Observed zeros classified as false zeros, as `(i, j, k)` with `i <= j`,
    /// sorted by `(k, i, j)`.
    pub flags: Vec<(usize, usize, usize)>,
    /// `P(false zero | C = 0)` on observed zeros (0 elsewhere), when requested.
    pub posterior: Option<DenseTensor3>,
    pub zeros_scanned: usize,
}

impl DetectionResult {
    pub fn n_flagged(&self) -> usize {
        self.flags.len()
    }

    pub fn is_flagged(&self, i: usize, j: usize, k: usize) -> bool {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.flags
            .binary_search_by_key(&(k, i, j), |&(a, b, c)| (c, a, b))
            .is_ok()
    }

    /// The flags as a count tensor with `c = 1` at every flagged cell.
    pub fn to_mask(&self, n: usize, k: usize) -> Result<CountTensor> {
        CountTensor::new(n, k, self.flags.iter().map(|&(i, j, kk)| (i, j, kk, 1)))
    }
}

/// Applies the Bayes rule to every modelled observed zero.
pub fn detect(data: &CountTensor, fitted: &ModelParams) -> Result<DetectionResult> {
    detect_with(data, fitted, false)
}

pub fn detect_with(
    data: &CountTensor,
    fitted: &ModelParams,
    posterior: bool,
) -> Result<DetectionResult> {
    fitted.check_data(data)?;
    let links = build_links(fitted)?;
    let (n, kdim) = (data.n_loci(), data.n_cells());
    let mut post = posterior.then(|| DenseTensor3::zeros(n, n, kdim));
    let mut flags = Vec::new();
    let mut scanned = 0;
    for k in 0..kdim {
        for i in 0..n {
            for j in i..n {
                if !data.is_modelled(i, j) || data.get(i, j, k) != 0 {
                    continue;
                }
                scanned += 1;
                let lam = intensity(links.eta.get(i, j, k), i, j, k)?;
                let pp = logistic(-links.theta.get(i, j, k));
                if false_zero_rule(pp, lam) == ZeroKind::FalseZero {
                    flags.push((i, j, k));
                }
                if let Some(t) = post.as_mut() {
                    let v = posterior_false_zero_raw(pp, lam);
                    t.set(i, j, k, v);
                    t.set(j, i, k, v);
                }
            }
        }
    }
    Ok(DetectionResult {
        flags,
        posterior: post,
        zeros_scanned: scanned,
    })
}

/// What a flagged zero is replaced with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImputeMode {
    /// The fitted Poisson intensity `λ̂`.
    Intensity,
    /// The fitted mean `λ̂ (1 - p̂)`.
    #[default]
    Expected,
}

impl fmt::Display for ImputeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ImputeMode::Intensity => "intensity",
            ImputeMode::Expected => "expected",
        })
    }
}

impl FromStr for ImputeMode {
    type Err = ZitsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intensity" => Ok(ImputeMode::Intensity),
            "expected" => Ok(ImputeMode::Expected),
            other => Err(ZitsError::InvalidParameter(format!(
                "unknown impute mode '{other}' (expected intensity or expected)"
            ))),
        }
    }
}

/// `(1 - p̂) λ̂` entrywise, with `1 - p̂ = logistic(θ)` taken directly so it
/// keeps full precision when `p̂` is close to 1.
pub fn expected_tensor(fitted: &ModelParams) -> Result<DenseTensor3> {
    let links = build_links(fitted)?;
    links
        .eta
        .zip_map(&links.theta, |e, t| e.exp() * logistic(t))
}

/// Real-valued copy of `data` (both triangles) with every flagged zero
/// replaced according to `mode`.
pub fn impute(
    data: &CountTensor,
    fitted: &ModelParams,
    flags: &[(usize, usize, usize)],
    mode: ImputeMode,
) -> Result<DenseTensor3> {
    fitted.check_data(data)?;
    let (n, kdim) = (data.n_loci(), data.n_cells());
    for &(i, j, k) in flags {
        if i >= n || j >= n || k >= kdim {
            return Err(ZitsError::InvalidData(format!(
                "flag ({i}, {j}, {k}) is out of range"
            )));
        }
        if data.get(i, j, k) != 0 {
            return Err(ZitsError::InvalidData(format!(
                "flag ({i}, {j}, {k}) marks a nonzero count {}",
                data.get(i, j, k)
            )));
        }
    }
    let links = build_links(fitted)?;
    let mut out = data.to_dense();
    for &(i, j, k) in flags {
        let lam = intensity(links.eta.get(i, j, k), i, j, k)?;
        let v = match mode {
            ImputeMode::Intensity => lam,
            ImputeMode::Expected => lam * logistic(links.theta.get(i, j, k)),
        };
        out.set(i, j, k, v);
        out.set(j, i, k, v);
    }
    Ok(out)
}

/// Scores the flags against the simulated masks over every modelled observed
/// zero, in `(k, i, j)` order.
pub fn score_detection(
    data: &CountTensor,
    result: &DetectionResult,
    truth: &SimTruth,
) -> Result<DetectionMetrics> {
    let (n, kdim) = (data.n_loci(), data.n_cells());
    let mut flags = Vec::new();
    let mut actual = Vec::new();
    for k in 0..kdim {
        for i in 0..n {
            for j in i..n {
                if data.is_modelled(i, j) && data.get(i, j, k) == 0 {
                    flags.push(result.is_flagged(i, j, k));
                    actual.push(truth.is_false_zero(i, j, k));
                }
            }
        }
    }
    detection_metrics(&flags, &actual)
}
