//! Bernoulli variant for binary adjacency tensors: `C ~ Bernoulli(q)` with
//! `q = logistic(θ)` and `θ` built from `(α, ξ̃)` exactly as in the ZIP model.

use crate::basis::BasisMatrix;
use crate::error::{Result, ZitsError};
use crate::model::{contract_link_grad, logistic, softplus, ModelParams, Observed};
use crate::tensor::{cp3_sym, CountTensor, DenseTensor3, Mat};

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryParams {
    pub gamma: Mat,
    pub basis: BasisMatrix,
    pub w_xi: Mat,
}

impl BinaryParams {
    pub fn alpha(&self) -> Mat {
        self.basis.h() * &self.gamma
    }

    pub fn theta(&self) -> Result<DenseTensor3> {
        cp3_sym(&self.alpha(), &self.w_xi)
    }

    /// Embeds into [`ModelParams`] with an all-zero `β̃` block.
    pub fn into_model(self) -> Result<ModelParams> {
        let w_beta = Mat::zeros(self.w_xi.nrows(), self.w_xi.ncols());
        ModelParams::new(self.gamma, self.basis, w_beta, self.w_xi)
    }

    pub fn from_model(m: &ModelParams) -> Self {
        Self {
            gamma: m.gamma.clone(),
            basis: m.basis.clone(),
            w_xi: m.w_xi.clone(),
        }
    }
}

/// Checks that every stored count is 1, or binarizes when asked.
pub fn binary_data(data: &CountTensor, binarize: bool) -> Result<CountTensor> {
    if binarize {
        return Ok(data.binarized());
    }
    if let Some((i, j, k, c)) = data.iter_upper().find(|e| e.3 > 1) {
        return Err(ZitsError::InvalidData(format!(
            "entry ({i}, {j}, {k}) = {c} is not binary; pass the binarize flag to threshold counts"
        )));
    }
    Ok(data.clone())
}

fn check(theta: &DenseTensor3, obs: &Observed) -> Result<()> {
    let n = obs.n_loci();
    if theta.dims() != (n, n, obs.n_cells()) {
        return Err(ZitsError::DimensionMismatch(format!(
            "theta is {:?}, observations are {:?}",
            theta.dims(),
            (n, n, obs.n_cells())
        )));
    }
    Ok(())
}

/// `Σ_{i<=j, k} softplus(θ) - C θ` over modelled pairs (not normalized).
pub fn nll_binary_from_links(theta: &DenseTensor3, obs: &Observed) -> Result<f64> {
    check(theta, obs)?;
    let n = obs.n_loci();
    let mut total = 0.0;
    for k in 0..obs.n_cells() {
        for i in 0..n {
            for j in (i + obs.band())..n {
                let t = theta.get(i, j, k);
                total += softplus(t) - obs.count(i, j, k) * t;
            }
        }
    }
    Ok(total)
}

/// Per-entry gradient `logistic(θ) - C`, mirrored onto `i > j`.
pub fn grad_binary_links(theta: &DenseTensor3, obs: &Observed) -> Result<DenseTensor3> {
    check(theta, obs)?;
    let n = obs.n_loci();
    let mut g = DenseTensor3::zeros(n, n, obs.n_cells());
    for k in 0..obs.n_cells() {
        for i in 0..n {
            for j in (i + obs.band())..n {
                let v = logistic(theta.get(i, j, k)) - obs.count(i, j, k);
                g.set(i, j, k, v);
                g.set(j, i, k, v);
            }
        }
    }
    Ok(g)
}

pub fn nll_binary(bp: &BinaryParams, data: &CountTensor, binarize: bool) -> Result<f64> {
    let data = binary_data(data, binarize)?;
    nll_binary_from_links(&bp.theta()?, &Observed::new(&data))
}

/// `(∂/∂Γ, ∂/∂ξ̃)` of [`nll_binary`].
pub fn grad_binary(bp: &BinaryParams, data: &CountTensor, binarize: bool) -> Result<(Mat, Mat)> {
    let data = binary_data(data, binarize)?;
    let g = grad_binary_links(&bp.theta()?, &Observed::new(&data))?;
    let (ga, gx) = contract_link_grad(&bp.alpha(), &g, &bp.w_xi)?;
    Ok((bp.basis.h().transpose() * ga, gx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_cell(theta: f64, c: u64) -> (BinaryParams, CountTensor) {
        // with α = 1 and ξ̃ = θ the single link equals θ
        let bp = BinaryParams {
            gamma: Mat::from_element(1, 1, 1.0),
            basis: BasisMatrix::identity(1),
            w_xi: Mat::from_element(1, 1, theta),
        };
        let entries: Vec<_> = if c > 0 { vec![(0, 0, 0, c)] } else { vec![] };
        (bp, CountTensor::new(1, 1, entries).unwrap())
    }

    #[test]
    fn zero_links_cost_ln2() {
        let bp = BinaryParams {
            gamma: Mat::zeros(3, 2),
            basis: BasisMatrix::identity(3),
            w_xi: Mat::zeros(2, 2),
        };
        let data = CountTensor::new(3, 2, [(0, 1, 0, 1), (2, 2, 1, 1)]).unwrap();
        let v = nll_binary(&bp, &data, false).unwrap();
        assert!((v - 12.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn hand_value() {
        let (bp, data) = one_cell(3.0, 1);
        let v = nll_binary(&bp, &data, false).unwrap();
        assert!((v - (-3.0 + (1.0 + 3f64.exp()).ln())).abs() < 1e-14);
        assert!((v - 0.04859).abs() < 1e-5);
    }

    #[test]
    fn counts_above_one_need_binarize() {
        let (bp, _) = one_cell(0.5, 0);
        let data = CountTensor::new(1, 1, [(0, 0, 0, 4)]).unwrap();
        assert!(nll_binary(&bp, &data, false).is_err());
        let a = nll_binary(&bp, &data, true).unwrap();
        let (_, ones) = one_cell(0.5, 1);
        assert_eq!(a, nll_binary(&bp, &ones, false).unwrap());
    }

    #[test]
    fn stationary_at_logistic_probe() {
        let theta = DenseTensor3::from_fn(2, 2, 2, |i, j, k| 0.3 * (i + j) as f64 - 0.7 * k as f64);
        let probe = theta.map(logistic);
        let obs = Observed::from_dense(&probe, 0).unwrap();
        let g = grad_binary_links(&theta, &obs).unwrap();
        assert!(g.values().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn moving_towards_label_lowers_loss() {
        for c in [0u64, 1] {
            let (lo, data) = one_cell(-1.0, c);
            let (hi, _) = one_cell(1.0, c);
            let (a, b) = (
                nll_binary(&lo, &data, false).unwrap(),
                nll_binary(&hi, &data, false).unwrap(),
            );
            if c == 1 {
                assert!(b < a);
            } else {
                assert!(a < b);
            }
        }
    }
}
