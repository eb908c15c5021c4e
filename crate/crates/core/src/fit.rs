//! Alternating projected gradient descent with Armijo backtracking, and the
//! block-structured cluster extraction that follows it.
//!
//! Each sweep updates `Γ`, then `β̃`, then `ξ̃` (Gauss–Seidel), every block with
//! its own step size. A sweep stops the fit once the largest relative Frobenius
//! change among the updated blocks drops below `rel_tol`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{build_basis, BasisKind};
use crate::binary::{binary_data, grad_binary_links, nll_binary_from_links};
use crate::error::{Result, ZitsError};
use crate::init::{multi_cluster_init, InitKind};
use crate::model::{
    contract_link_grad, grad_links_from, grad_poisson_from_links, nll_from_links,
    nll_poisson_from_links, LinkTensors, ModelParams, Observed,
};
use crate::tensor::{cp3_sym, khatri_rao_rows, CountTensor, DenseTensor3, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Zip,
    Poisson,
    Binary,
}

impl ModelKind {
    fn blocks(self) -> &'static [Block] {
        match self {
            ModelKind::Zip => &[Block::Gamma, Block::Beta, Block::Xi],
            ModelKind::Poisson => &[Block::Gamma, Block::Beta],
            ModelKind::Binary => &[Block::Gamma, Block::Xi],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Zip => "zip",
            ModelKind::Poisson => "poisson",
            ModelKind::Binary => "binary",
        })
    }
}

impl FromStr for ModelKind {
    type Err = ZitsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zip" => Ok(ModelKind::Zip),
            "poisson" => Ok(ModelKind::Poisson),
            "binary" => Ok(ModelKind::Binary),
            other => Err(ZitsError::InvalidParameter(format!(
                "unknown model '{other}' (expected zip, poisson or binary)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Gamma,
    Beta,
    Xi,
}

impl Block {
    fn slot(self) -> usize {
        match self {
            Block::Gamma => 0,
            Block::Beta => 1,
            Block::Xi => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub initial_step: f64,
    /// Largest trial step.
    pub max_step: f64,
    /// When a block's first trial `t` is accepted, its next first trial is
    /// `min(step_growth * t, max_step)`; otherwise it is the accepted step.
    pub step_growth: f64,
    /// Smallest trial step before a block counts as stalled.
    pub min_step: f64,
    pub beta_max: f64,
    pub xi_max: f64,
    pub seed: u64,
    pub exclude_diag_band: usize,
    pub model: ModelKind,
    /// Threshold counts to 0/1 for the binary model instead of rejecting them.
    pub binarize: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            rel_tol: 1e-4,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            initial_step: 1.0,
            max_step: 1e8,
            step_growth: 2.0,
            min_step: 1e-20,
            beta_max: 50.0,
            xi_max: 50.0,
            seed: 0,
            exclude_diag_band: 0,
            model: ModelKind::Zip,
            binarize: false,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("armijo_c1", self.armijo_c1),
            ("backtrack", self.backtrack),
            ("initial_step", self.initial_step),
            ("max_step", self.max_step),
            ("min_step", self.min_step),
            ("beta_max", self.beta_max),
            ("xi_max", self.xi_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ZitsError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.rel_tol >= 1.0 || self.armijo_c1 >= 1.0 || self.backtrack >= 1.0 {
            return Err(ZitsError::InvalidParameter(
                "rel_tol, armijo_c1 and backtrack must be below 1".into(),
            ));
        }
        if self.step_growth < 1.0 || !self.step_growth.is_finite() {
            return Err(ZitsError::InvalidParameter(format!(
                "step_growth must be at least 1, got {}",
                self.step_growth
            )));
        }
        if self.max_iters == 0 {
            return Err(ZitsError::InvalidParameter(
                "max_iters must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Objective at the start followed by its value after every sweep.
    pub nll_trace: Vec<f64>,
    /// Relative changes `[Γ, β̃, ξ̃]` per sweep (0 for blocks not updated).
    pub rel_changes: Vec<[f64; 3]>,
    /// Last accepted step per block (0 if none was accepted).
    pub steps: [f64; 3],
    pub iterations: usize,
    pub converged: bool,
    /// Set when no block could make Armijo progress during a sweep.
    pub stalled: bool,
    pub wall_time: f64,
}

impl FitReport {
    pub fn initial_nll(&self) -> f64 {
        self.nll_trace[0]
    }

    pub fn final_nll(&self) -> f64 {
        *self
            .nll_trace
            .last()
            .expect("trace holds the initial value")
    }
}

struct Objective<'a> {
    kind: ModelKind,
    obs: &'a Observed,
}

impl Objective<'_> {
    fn value(&self, links: &LinkTensors) -> Result<f64> {
        match self.kind {
            ModelKind::Zip => nll_from_links(links, self.obs),
            ModelKind::Poisson => nll_poisson_from_links(&links.eta, self.obs),
            ModelKind::Binary => {
                Ok(nll_binary_from_links(&links.theta, self.obs)? * self.obs.scale())
            }
        }
    }

    /// Normalized per-entry gradients `(∂/∂η, ∂/∂θ)`; unused links get `None`.
    fn link_grads(
        &self,
        links: &LinkTensors,
    ) -> Result<(Option<DenseTensor3>, Option<DenseTensor3>)> {
        match self.kind {
            ModelKind::Zip => {
                let (ge, gt) = grad_links_from(links, self.obs)?;
                Ok((Some(ge), Some(gt)))
            }
            ModelKind::Poisson => Ok((Some(grad_poisson_from_links(&links.eta, self.obs)?), None)),
            ModelKind::Binary => {
                let f = self.obs.scale();
                Ok((
                    None,
                    Some(grad_binary_links(&links.theta, self.obs)?.map(|v| v * f)),
                ))
            }
        }
    }

    fn block_grad(
        &self,
        block: Block,
        m: &ModelParams,
        alpha: &Mat,
        links: &LinkTensors,
    ) -> Result<Mat> {
        let (ge, gt) = self.link_grads(links)?;
        match block {
            Block::Gamma => {
                let mut ga = Mat::zeros(alpha.nrows(), alpha.ncols());
                if let Some(ge) = &ge {
                    ga += contract_link_grad(alpha, ge, &m.w_beta)?.0;
                }
                if let Some(gt) = &gt {
                    ga += contract_link_grad(alpha, gt, &m.w_xi)?.0;
                }
                Ok(m.basis.h().transpose() * ga)
            }
            Block::Beta => Ok(contract_link_grad(
                alpha,
                ge.as_ref().expect("beta block needs eta"),
                &m.w_beta,
            )?
            .1),
            Block::Xi => {
                Ok(
                    contract_link_grad(alpha, gt.as_ref().expect("xi block needs theta"), &m.w_xi)?
                        .1,
                )
            }
        }
    }
}

fn project(x: &mut Mat, bound: Option<f64>) {
    if let Some(b) = bound {
        x.iter_mut().for_each(|v| *v = v.clamp(-b, b));
    }
}

fn block_value(m: &ModelParams, block: Block) -> &Mat {
    match block {
        Block::Gamma => &m.gamma,
        Block::Beta => &m.w_beta,
        Block::Xi => &m.w_xi,
    }
}

/// Rebuilds the links touched by `block`; the other link is reused.
fn relink(
    kind: ModelKind,
    block: Block,
    m: &ModelParams,
    alpha: &Mat,
    old: &LinkTensors,
) -> Result<LinkTensors> {
    let want_eta = kind != ModelKind::Binary && block != Block::Xi;
    let want_theta = kind != ModelKind::Poisson && block != Block::Beta;
    Ok(LinkTensors {
        eta: if want_eta {
            cp3_sym(alpha, &m.w_beta)?
        } else {
            old.eta.clone()
        },
        theta: if want_theta {
            cp3_sym(alpha, &m.w_xi)?
        } else {
            old.theta.clone()
        },
    })
}

fn is_non_finite(e: &ZitsError) -> bool {
    matches!(e, ZitsError::NonFinite { .. })
}

/// Prepares the data the way [`fit`] sees it: the binary model thresholds or
/// checks counts, and a configured diagonal band is excluded.
pub fn prepare_data(data: &CountTensor, cfg: &FitConfig) -> Result<CountTensor> {
    let data = if cfg.model == ModelKind::Binary {
        binary_data(data, cfg.binarize)?
    } else {
        data.clone()
    };
    let band = data.excluded_band().max(cfg.exclude_diag_band);
    Ok(data.with_excluded_band(band))
}

/// The objective `fit` minimizes for the configured model, at `m`.
pub fn objective_value(data: &CountTensor, m: &ModelParams, cfg: &FitConfig) -> Result<f64> {
    m.check_data(data)?;
    let data = prepare_data(data, cfg)?;
    let obs = Observed::new(&data);
    let alpha = m.alpha();
    let links = LinkTensors {
        eta: cp3_sym(&alpha, &m.w_beta)?,
        theta: cp3_sym(&alpha, &m.w_xi)?,
    };
    Objective {
        kind: cfg.model,
        obs: &obs,
    }
    .value(&links)
}

pub fn fit(
    data: &CountTensor,
    init: &ModelParams,
    cfg: &FitConfig,
) -> Result<(ModelParams, FitReport)> {
    let start = Instant::now();
    // starting from the normalized gauge makes the path independent of how
    // scale was split between Γ and the weights
    let mut init = init.clone();
    apply_column_gauge(&mut init);
    let (mut m, mut report) = descend(data, &init, cfg)?;
    apply_column_gauge(&mut m);
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((m, report))
}

/// The descent loop itself, before the column gauge is applied.
fn descend(
    data: &CountTensor,
    init: &ModelParams,
    cfg: &FitConfig,
) -> Result<(ModelParams, FitReport)> {
    cfg.validate()?;
    init.validate()?;
    init.check_data(data)?;
    let data = prepare_data(data, cfg)?;
    let obs = Observed::new(&data);
    let objective = Objective {
        kind: cfg.model,
        obs: &obs,
    };

    let mut m = init.clone();
    if cfg.model == ModelKind::Binary {
        m.w_beta.fill(0.0);
    }
    project(&mut m.w_beta, Some(cfg.beta_max));
    project(&mut m.w_xi, Some(cfg.xi_max));
    let mut alpha = m.alpha();
    let mut links = LinkTensors {
        eta: cp3_sym(&alpha, &m.w_beta)?,
        theta: cp3_sym(&alpha, &m.w_xi)?,
    };
    let mut f = objective.value(&links)?;
    if !f.is_finite() {
        return Err(ZitsError::Numerical(format!(
            "objective at the initial point is {f}"
        )));
    }

    let mut report = FitReport {
        nll_trace: vec![f],
        rel_changes: Vec::new(),
        steps: [0.0; 3],
        iterations: 0,
        converged: false,
        stalled: false,
        wall_time: 0.0,
    };
    let blocks = cfg.model.blocks();
    let mut next_trial = [cfg.initial_step.min(cfg.max_step); 3];

    while report.iterations < cfg.max_iters {
        report.iterations += 1;
        let mut changes = [0.0; 3];
        let mut moved = false;
        let mut stationary = true;

        for &block in blocks {
            let slot = block.slot();
            let g = objective.block_grad(block, &m, &alpha, &links)?;
            if g.norm() <= 1e-12 {
                continue;
            }
            stationary = false;
            let bound = match block {
                Block::Gamma => None,
                Block::Beta => Some(cfg.beta_max),
                Block::Xi => Some(cfg.xi_max),
            };
            let old = block_value(&m, block).clone();
            let mut step = next_trial[slot];
            let mut accepted = None;
            while step >= cfg.min_step {
                let mut x = &old - &g * step;
                project(&mut x, bound);
                let mut trial = m.clone();
                match block {
                    Block::Gamma => trial.gamma = x.clone(),
                    Block::Beta => trial.w_beta = x.clone(),
                    Block::Xi => trial.w_xi = x.clone(),
                }
                let trial_alpha = if block == Block::Gamma {
                    trial.alpha()
                } else {
                    alpha.clone()
                };
                let outcome = relink(cfg.model, block, &trial, &trial_alpha, &links)
                    .and_then(|l| objective.value(&l).map(|v| (l, v)));
                match outcome {
                    Ok((l, v)) if v.is_finite() => {
                        let decrease = g.dot(&(&old - &x));
                        if v <= f - cfg.armijo_c1 * decrease {
                            accepted = Some((trial, trial_alpha, l, v));
                            break;
                        }
                    }
                    Ok(_) => {}
                    Err(e) if is_non_finite(&e) => {}
                    Err(e) => return Err(e),
                }
                step *= cfg.backtrack;
            }
            if let Some((trial, trial_alpha, l, v)) = accepted {
                let prev_norm = old.norm();
                let delta = (block_value(&trial, block) - &old).norm();
                changes[slot] = if prev_norm > 0.0 {
                    delta / prev_norm
                } else {
                    delta
                };
                moved |= delta > 0.0;
                report.steps[slot] = step;
                // grow only when the first trial was already good enough
                next_trial[slot] = if step == next_trial[slot] {
                    (step * cfg.step_growth).min(cfg.max_step)
                } else {
                    step
                };
                m = trial;
                alpha = trial_alpha;
                links = l;
                f = v;
            }
        }

        report.nll_trace.push(f);
        report.rel_changes.push(changes);
        if stationary {
            report.converged = true;
            break;
        }
        if !moved {
            report.stalled = true;
            report.converged = true;
            break;
        }
        if changes.iter().cloned().fold(0.0, f64::max) < cfg.rel_tol {
            report.converged = true;
            break;
        }
    }

    Ok((m, report))
}

/// Rescales every nonzero column of `Γ` to unit norm and multiplies the matching
/// weight columns by the squared norm, which leaves both link tensors unchanged.
pub fn apply_column_gauge(m: &mut ModelParams) {
    for d in 0..m.rank() {
        let c = m.gamma.column(d).norm();
        if c > 0.0 && c.is_finite() {
            m.gamma.column_mut(d).scale_mut(1.0 / c);
            m.w_beta.column_mut(d).scale_mut(c * c);
            m.w_xi.column_mut(d).scale_mut(c * c);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSolution {
    pub labels: Vec<usize>,
    pub beta_bar: Mat,
    pub xi_bar: Mat,
    /// `J = ‖β̃ − (Z ⊙ Z β̄)‖² + ‖ξ̃ − (Z ⊙ Z ξ̄)‖²`.
    pub objective: f64,
}

impl ClusterSolution {
    pub fn n_clusters(&self) -> usize {
        self.beta_bar.nrows()
    }

    /// One-hot `K × R` membership matrix.
    pub fn z(&self) -> Mat {
        Mat::from_fn(self.labels.len(), self.n_clusters(), |k, r| {
            f64::from(self.labels[k] == r)
        })
    }

    /// Block-sparse weights `Z ⊙ (Z β̄)` and `Z ⊙ (Z ξ̄)`: every cell carries its
    /// cluster's mean rows in its own column block and zeros elsewhere.
    pub fn structured_weights(&self) -> Result<(Mat, Mat)> {
        let z = self.z();
        Ok((
            khatri_rao_rows(&z, &(&z * &self.beta_bar))?,
            khatri_rao_rows(&z, &(&z * &self.xi_bar))?,
        ))
    }

    /// `fitted` with its free weight rows replaced by [`Self::structured_weights`].
    pub fn structured_params(&self, fitted: &ModelParams) -> Result<ModelParams> {
        let (wb, wx) = self.structured_weights()?;
        if wb.shape() != fitted.w_beta.shape() {
            return Err(ZitsError::DimensionMismatch(format!(
                "cluster solution gives {:?} weights, the model has {:?}",
                wb.shape(),
                fitted.w_beta.shape()
            )));
        }
        let mut m = fitted.clone();
        m.w_beta = wb;
        m.w_xi = wx;
        Ok(m)
    }
}

struct BlockCost<'a> {
    wb: &'a Mat,
    wx: &'a Mat,
    l: usize,
    row_norm: Vec<f64>,
}

impl BlockCost<'_> {
    /// Squared distance from cell `k`'s rows to the block-sparse target that
    /// puts `(β̄_r, ξ̄_r)` in column block `r`.
    fn cost(&self, k: usize, r: usize, beta_bar: &Mat, xi_bar: &Mat) -> f64 {
        let mut c = self.row_norm[k];
        for col in 0..self.l {
            let (b, x) = (
                self.wb[(k, r * self.l + col)],
                self.wx[(k, r * self.l + col)],
            );
            c += (b - beta_bar[(r, col)]).powi(2) - b * b;
            c += (x - xi_bar[(r, col)]).powi(2) - x * x;
        }
        c.max(0.0)
    }

    fn seed_from(&self, k: usize, r: usize, beta_bar: &mut Mat, xi_bar: &mut Mat) {
        for col in 0..self.l {
            beta_bar[(r, col)] = self.wb[(k, r * self.l + col)];
            xi_bar[(r, col)] = self.wx[(k, r * self.l + col)];
        }
    }

    fn means(&self, labels: &[usize], r_count: usize) -> (Mat, Mat, Vec<usize>) {
        let mut bb = Mat::zeros(r_count, self.l);
        let mut xb = Mat::zeros(r_count, self.l);
        let mut sizes = vec![0usize; r_count];
        for (k, &r) in labels.iter().enumerate() {
            sizes[r] += 1;
            for col in 0..self.l {
                bb[(r, col)] += self.wb[(k, r * self.l + col)];
                xb[(r, col)] += self.wx[(k, r * self.l + col)];
            }
        }
        for r in 0..r_count {
            if sizes[r] > 0 {
                let s = 1.0 / sizes[r] as f64;
                bb.row_mut(r).scale_mut(s);
                xb.row_mut(r).scale_mut(s);
            }
        }
        (bb, xb, sizes)
    }
}

const CLUSTER_RESTARTS: u64 = 10;
/// Problems with at most this many assignments are solved by enumeration.
const EXHAUSTIVE_LIMIT: f64 = 65536.0;
const CLUSTER_MAX_SWEEPS: usize = 300;

/// Minimizes the block-structured objective `J` over memberships and block
/// means. Small problems (at most 65536 assignments) are enumerated exactly;
/// otherwise Lloyd-style alternation, refined by single-cell moves, runs from
/// `10` seeded restarts.
pub fn extract_clusters(
    w_beta: &Mat,
    w_xi: &Mat,
    r: usize,
    l: usize,
    seed: u64,
) -> Result<ClusterSolution> {
    let k = w_beta.nrows();
    if w_xi.shape() != w_beta.shape() {
        return Err(ZitsError::DimensionMismatch(format!(
            "w_beta is {:?} but w_xi is {:?}",
            w_beta.shape(),
            w_xi.shape()
        )));
    }
    if r == 0 || l == 0 || r * l != w_beta.ncols() {
        return Err(ZitsError::DimensionMismatch(format!(
            "R * L = {r} * {l} does not match the {} weight columns",
            w_beta.ncols()
        )));
    }
    if k < r {
        return Err(ZitsError::Clustering(format!(
            "cannot split {k} cells into {r} clusters"
        )));
    }
    let row_norm = (0..k)
        .map(|i| w_beta.row(i).norm_squared() + w_xi.row(i).norm_squared())
        .collect();
    let bc = BlockCost {
        wb: w_beta,
        wx: w_xi,
        l,
        row_norm,
    };

    if (r as f64).powi(k as i32) <= EXHAUSTIVE_LIMIT {
        return Ok(exhaustive_blocks(&bc, k, r));
    }
    let mut best: Option<ClusterSolution> = None;
    for restart in 0..CLUSTER_RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart);
        let sol = lloyd_blocks(&bc, k, r, &mut rng);
        if best.as_ref().is_none_or(|b| sol.objective < b.objective) {
            best = Some(sol);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn assign(bc: &BlockCost, k: usize, r: usize, bb: &Mat, xb: &Mat) -> (Vec<usize>, Vec<f64>) {
    (0..k)
        .map(|i| {
            let mut best = (0, f64::INFINITY);
            for c in 0..r {
                let v = bc.cost(i, c, bb, xb);
                if v < best.1 {
                    best = (c, v);
                }
            }
            best
        })
        .unzip()
}

fn lloyd_blocks(bc: &BlockCost, k: usize, r: usize, rng: &mut ChaCha8Rng) -> ClusterSolution {
    let l = bc.l;
    let mut bb = Mat::zeros(r, l);
    let mut xb = Mat::zeros(r, l);

    // kmeans++-style seeding: cluster c is seeded from a cell drawn with
    // probability proportional to its cost under the clusters seeded so far.
    let first = rng.random_range(0..k);
    bc.seed_from(first, 0, &mut bb, &mut xb);
    for c in 1..r {
        let d2: Vec<f64> = (0..k)
            .map(|i| {
                (0..c)
                    .map(|s| bc.cost(i, s, &bb, &xb))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            d2.iter()
                .position(|&v| {
                    u -= v;
                    u < 0.0
                })
                .unwrap_or(k - 1)
        } else {
            rng.random_range(0..k)
        };
        bc.seed_from(pick, c, &mut bb, &mut xb);
    }

    let (mut labels, mut costs) = assign(bc, k, r, &bb, &xb);
    for _ in 0..CLUSTER_MAX_SWEEPS {
        let (nb, nx, sizes) = bc.means(&labels, r);
        bb = nb;
        xb = nx;
        // an empty cluster is re-seeded at the currently worst-fitted cell
        for c in 0..r {
            if sizes[c] == 0 {
                let worst = (0..k)
                    .max_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(b.cmp(&a)))
                    .expect("k >= 1");
                bc.seed_from(worst, c, &mut bb, &mut xb);
                costs[worst] = 0.0;
            }
        }
        let (nl, nc) = assign(bc, k, r, &bb, &xb);
        let changed = nl != labels;
        labels = nl;
        costs = nc;
        if !changed {
            break;
        }
    }
    hartigan_refine(bc, &mut labels, r);
    finish(bc, labels, r)
}

fn finish(bc: &BlockCost, labels: Vec<usize>, r: usize) -> ClusterSolution {
    let (bb, xb, _) = bc.means(&labels, r);
    let objective = (0..labels.len())
        .map(|i| bc.cost(i, labels[i], &bb, &xb))
        .sum();
    ClusterSolution {
        labels,
        beta_bar: bb,
        xi_bar: xb,
        objective,
    }
}

/// The global minimizer over every assignment with no empty cluster; the
/// first one in lexicographic order wins ties.
fn exhaustive_blocks(bc: &BlockCost, k: usize, r: usize) -> ClusterSolution {
    let l = bc.l;
    let mut labels = vec![0usize; k];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut sums = vec![vec![0.0; 2 * l]; r];
    let mut sizes = vec![0usize; r];
    loop {
        sizes.iter_mut().for_each(|s| *s = 0);
        sums.iter_mut()
            .for_each(|s| s.iter_mut().for_each(|v| *v = 0.0));
        for (i, &c) in labels.iter().enumerate() {
            sizes[c] += 1;
            for col in 0..l {
                sums[c][col] += bc.wb[(i, c * l + col)];
                sums[c][l + col] += bc.wx[(i, c * l + col)];
            }
        }
        if sizes.iter().all(|&n| n > 0) {
            // J up to the constant Σ‖w_k‖²
            let gain: f64 = (0..r)
                .map(|c| sums[c].iter().map(|v| v * v).sum::<f64>() / sizes[c] as f64)
                .sum();
            if best.as_ref().is_none_or(|(g, _)| -gain < *g) {
                best = Some((-gain, labels.clone()));
            }
        }
        // next assignment, last cell varying fastest
        let mut pos = k;
        loop {
            if pos == 0 {
                let (_, labels) = best.expect("k >= r gives a feasible assignment");
                return finish(bc, labels, r);
            }
            pos -= 1;
            labels[pos] += 1;
            if labels[pos] < r {
                break;
            }
            labels[pos] = 0;
        }
    }
}

/// Single-cell moves after Lloyd has settled. With `s_r` the sum of the
/// cluster-`r` blocks over its members, `J = Σ_k ‖w_k‖² − Σ_r ‖s_r‖² / n_r`, so
/// the exact change of a move is cheap; Lloyd's fixed-mean assignment misses
/// moves that only pay off once the means follow.
fn hartigan_refine(bc: &BlockCost, labels: &mut [usize], r: usize) {
    let l = bc.l;
    let block = |k: usize, c: usize| -> Vec<f64> {
        (0..l)
            .map(|col| bc.wb[(k, c * l + col)])
            .chain((0..l).map(|col| bc.wx[(k, c * l + col)]))
            .collect()
    };
    let mut sums = vec![vec![0.0; 2 * l]; r];
    let mut sizes = vec![0usize; r];
    for (k, &c) in labels.iter().enumerate() {
        sizes[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(block(k, c)) {
            *s += v;
        }
    }
    let norm2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let shifted = |s: &[f64], x: &[f64], sign: f64| {
        norm2(
            &s.iter()
                .zip(x)
                .map(|(a, b)| a + sign * b)
                .collect::<Vec<_>>(),
        )
    };
    for _ in 0..CLUSTER_MAX_SWEEPS {
        let mut moved = false;
        for k in 0..labels.len() {
            let a = labels[k];
            if sizes[a] == 1 {
                continue;
            }
            let xa = block(k, a);
            let na = sizes[a] as f64;
            let leave = norm2(&sums[a]) / na - shifted(&sums[a], &xa, -1.0) / (na - 1.0);
            let mut best: Option<(usize, f64, Vec<f64>)> = None;
            for b in (0..r).filter(|&b| b != a) {
                let xb = block(k, b);
                let nb = sizes[b] as f64;
                let before = if sizes[b] > 0 {
                    norm2(&sums[b]) / nb
                } else {
                    0.0
                };
                let delta = leave + before - shifted(&sums[b], &xb, 1.0) / (nb + 1.0);
                if delta < -1e-12 && best.as_ref().is_none_or(|(_, d, _)| delta < *d) {
                    best = Some((b, delta, xb));
                }
            }
            if let Some((b, _, xb)) = best {
                for (s, v) in sums[a].iter_mut().zip(&xa) {
                    *s -= v;
                }
                for (s, v) in sums[b].iter_mut().zip(&xb) {
                    *s += v;
                }
                sizes[a] -= 1;
                sizes[b] += 1;
                labels[k] = b;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
}

/// Shape of a full pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSpec {
    pub r: usize,
    pub l: usize,
    pub q: usize,
    pub basis: BasisKind,
    pub scheme: InitKind,
}

/// Basis, initialization, fit and cluster extraction in one call.
pub fn fit_pipeline(
    data: &CountTensor,
    spec: &PipelineSpec,
    cfg: &FitConfig,
) -> Result<(ModelParams, ClusterSolution, FitReport)> {
    let basis = build_basis(data.n_loci(), spec.q, spec.basis)?;
    let prepared = prepare_data(data, cfg)?;
    let init = multi_cluster_init(&prepared, spec.r * spec.l, spec.r, spec.scheme, cfg.seed)?;
    let params = init.into_params(basis, spec.r)?;
    let (fitted, report) = fit(&prepared, &params, cfg)?;
    let clusters = extract_clusters(&fitted.w_beta, &fitted.w_xi, spec.r, spec.l, cfg.seed)?;
    Ok((fitted, clusters, report))
}
