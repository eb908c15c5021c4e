//! Zero-inflated and hurdle Poisson distributions.
//!
//! A ZIP(p, λ) count is `B * X` with `B ~ Bernoulli(1 - p)` and `X ~ Poisson(λ)`
//! independent. Every ZIP law is a hurdle Poisson law with zero mass
//! `π₀ = p + (1 - p) e^{-λ}`; the converse holds only when `π₀ >= e^{-λ}`.
//!
//! Series-based quantities truncate at `ceil(λ_max + 40 √λ_max + 40)`.

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Poisson};
use statrs::function::gamma::ln_gamma;

use crate::error::{Result, ZitsError};

pub const P_MAX: f64 = 1.0 - 1e-9;
pub const LAMBDA_MIN: f64 = 1e-9;
pub const LAMBDA_MAX: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZipParams {
    p: f64,
    lambda: f64,
}

impl ZipParams {
    pub fn new(p: f64, lambda: f64) -> Result<Self> {
        if !(0.0..=P_MAX).contains(&p) {
            return Err(ZitsError::InvalidParameter(format!(
                "masking probability p = {p} outside [0, 1 - 1e-9]"
            )));
        }
        if !(LAMBDA_MIN..=LAMBDA_MAX).contains(&lambda) {
            return Err(ZitsError::InvalidParameter(format!(
                "intensity lambda = {lambda} outside [1e-9, 50]"
            )));
        }
        Ok(Self { p, lambda })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Probability of observing zero, `p + (1 - p) e^{-λ}`.
    pub fn zero_mass(&self) -> f64 {
        self.p + (1.0 - self.p) * (-self.lambda).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurdleParams {
    pi0: f64,
    lambda: f64,
}

impl HurdleParams {
    pub fn new(pi0: f64, lambda: f64) -> Result<Self> {
        if !(pi0 > 0.0 && pi0 < 1.0) {
            return Err(ZitsError::InvalidParameter(format!(
                "hurdle zero mass pi0 = {pi0} outside (0, 1)"
            )));
        }
        if !(LAMBDA_MIN..=LAMBDA_MAX).contains(&lambda) {
            return Err(ZitsError::InvalidParameter(format!(
                "intensity lambda = {lambda} outside [1e-9, 50]"
            )));
        }
        Ok(Self { pi0, lambda })
    }

    pub fn pi0(&self) -> f64 {
        self.pi0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

pub fn series_cutoff(lambda_max: f64) -> u64 {
    (lambda_max + 40.0 * lambda_max.sqrt() + 40.0).ceil() as u64
}

fn ln_factorial(c: u64) -> f64 {
    ln_gamma(c as f64 + 1.0)
}

fn poisson_ln_pmf(lambda: f64, c: u64) -> f64 {
    c as f64 * lambda.ln() - lambda - ln_factorial(c)
}

pub fn zip_ln_pmf(params: &ZipParams, c: u64) -> f64 {
    if c == 0 {
        params.zero_mass().ln()
    } else {
        (-params.p).ln_1p() + poisson_ln_pmf(params.lambda, c)
    }
}

pub fn zip_pmf(params: &ZipParams, c: u64) -> f64 {
    if c == 0 {
        params.zero_mass()
    } else {
        zip_ln_pmf(params, c).exp()
    }
}

pub fn hurdle_ln_pmf(params: &HurdleParams, c: u64) -> f64 {
    if c == 0 {
        params.pi0.ln()
    } else {
        (-params.pi0).ln_1p() - (-(-params.lambda).exp()).ln_1p() + poisson_ln_pmf(params.lambda, c)
    }
}

/// Draws `B * X` with `B ~ Bernoulli(1 - p)` and `X ~ Poisson(λ)`.
pub fn zip_sample<R: Rng + ?Sized>(params: &ZipParams, rng: &mut R) -> u64 {
    let (keep, latent) =
        sample_zip_parts(params.p, params.lambda, rng).expect("validated parameters");
    if keep {
        latent
    } else {
        0
    }
}

/// Draws the keep indicator `B` and the latent Poisson count without the
/// support checks of [`ZipParams`], for generators whose intensities exceed
/// the tabulated range. Fails only when `λ` is beyond what the Poisson
/// sampler supports (about 1.8e19) or `p` is not a probability.
pub fn sample_zip_parts<R: Rng + ?Sized>(p: f64, lambda: f64, rng: &mut R) -> Result<(bool, u64)> {
    let keep = Bernoulli::new(1.0 - p)
        .map_err(|e| ZitsError::InvalidParameter(format!("masking probability {p}: {e}")))?
        .sample(rng);
    let latent = if lambda > 0.0 {
        Poisson::new(lambda)
            .map_err(|e| ZitsError::InvalidParameter(format!("intensity {lambda:e}: {e}")))?
            .sample(rng) as u64
    } else {
        0
    };
    Ok((keep, latent))
}

/// Mean `(1 - p) λ` and variance `λ (1 - p) (p λ + 1)`.
pub fn zip_mean_var(params: &ZipParams) -> (f64, f64) {
    let (p, l) = (params.p, params.lambda);
    ((1.0 - p) * l, l * (1.0 - p) * (p * l + 1.0))
}

pub fn zip_to_hurdle(z: &ZipParams) -> HurdleParams {
    HurdleParams {
        pi0: z.zero_mass(),
        lambda: z.lambda,
    }
}

pub fn hurdle_to_zip(h: &HurdleParams) -> Result<ZipParams> {
    let e = (-h.lambda).exp();
    if h.pi0 < e {
        return Err(ZitsError::NonRepresentable {
            pi0: h.pi0,
            lambda: h.lambda,
        });
    }
    let p = ((h.pi0 - e) / (-(-h.lambda).exp_m1())).max(0.0);
    ZipParams::new(p, h.lambda)
}

/// `ln(e^x - 1)` for `x > 0` without overflow.
fn ln_expm1(x: f64) -> f64 {
    if x > 1.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// `g(x) = x / (1 - e^{-x})`, the mean of a zero-truncated Poisson(x).
pub fn truncated_poisson_mean(x: f64) -> f64 {
    x / -(-x).exp_m1()
}

/// The positive-part divergence `g(x) ln(x/y) + ln((e^y - 1)/(e^x - 1))`,
/// i.e. the KL divergence between zero-truncated Poisson(x) and Poisson(y).
pub fn truncated_poisson_kl(x: f64, y: f64) -> f64 {
    truncated_poisson_mean(x) * (x / y).ln() + ln_expm1(y) - ln_expm1(x)
}

/// Closed-form KL divergence between two hurdle Poisson laws.
pub fn kl_hurdle(a: &HurdleParams, b: &HurdleParams) -> f64 {
    let bern = kl_bernoulli_unchecked(a.pi0, b.pi0);
    (bern + (1.0 - a.pi0) * truncated_poisson_kl(a.lambda, b.lambda)).max(0.0)
}

/// KL divergence between two ZIP laws by truncated summation over counts.
pub fn kl_zip(a: &ZipParams, b: &ZipParams) -> f64 {
    let cut = series_cutoff(a.lambda.max(b.lambda));
    let mut acc = 0.0;
    for c in 0..=cut {
        let la = zip_ln_pmf(a, c);
        let w = la.exp();
        if w > 0.0 {
            acc += w * (la - zip_ln_pmf(b, c));
        }
    }
    acc.max(0.0)
}

/// Squared Hellinger distance `sum_c (sqrt(P_a(c)) - sqrt(P_b(c)))^2` in closed form.
pub fn hellinger_sq_zip(a: &ZipParams, b: &ZipParams) -> f64 {
    let (p, l) = (a.p, a.lambda);
    let (q, m) = (b.p, b.lambda);
    let keep = ((1.0 - p) * (1.0 - q)).sqrt();
    let v = 2.0 - 2.0 * keep * (-(l.sqrt() - m.sqrt()).powi(2) / 2.0).exp()
        + 2.0 * keep * (-(l + m) / 2.0).exp()
        - 2.0 * (a.zero_mass() * b.zero_mass()).sqrt();
    v.clamp(0.0, 2.0)
}

fn kl_bernoulli_unchecked(p: f64, q: f64) -> f64 {
    let mut v = 0.0;
    if p > 0.0 {
        v += p * (p / q).ln();
    }
    if p < 1.0 {
        v += (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
    }
    v
}

pub fn kl_bernoulli(p: f64, q: f64) -> Result<f64> {
    for (name, v) in [("p", p), ("q", q)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(ZitsError::InvalidParameter(format!(
                "Bernoulli KL needs {name} in (0, 1), got {v}"
            )));
        }
    }
    Ok(kl_bernoulli_unchecked(p, q).max(0.0))
}

/// `KL(Poisson(λ) || Poisson(λ̃)) = λ̃ - λ + λ ln(λ/λ̃)`.
pub fn kl_poisson(lambda: f64, lambda_tilde: f64) -> Result<f64> {
    for (name, v) in [("lambda", lambda), ("lambda_tilde", lambda_tilde)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(ZitsError::InvalidParameter(format!(
                "Poisson KL needs {name} > 0, got {v}"
            )));
        }
    }
    Ok((lambda_tilde - lambda + lambda * (lambda / lambda_tilde).ln()).max(0.0))
}

/// Exact ψ₁-Orlicz norm of Poisson(λ).
pub fn orlicz_psi1_poisson(lambda: f64) -> f64 {
    1.0 / (std::f64::consts::LN_2 / lambda).ln_1p()
}

/// Exact ψ₁-Orlicz norm of ZIP(p, λ).
pub fn orlicz_psi1(params: &ZipParams) -> f64 {
    let (p, l) = (params.p, params.lambda);
    1.0 / (((2.0 - p) / (1.0 - p)).ln() / l).ln_1p()
}

/// Centered log-MGF of ZIP(p, λ) at `t` by truncated summation, paired with the
/// sub-exponential bound `λ (1 + p(1-p)λ) t² / (1 - max(1, λ)|t|)`.
pub fn mgf_bound_check(params: &ZipParams, t: f64) -> Result<(f64, f64)> {
    let (p, l) = (params.p, params.lambda);
    let scale = l.max(1.0);
    if !(t.abs() < 1.0 / scale) {
        return Err(ZitsError::InvalidParameter(format!(
            "|t| = {} must be below 1/max(1, lambda) = {}",
            t.abs(),
            1.0 / scale
        )));
    }
    let mean = (1.0 - p) * l;
    let cut = series_cutoff(l);
    // log-sum-exp over counts
    let terms: Vec<f64> = (0..=cut)
        .map(|c| zip_ln_pmf(params, c) + t * (c as f64 - mean))
        .collect();
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lhs = m + terms.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    let rhs = l * (1.0 + p * (1.0 - p) * l) * t * t / (1.0 - scale * t.abs());
    Ok((lhs, rhs))
}

/// Bernstein-type upper bound on `P(n⁻¹ Σ a_i (C_i - E C_i) >= M)` for
/// independent ZIP variables.
pub fn bernstein_tail_bound(params: &[ZipParams], weights: &[f64], m: f64) -> Result<f64> {
    if params.len() != weights.len() || params.is_empty() {
        return Err(ZitsError::DimensionMismatch(format!(
            "{} parameter sets vs {} weights",
            params.len(),
            weights.len()
        )));
    }
    let n = params.len() as f64;
    let var: f64 = params
        .iter()
        .zip(weights)
        .map(|(z, a)| a * a * z.lambda * (1.0 + z.p * (1.0 - z.p) * z.lambda))
        .sum();
    let scale = params
        .iter()
        .zip(weights)
        .map(|(z, a)| a.abs().max((a * z.lambda).abs()))
        .fold(0.0, f64::max);
    Ok((-(n * n * m * m) / (2.0 * (var + n * m * scale))).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ZeroKind {
    TrueZero,
    FalseZero,
}

/// Bayes rule for an observed zero: false iff `p > 1 / (e^λ - 1)`. Equality
/// resolves to a true zero. Accepts any `λ > 0`, including intensities above
/// the tabulated range.
pub fn false_zero_rule(p: f64, lambda: f64) -> ZeroKind {
    let threshold = 1.0 / lambda.exp_m1();
    if p > threshold {
        ZeroKind::FalseZero
    } else {
        ZeroKind::TrueZero
    }
}

pub fn bayes_false_zero(params: &ZipParams) -> ZeroKind {
    false_zero_rule(params.p, params.lambda)
}

/// `P(false zero | C = 0) = p(1 - e^{-λ}) / (p(1 - e^{-λ}) + e^{-λ})`.
pub fn posterior_false_zero_raw(p: f64, lambda: f64) -> f64 {
    let masked = p * -(-lambda).exp_m1();
    let denom = masked + (-lambda).exp();
    if denom > 0.0 {
        masked / denom
    } else {
        0.0
    }
}

pub fn posterior_false_zero(params: &ZipParams) -> f64 {
    posterior_false_zero_raw(params.p, params.lambda)
}

/// Excess misclassification risk of `decision` over the Bayes rule.
pub fn excess_risk(params: &ZipParams, decision: ZeroKind) -> f64 {
    if decision == bayes_false_zero(params) {
        return 0.0;
    }
    let (p, l) = (params.p, params.lambda);
    let masked = p * -(-l).exp_m1();
    let e = (-l).exp();
    (masked - e).abs() / (masked + e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zp(p: f64, l: f64) -> ZipParams {
        ZipParams::new(p, l).unwrap()
    }

    #[test]
    fn pmf_hand_values() {
        assert!((zip_pmf(&zp(0.0, 1.0), 0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((zip_pmf(&zp(0.5, 1.0), 0) - 0.683_939_720_585_721_2).abs() < 1e-12);
        let c1 = 0.5 * (-1.0f64).exp();
        assert!((zip_pmf(&zp(0.5, 1.0), 1) - c1).abs() < 1e-15);
    }

    #[test]
    fn pmf_normalizes() {
        for &p in &[0.0, 0.2, 0.9, P_MAX] {
            for &l in &[1e-9, 0.3, 1.0, 7.5, 25.0, 50.0] {
                let z = zp(p, l);
                let total: f64 = (0..=series_cutoff(l)).map(|c| zip_pmf(&z, c)).sum();
                assert!((total - 1.0).abs() < 1e-12, "p={p} l={l} total={total}");
            }
        }
    }

    #[test]
    fn construction_rejects_out_of_range() {
        assert!(ZipParams::new(1.0, 1.0).is_err());
        assert!(ZipParams::new(-0.1, 1.0).is_err());
        assert!(ZipParams::new(0.5, 0.0).is_err());
        assert!(ZipParams::new(0.5, 51.0).is_err());
        assert!(HurdleParams::new(0.0, 1.0).is_err());
    }

    #[test]
    fn near_degenerate_sampler_is_all_zero() {
        let z = zp(0.999_999, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let zeros = (0..100_000)
            .filter(|_| zip_sample(&z, &mut rng) == 0)
            .count();
        assert!(zeros as f64 / 1e5 >= 0.9999);
    }

    #[test]
    fn mean_var_closed_forms() {
        assert_eq!(zip_mean_var(&zp(0.0, 3.0)), (3.0, 3.0));
        let (m, v) = zip_mean_var(&zp(0.5, 2.0));
        assert!((m - 1.0).abs() < 1e-15 && (v - 2.0).abs() < 1e-15);
        let (m, _) = zip_mean_var(&zp(P_MAX, 2.0));
        assert!(m < 1e-8);
    }

    #[test]
    fn hurdle_conversions() {
        let h = zip_to_hurdle(&zp(0.0, 2.0));
        assert!((h.pi0() - (-2.0f64).exp()).abs() < 1e-15);
        assert!(hurdle_to_zip(&h).unwrap().p().abs() < 1e-15);

        let h = zip_to_hurdle(&zp(0.5, 1.0));
        assert!((h.pi0() - 0.683_939_720_585_721_2).abs() < 1e-12);
        assert!((hurdle_to_zip(&h).unwrap().p() - 0.5).abs() < 1e-12);

        let bad = HurdleParams::new(0.1, 1.0).unwrap();
        assert!(matches!(
            hurdle_to_zip(&bad),
            Err(ZitsError::NonRepresentable { .. })
        ));
    }

    #[test]
    fn divergences_vanish_on_equal_params() {
        let z = zp(0.3, 4.0);
        assert!(kl_zip(&z, &z).abs() < 1e-14);
        assert!(hellinger_sq_zip(&z, &z) < 1e-14);
        let h = zip_to_hurdle(&z);
        assert!(kl_hurdle(&h, &h).abs() < 1e-14);
        assert_eq!(kl_bernoulli(0.4, 0.4).unwrap(), 0.0);
        assert_eq!(kl_poisson(2.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn kl_bernoulli_hand_value_and_boundaries() {
        let expect = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((kl_bernoulli(0.5, 0.25).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 0.1438).abs() < 1e-4);
        assert!(kl_bernoulli(0.0, 0.5).is_err());
        assert!(kl_bernoulli(0.5, 1.0).is_err());
        assert!(kl_poisson(0.0, 1.0).is_err());
    }

    #[test]
    fn hellinger_is_symmetric_and_bounded() {
        let a = zp(0.1, 0.5);
        let b = zp(0.8, 30.0);
        assert_eq!(hellinger_sq_zip(&a, &b), hellinger_sq_zip(&b, &a));
        assert!(hellinger_sq_zip(&a, &b) <= 2.0);
    }

    #[test]
    fn orlicz_reductions() {
        let l = 2.5;
        assert!((orlicz_psi1(&zp(0.0, l)) - orlicz_psi1_poisson(l)).abs() < 1e-15);
        assert!(orlicz_psi1(&zp(0.3, 2.0)) < orlicz_psi1_poisson(2.0));
    }

    #[test]
    fn mgf_at_zero_and_range() {
        let (lhs, rhs) = mgf_bound_check(&zp(0.3, 2.0), 0.0).unwrap();
        assert!(lhs.abs() < 1e-14 && rhs == 0.0);
        assert!(mgf_bound_check(&zp(0.3, 2.0), 0.5).is_err());
        assert!(mgf_bound_check(&zp(0.3, 0.5), -1.0).is_err());
    }

    #[test]
    fn poisson_cumulant_small_t() {
        let l = 3.0;
        for &t in &[1e-3, -2e-3, 0.01] {
            let (lhs, _) = mgf_bound_check(&zp(0.0, l), t).unwrap();
            let exact = l * (f64::exp(t) - t - 1.0);
            assert!((lhs - exact).abs() < 1e-12, "t={t}: {lhs} vs {exact}");
        }
    }

    #[test]
    fn bayes_rule_hand_cases() {
        for &p in &[0.0, 0.3, 0.9, P_MAX] {
            assert_eq!(
                bayes_false_zero(&zp(p, std::f64::consts::LN_2)),
                ZeroKind::TrueZero
            );
        }
        assert_eq!(bayes_false_zero(&zp(0.5, 1.0)), ZeroKind::TrueZero);
        assert_eq!(bayes_false_zero(&zp(0.9, 1.0)), ZeroKind::FalseZero);
        assert!((1.0 / 1f64.exp_m1() - 0.5820).abs() < 1e-4);
        // equality resolves to a true zero
        let l = 1.3f64;
        assert_eq!(false_zero_rule(1.0 / l.exp_m1(), l), ZeroKind::TrueZero);
    }

    #[test]
    fn posterior_hand_cases() {
        assert_eq!(posterior_false_zero(&zp(0.0, 2.0)), 0.0);
        assert!(posterior_false_zero(&zp(0.5, 40.0)) > 1.0 - 1e-15);
        let post = posterior_false_zero(&zp(0.5, 1.0));
        assert!((post - 0.4621).abs() < 1e-4 && post < 0.5);
    }

    #[test]
    fn excess_risk_hand_case() {
        let z = zp(0.9, 1.0);
        assert_eq!(excess_risk(&z, ZeroKind::FalseZero), 0.0);
        let e = (-1.0f64).exp();
        let expect = (0.9 * (1.0 - e) - e) / (0.9 * (1.0 - e) + e);
        assert!((excess_risk(&z, ZeroKind::TrueZero) - expect).abs() < 1e-15);
        assert!((expect - 0.2146).abs() < 1e-4);
    }
}
