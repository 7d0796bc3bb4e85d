//! GARCH(1,1) conditional variance, Gaussian quasi-likelihood and fitting.
//!
//! The model is
//!
//! ```text
//! σ²_t = α₀ + α₁ ε²_{t-1} + β₁ σ²_{t-1}
//! ```
//!
//! with shocks `ε_t` taken about the sample mean. Fitting maximizes the
//! Gaussian likelihood with Levenberg-Marquardt steps whose curvature matrix
//! is the outer product of per-observation scores (BHHH).

mod optimizer;
mod report;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use optimizer::{fit, fit_values, FitOptions, GarchFit, Reparam};
pub use report::{format_cell, significance, ComparisonTable, FitReport, Significance};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta1: f64,
}

impl GarchParams {
    /// Validated constructor: `α₀ > 0`, `α₁, β₁ >= 0`, `α₁ + β₁ < 1`.
    pub fn new(alpha0: f64, alpha1: f64, beta1: f64) -> Result<Self> {
        let p = GarchParams {
            alpha0,
            alpha1,
            beta1,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha0 > 0.0
            && self.alpha0.is_finite()
            && self.alpha1 >= 0.0
            && self.beta1 >= 0.0
            && self.persistence() < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Input(format!(
                "invalid GARCH(1,1) parameters {self:?}"
            )))
        }
    }

    /// `α₁ + β₁`.
    pub fn persistence(&self) -> f64 {
        self.alpha1 + self.beta1
    }

    /// `α₀ / (1 - α₁ - β₁)`.
    pub fn unconditional_variance(&self) -> f64 {
        self.alpha0 / (1.0 - self.persistence())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.alpha0, self.alpha1, self.beta1]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        GarchParams {
            alpha0: a[0],
            alpha1: a[1],
            beta1: a[2],
        }
    }
}

/// Returns minus their sample mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockSeries {
    pub eps: Vec<f64>,
    pub mean: f64,
}

impl ShockSeries {
    pub fn from_returns(returns: &[f64]) -> Result<Self> {
        if returns.is_empty() {
            return Err(Error::Input("no returns".into()));
        }
        if returns.iter().any(|r| !r.is_finite()) {
            return Err(Error::Input("returns contain non-finite values".into()));
        }
        let mean = returns.iter().sum::<f64>() / returns.len() as f64;
        Ok(ShockSeries {
            eps: returns.iter().map(|r| r - mean).collect(),
            mean,
        })
    }

    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    /// `(1/T) Σ ε²_t`, the starting variance of the recursion.
    pub fn sample_variance(&self) -> f64 {
        self.eps.iter().map(|e| e * e).sum::<f64>() / self.eps.len() as f64
    }
}

/// Conditional variances `σ²_0 .. σ²_{T-1}` starting from `sigma0_sq`.
pub fn variance_recursion(params: &GarchParams, shocks: &ShockSeries, sigma0_sq: f64) -> Vec<f64> {
    let t_len = shocks.len();
    let mut s2 = Vec::with_capacity(t_len);
    if t_len == 0 {
        return s2;
    }
    let mut prev = sigma0_sq;
    s2.push(prev);
    for t in 1..t_len {
        let e = shocks.eps[t - 1];
        prev = params.alpha0 + params.alpha1 * e * e + params.beta1 * prev;
        s2.push(prev);
    }
    s2
}

/// `½ Σ_t [log(2π σ²_t) + ε²_t / σ²_t]` with `σ²_0` the sample variance.
pub fn neg_log_likelihood(params: &GarchParams, shocks: &ShockSeries) -> Result<f64> {
    neg_log_likelihood_from(params, shocks, shocks.sample_variance())
}

/// Negative log-likelihood for an explicit starting variance.
pub fn neg_log_likelihood_from(
    params: &GarchParams,
    shocks: &ShockSeries,
    sigma0_sq: f64,
) -> Result<f64> {
    let s2 = variance_recursion(params, shocks, sigma0_sq);
    let mut total = 0.0;
    for (t, (&v, &e)) in s2.iter().zip(&shocks.eps).enumerate() {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Computation(format!(
                "conditional variance at t={t} is not positive: {v}"
            )));
        }
        total += LN_2PI + v.ln() + e * e / v;
    }
    Ok(0.5 * total)
}

/// Per-observation derivatives of the negative log-likelihood with respect
/// to `(α₀, α₁, β₁)`, and the total objective.
///
/// `σ²_0` is the sample variance, which does not depend on the parameters.
pub fn observation_scores(
    params: &GarchParams,
    shocks: &ShockSeries,
) -> Result<(f64, Vec<[f64; 3]>)> {
    let sigma0_sq = shocks.sample_variance();
    let mut scores = Vec::with_capacity(shocks.len());
    let mut total = 0.0;
    let mut v = sigma0_sq;
    let mut dv = [0.0f64; 3];
    for t in 0..shocks.len() {
        if t > 0 {
            let e_prev = shocks.eps[t - 1];
            let v_prev = v;
            v = params.alpha0 + params.alpha1 * e_prev * e_prev + params.beta1 * v_prev;
            dv = [
                1.0 + params.beta1 * dv[0],
                e_prev * e_prev + params.beta1 * dv[1],
                v_prev + params.beta1 * dv[2],
            ];
        }
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Computation(format!(
                "conditional variance at t={t} is not positive: {v}"
            )));
        }
        let e2 = shocks.eps[t] * shocks.eps[t];
        total += LN_2PI + v.ln() + e2 / v;
        let k = 0.5 * (1.0 / v - e2 / (v * v));
        scores.push([k * dv[0], k * dv[1], k * dv[2]]);
    }
    Ok((0.5 * total, scores))
}

/// Gradient of [`neg_log_likelihood`] with respect to `(α₀, α₁, β₁)`.
pub fn gradient(params: &GarchParams, shocks: &ShockSeries) -> Result<[f64; 3]> {
    let (_, scores) = observation_scores(params, shocks)?;
    let mut g = [0.0; 3];
    for s in &scores {
        for i in 0..3 {
            g[i] += s[i];
        }
    }
    Ok(g)
}

/// A GARCH(1,1) path of `len` shocks, started at the unconditional variance.
pub fn simulate<R: Rng + ?Sized>(params: &GarchParams, len: usize, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut v = params.unconditional_variance();
    for _ in 0..len {
        let z: f64 = rng.sample(StandardNormal);
        let e = v.sqrt() * z;
        out.push(e);
        v = params.alpha0 + params.alpha1 * e * e + params.beta1 * v;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shocks(eps: Vec<f64>) -> ShockSeries {
        ShockSeries { eps, mean: 0.0 }
    }

    #[test]
    fn params_validation() {
        assert!(GarchParams::new(1e-6, 0.1, 0.85).is_ok());
        assert!(GarchParams::new(0.0, 0.1, 0.85).is_err());
        assert!(GarchParams::new(1e-6, -0.1, 0.85).is_err());
        assert!(GarchParams::new(1e-6, 0.2, 0.8).is_err());
    }

    #[test]
    fn shocks_are_centered() {
        let s = ShockSeries::from_returns(&[1.0, 2.0, 3.0, 6.0]).unwrap();
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.eps, vec![-2.0, -1.0, 0.0, 3.0]);
        assert!(ShockSeries::from_returns(&[]).is_err());
    }

    #[test]
    fn constant_variance_degenerate_case() {
        let p = GarchParams::new(0.3, 0.0, 0.0).unwrap();
        let v = variance_recursion(&p, &shocks(vec![1.0, -2.0, 0.5, 4.0]), 7.0);
        assert_eq!(v, vec![7.0, 0.3, 0.3, 0.3]);
    }

    #[test]
    fn one_step_hand_value() {
        let p = GarchParams::new(1e-6, 0.1, 0.8).unwrap();
        let e0 = 4e-5f64.sqrt();
        let v = variance_recursion(&p, &shocks(vec![e0, 0.0]), 1e-5);
        assert!((v[1] - 1.3e-5).abs() < 1e-18);
    }

    #[test]
    fn two_term_likelihood_by_hand() {
        let p = GarchParams::new(0.2, 0.3, 0.4).unwrap();
        let (e0, e1, s0) = (0.5f64, -1.5f64, 0.9f64);
        let s1 = 0.2 + 0.3 * e0 * e0 + 0.4 * s0;
        let by_hand = 0.5
            * ((2.0 * std::f64::consts::PI * s0).ln()
                + e0 * e0 / s0
                + (2.0 * std::f64::consts::PI * s1).ln()
                + e1 * e1 / s1);
        let got = neg_log_likelihood_from(&p, &shocks(vec![e0, e1]), s0).unwrap();
        assert!((got - by_hand).abs() < 1e-14);
    }

    #[test]
    fn single_zero_shock_at_unit_variance() {
        // T = 1, ε = 0, σ²_0 = 1/(2π): the only term is ½ log(1) = 0
        let p = GarchParams::new(1.0 / (2.0 * std::f64::consts::PI), 0.0, 0.0).unwrap();
        let v = neg_log_likelihood_from(&p, &shocks(vec![0.0]), 1.0 / (2.0 * std::f64::consts::PI))
            .unwrap();
        assert!(v.abs() < 1e-15);
        // with the sample-variance start the same series has σ²_0 = 0
        assert!(matches!(
            neg_log_likelihood(&p, &shocks(vec![0.0])),
            Err(Error::Computation(_))
        ));
    }

    #[test]
    fn likelihood_scaling_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = GarchParams::new(1e-2, 0.1, 0.8).unwrap();
        let raw = simulate(&p, 500, &mut rng);
        let s = ShockSeries::from_returns(&raw).unwrap();
        let c: f64 = 0.037;
        let scaled = ShockSeries {
            eps: s.eps.iter().map(|e| e * c).collect(),
            mean: s.mean * c,
        };
        let ps = GarchParams::new(p.alpha0 * c * c, p.alpha1, p.beta1).unwrap();
        let a = neg_log_likelihood(&p, &s).unwrap();
        let b = neg_log_likelihood(&ps, &scaled).unwrap();
        let expected = s.len() as f64 * c.ln();
        assert!(((b - a) - expected).abs() < 1e-9 * expected.abs());
    }

    #[test]
    fn unconditional_variance_is_long_run_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let p = GarchParams::new(1e-6, 0.1, 0.85).unwrap();
        let path = simulate(&p, 100_000, &mut rng);
        let s = ShockSeries {
            eps: path,
            mean: 0.0,
        };
        let v = variance_recursion(&p, &s, p.unconditional_variance());
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let target = p.unconditional_variance();
        assert!(
            ((mean - target) / target).abs() < 0.05,
            "{mean} vs {target}"
        );
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let a1: f64 = rng.random_range(0.01..0.3);
            let b1: f64 = rng.random_range(0.0..(0.98 - a1));
            let a0: f64 = rng.random_range(0.05..2.0);
            let truth = GarchParams::new(a0, a1, b1).unwrap();
            let len = rng.random_range(50..400);
            let data = simulate(&truth, len, &mut rng);
            let s = ShockSeries::from_returns(&data).unwrap();
            // evaluate away from the generating point
            let p = GarchParams::new(a0 * 1.3, a1 * 0.7 + 0.01, b1 * 0.9).unwrap();
            let g = gradient(&p, &s).unwrap();
            let norm = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let base = p.as_array();
            for i in 0..3 {
                let h = 1e-6 * base[i].abs().max(1e-3);
                let mut up = base;
                let mut dn = base;
                up[i] += h;
                dn[i] -= h;
                let fu = neg_log_likelihood(&GarchParams::from_array(up), &s).unwrap();
                let fd = neg_log_likelihood(&GarchParams::from_array(dn), &s).unwrap();
                let fd_grad = (fu - fd) / (2.0 * h);
                assert!(
                    (g[i] - fd_grad).abs() / norm < 1e-5,
                    "component {i}: analytic {} vs fd {}",
                    g[i],
                    fd_grad
                );
            }
        }
    }
}
