use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{neg_log_likelihood, observation_scores, GarchParams, ShockSeries};
use crate::error::{Error, Result};
use crate::series::ReturnsSeries;

/// Shortest series accepted by [`fit`].
pub const MIN_SERIES_LEN: usize = 50;

#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Unconstrained coordinates `(θ₀, θ_p, θ_s)` of the stationary region.
///
/// `α₀ = exp(θ₀)`, the persistence `α₁ + β₁ = logistic(θ_p)` and the
/// share of it carried by `α₁` is `logistic(θ_s)`. Every real `θ` maps to
/// valid parameters with `α₁ + β₁ < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reparam(pub [f64; 3]);

impl Reparam {
    /// Inverse map; needs `α₁ > 0`, `β₁ > 0`.
    pub fn from_params(p: &GarchParams) -> Result<Self> {
        let persistence = p.persistence();
        if !(p.alpha0 > 0.0 && p.alpha1 > 0.0 && p.beta1 > 0.0 && persistence < 1.0) {
            return Err(Error::Input(format!(
                "parameters {p:?} are not in the interior of the stationary region"
            )));
        }
        Ok(Reparam([
            p.alpha0.ln(),
            logit(persistence),
            logit(p.alpha1 / persistence),
        ]))
    }

    pub fn params(&self) -> GarchParams {
        let [t0, tp, ts] = self.0;
        // logistic rounds to exactly 1 for large arguments
        let persistence = logistic(tp).min(1.0 - f64::EPSILON);
        let share = logistic(ts);
        GarchParams {
            alpha0: t0.exp(),
            alpha1: persistence * share,
            beta1: persistence * (1.0 - share),
        }
    }

    /// `∂(α₀, α₁, β₁) / ∂θ`, rows are parameters.
    pub fn jacobian(&self) -> Matrix3<f64> {
        let [t0, tp, ts] = self.0;
        let p = logistic(tp);
        let q = logistic(ts);
        let dp = p * (1.0 - p);
        let dq = q * (1.0 - q);
        Matrix3::new(
            t0.exp(),
            0.0,
            0.0,
            0.0,
            dp * q,
            p * dq,
            0.0,
            dp * (1.0 - q),
            -p * dq,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stop when an accepted step lowers the objective by less than this
    /// fraction.
    pub tolerance: f64,
    pub initial_damping: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 500,
            tolerance: 1e-9,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchFit {
    pub params: GarchParams,
    pub stderr: [f64; 3],
    pub t_stats: [f64; 3],
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted step, starting with the initial guess.
    pub objective_history: Vec<f64>,
}

impl GarchFit {
    pub fn estimates(&self) -> [f64; 3] {
        self.params.as_array()
    }
}

struct Evaluation {
    objective: f64,
    gradient: Vector3<f64>,
    bhhh: Matrix3<f64>,
}

fn evaluate(theta: &Reparam, shocks: &ShockSeries) -> Result<Evaluation> {
    let params = theta.params();
    let (objective, scores) = observation_scores(&params, shocks)?;
    let jt = theta.jacobian().transpose();
    let mut gradient = Vector3::zeros();
    let mut bhhh = Matrix3::zeros();
    for s in &scores {
        let st = jt * Vector3::new(s[0], s[1], s[2]);
        gradient += st;
        bhhh += st * st.transpose();
    }
    Ok(Evaluation {
        objective,
        gradient,
        bhhh,
    })
}

fn objective(theta: &Reparam, shocks: &ShockSeries) -> Option<f64> {
    let p = theta.params();
    if !(p.alpha0 > 0.0 && p.alpha0.is_finite()) {
        return None;
    }
    neg_log_likelihood(&p, shocks)
        .ok()
        .filter(|f| f.is_finite())
}

/// Covariance of `(α₀, α₁, β₁)` from the inverse outer-product matrix of
/// natural-parameter scores.
///
/// Equal to `J B_θ⁻¹ Jᵀ` for the reparameterized matrix `B_θ = Jᵀ B J`,
/// but stays well conditioned when `α₁` or `β₁` sits near zero.
pub(crate) fn natural_covariance(
    params: &GarchParams,
    shocks: &ShockSeries,
) -> Result<Matrix3<f64>> {
    let (_, scores) = observation_scores(params, shocks)?;
    let mut b = Matrix3::zeros();
    for s in &scores {
        let v = Vector3::new(s[0], s[1], s[2]);
        b += v * v.transpose();
    }
    // scale to unit diagonal before inverting; α₀ is many orders smaller
    let d = Vector3::new(b[(0, 0)].sqrt(), b[(1, 1)].sqrt(), b[(2, 2)].sqrt());
    if d.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::Fit("outer-product matrix is degenerate".into()));
    }
    let scaled = Matrix3::from_fn(|i, j| b[(i, j)] / (d[i] * d[j]));
    let inv = scaled
        .try_inverse()
        .ok_or_else(|| Error::Fit("outer-product matrix is singular".into()))?;
    Ok(Matrix3::from_fn(|i, j| inv[(i, j)] / (d[i] * d[j])))
}

/// `(α₁, β₁)` pairs the descent is started from; `α₀` matches the sample
/// variance. The likelihood is often multimodal on short series.
const STARTS: [(f64, f64); 4] = [(0.05, 0.90), (0.02, 0.97), (0.10, 0.80), (0.05, 0.60)];

fn starting_point(var: f64, alpha1: f64, beta1: f64) -> Reparam {
    let start = GarchParams {
        alpha0: var * (1.0 - alpha1 - beta1),
        alpha1,
        beta1,
    };
    Reparam::from_params(&start).expect("starting point is interior")
}

struct Descent {
    theta: Reparam,
    objective: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

fn descend(mut theta: Reparam, shocks: &ShockSeries, options: &FitOptions) -> Result<Descent> {
    let mut current = evaluate(&theta, shocks)?;
    let mut history = vec![current.objective];
    let mut damping = options.initial_damping;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        let diag = Matrix3::from_diagonal(&current.bhhh.diagonal());
        let mut accepted = None;
        while damping < 1e20 {
            let system = current.bhhh + diag * damping;
            let step = system.cholesky().map(|c| c.solve(&(-current.gradient)));
            if let Some(step) = step {
                let trial = Reparam([
                    theta.0[0] + step[0],
                    theta.0[1] + step[1],
                    theta.0[2] + step[2],
                ]);
                if let Some(f) = objective(&trial, shocks) {
                    if f < current.objective {
                        accepted = Some((trial, f));
                        break;
                    }
                }
            }
            damping *= 10.0;
        }

        let Some((trial, f)) = accepted else {
            // no damping level lowers the objective: check the remaining
            // predicted decrease gᵀ B⁻¹ g
            let decrement = current
                .bhhh
                .try_inverse()
                .map(|inv| (current.gradient.transpose() * inv * current.gradient)[(0, 0)])
                .unwrap_or(f64::INFINITY);
            converged = decrement.abs() < 1e-6 * current.objective.abs().max(1.0);
            break;
        };

        let decrease = current.objective - f;
        theta = trial;
        current = evaluate(&theta, shocks)?;
        history.push(current.objective);
        damping = (damping / 10.0).max(1e-12);
        if decrease < options.tolerance * current.objective.abs().max(1e-300) {
            converged = true;
            break;
        }
    }
    Ok(Descent {
        theta,
        objective: current.objective,
        iterations,
        converged,
        history,
    })
}

/// Fit GARCH(1,1) to a returns series with default options.
pub fn fit(returns: &ReturnsSeries) -> Result<GarchFit> {
    fit_values(&returns.values, &FitOptions::default())
}

/// Maximum-likelihood GARCH(1,1) fit by Levenberg-Marquardt.
///
/// The descent is started from several persistence levels and the lowest
/// objective wins. Each iteration solves `(B + μ diag B) δ = -g` in the unconstrained
/// coordinates, where `g` is the score and `B` the outer product of the
/// per-observation scores. Rejected steps raise the damping `μ` tenfold,
/// accepted ones lower it tenfold.
pub fn fit_values(returns: &[f64], options: &FitOptions) -> Result<GarchFit> {
    if returns.len() < MIN_SERIES_LEN {
        return Err(Error::Input(format!(
            "GARCH fit needs at least {MIN_SERIES_LEN} returns, got {}",
            returns.len()
        )));
    }
    let shocks = ShockSeries::from_returns(returns)?;
    let var = shocks.sample_variance();
    let scale = returns.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if !(var > (1e-12 * scale).powi(2)) {
        return Err(Error::Input("returns have zero variance".into()));
    }

    let mut best: Option<Descent> = None;
    for &(alpha1, beta1) in &STARTS {
        let run = descend(starting_point(var, alpha1, beta1), &shocks, options)?;
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");

    let params = best.theta.params();
    let cov = natural_covariance(&params, &shocks)?;
    let est = params.as_array();
    let mut stderr = [0.0; 3];
    let mut t_stats = [0.0; 3];
    for i in 0..3 {
        stderr[i] = cov[(i, i)].max(0.0).sqrt();
        t_stats[i] = est[i] / stderr[i];
    }
    Ok(GarchFit {
        params,
        stderr,
        t_stats,
        loglik: -best.objective,
        iterations: best.iterations,
        converged: best.converged,
        objective_history: best.history,
    })
}

#[cfg(test)]
mod tests {
    use super::super::simulate;
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #[test]
        fn reparam_round_trip(a0 in 1e-12f64..10.0, p in 0.01f64..0.999, s in 0.01f64..0.99) {
            let params = GarchParams::new(a0, p * s, p * (1.0 - s)).unwrap();
            let back = Reparam::from_params(&params).unwrap().params();
            for (x, y) in back.as_array().iter().zip(params.as_array()) {
                prop_assert!((x - y).abs() <= 1e-12 * y.abs());
            }
        }

        #[test]
        fn every_theta_is_stationary(t0 in -40.0f64..5.0, tp in -30.0f64..30.0, ts in -30.0f64..30.0) {
            let p = Reparam([t0, tp, ts]).params();
            prop_assert!(p.alpha0 > 0.0 && p.alpha1 >= 0.0 && p.beta1 >= 0.0);
            prop_assert!(p.persistence() < 1.0);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let theta = Reparam([-3.0, 1.7, -0.4]);
        let j = theta.jacobian();
        for c in 0..3 {
            let h = 1e-6;
            let mut up = theta.0;
            let mut dn = theta.0;
            up[c] += h;
            dn[c] -= h;
            let fu = Reparam(up).params().as_array();
            let fd = Reparam(dn).params().as_array();
            for r in 0..3 {
                let fdv = (fu[r] - fd[r]) / (2.0 * h);
                assert!((j[(r, c)] - fdv).abs() < 1e-8, "({r},{c})");
            }
        }
    }

    #[test]
    fn rejects_short_and_flat_series() {
        assert!(matches!(
            fit_values(&[0.1; 49], &FitOptions::default()),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            fit_values(&[0.1; 100], &FitOptions::default()),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn fit_recovers_known_process() {
        let truth = GarchParams::new(1e-6, 0.1, 0.85).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let data = simulate(&truth, 20_000, &mut rng);
        let fit = fit_values(&data, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        let est = fit.estimates();
        for i in 0..3 {
            assert!(
                (est[i] - truth.as_array()[i]).abs() < 4.0 * fit.stderr[i],
                "param {i}: {} ± {}",
                est[i],
                fit.stderr[i]
            );
            assert!(
                (fit.t_stats[i] - est[i] / fit.stderr[i]).abs() <= 1e-12 * fit.t_stats[i].abs()
            );
        }
        assert!(fit.params.persistence() < 1.0);
        for w in fit.objective_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn location_shift_does_not_change_fit() {
        let truth = GarchParams::new(2e-6, 0.08, 0.9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data = simulate(&truth, 3000, &mut rng);
        let shifted: Vec<f64> = data.iter().map(|x| x + 0.25).collect();
        let a = fit_values(&data, &FitOptions::default()).unwrap();
        let b = fit_values(&shifted, &FitOptions::default()).unwrap();
        for (x, y) in a.estimates().iter().zip(b.estimates()) {
            assert!((x - y).abs() <= 1e-6 * y.abs(), "{x} vs {y}");
        }
    }

    #[test]
    fn delta_method_agrees_with_natural_covariance() {
        let truth = GarchParams::new(1e-5, 0.12, 0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = simulate(&truth, 5000, &mut rng);
        let shocks = ShockSeries::from_returns(&data).unwrap();
        let theta = Reparam::from_params(&truth).unwrap();
        let eval = evaluate(&theta, &shocks).unwrap();
        let j = theta.jacobian();
        let delta = j * eval.bhhh.try_inverse().unwrap() * j.transpose();
        let natural = natural_covariance(&truth, &shocks).unwrap();
        for i in 0..3 {
            let rel = (delta[(i, i)] - natural[(i, i)]).abs() / natural[(i, i)];
            assert!(rel < 1e-6, "diag {i}: {rel}");
        }
    }
}
