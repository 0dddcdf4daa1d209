//! Cox proportional hazards fit (Newton-Raphson on the Breslow partial
//! likelihood) and the censoring weights derived from a censoring-time model.

use serde::{Deserialize, Serialize};

use crate::curve::StepCurve;
use crate::data::Dataset;
use crate::error::{Result, SurvError};
use crate::estimators::WeightFunction;
use crate::linalg::cholesky_solve;

pub const MAX_NEWTON_ITERATIONS: usize = 50;
pub const GRADIENT_TOLERANCE: f64 = 1e-8;
const MAX_HALVINGS: usize = 40;

/// Which indicator the proportional hazards model describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoxTarget {
    Event,
    /// Fit to `1 - event`, i.e. the censoring-time distribution.
    Censoring,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxModel {
    pub beta: Vec<f64>,
    /// Breslow cumulative baseline hazard at the covariate means.
    pub baseline_cumhaz: StepCurve,
    pub covariate_means: Vec<f64>,
    pub target: CoxTarget,
    pub iterations: usize,
    pub log_likelihood: f64,
}

impl CoxModel {
    /// `beta . (z - means)`.
    pub fn linear_predictor(&self, covariates: &[f64]) -> f64 {
        self.beta
            .iter()
            .zip(covariates.iter().zip(&self.covariate_means))
            .map(|(b, (z, m))| b * (z - m))
            .sum()
    }
}

/// Centered covariates, indicators and the descending-time order used by
/// every pass over the risk sets.
struct Design {
    x: Vec<Vec<f64>>,
    times: Vec<f64>,
    status: Vec<bool>,
    order: Vec<usize>,
    means: Vec<f64>,
}

impl Design {
    fn new(data: &Dataset, target: CoxTarget) -> Self {
        let n = data.len();
        let p = data.n_covariates();
        let mut means = vec![0.0; p];
        for r in data.records() {
            for (m, z) in means.iter_mut().zip(&r.covariates) {
                *m += z;
            }
        }
        means.iter_mut().for_each(|m| *m /= n as f64);
        let x = data
            .records()
            .iter()
            .map(|r| r.covariates.iter().zip(&means).map(|(z, m)| z - m).collect())
            .collect();
        let status = data
            .records()
            .iter()
            .map(|r| match target {
                CoxTarget::Event => r.event,
                CoxTarget::Censoring => !r.event,
            })
            .collect();
        let times = data.times();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
        Self {
            x,
            times,
            status,
            order,
            means,
        }
    }

    fn p(&self) -> usize {
        self.means.len()
    }

    fn eta(&self, beta: &[f64]) -> Vec<f64> {
        self.x
            .iter()
            .map(|xi| xi.iter().zip(beta).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Log partial likelihood, gradient and information matrix (negative
    /// Hessian), Breslow ties.
    fn evaluate(&self, beta: &[f64], want_derivatives: bool) -> (f64, Vec<f64>, Vec<f64>) {
        let p = self.p();
        let eta = self.eta(beta);
        // shift keeps exp() in range; cancels in every ratio
        let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut loglik = 0.0;
        let mut grad = vec![0.0; p];
        let mut info = vec![0.0; p * p];
        let mut s0 = 0.0;
        let mut s1 = vec![0.0; p];
        let mut s2 = vec![0.0; p * p];

        let mut k = 0;
        let n = self.order.len();
        while k < n {
            let t = self.times[self.order[k]];
            let start = k;
            while k < n && self.times[self.order[k]] == t {
                let i = self.order[k];
                let w = (eta[i] - shift).exp();
                s0 += w;
                if want_derivatives {
                    for a in 0..p {
                        s1[a] += w * self.x[i][a];
                        for b in 0..=a {
                            s2[a * p + b] += w * self.x[i][a] * self.x[i][b];
                        }
                    }
                }
                k += 1;
            }
            let log_s0 = s0.ln() + shift;
            for &i in &self.order[start..k] {
                if !self.status[i] {
                    continue;
                }
                loglik += eta[i] - log_s0;
                if want_derivatives {
                    for a in 0..p {
                        let mean_a = s1[a] / s0;
                        grad[a] += self.x[i][a] - mean_a;
                        for b in 0..=a {
                            info[a * p + b] += s2[a * p + b] / s0 - mean_a * s1[b] / s0;
                        }
                    }
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                info[b * p + a] = info[a * p + b];
            }
        }
        (loglik, grad, info)
    }

    fn breslow(&self, beta: &[f64]) -> Result<StepCurve> {
        let eta = self.eta(beta);
        let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // ascending pass over distinct target times, risk sums from the top
        let mut jumps: Vec<(f64, f64)> = Vec::new();
        let mut s0 = 0.0;
        let mut k = 0;
        let n = self.order.len();
        while k < n {
            let t = self.times[self.order[k]];
            let mut d = 0usize;
            while k < n && self.times[self.order[k]] == t {
                let i = self.order[k];
                s0 += (eta[i] - shift).exp();
                if self.status[i] {
                    d += 1;
                }
                k += 1;
            }
            if d > 0 {
                jumps.push((t, d as f64 / (s0 * shift.exp())));
            }
        }
        jumps.reverse();
        let mut h = 0.0;
        let (times, values): (Vec<f64>, Vec<f64>) = jumps
            .into_iter()
            .map(|(t, dh)| {
                h += dh;
                (t, h)
            })
            .unzip();
        StepCurve::new(times, values, 0.0)
    }
}

/// Log partial likelihood at `beta` (covariates centered at their means).
pub fn partial_log_likelihood(data: &Dataset, target: CoxTarget, beta: &[f64]) -> f64 {
    Design::new(data, target).evaluate(beta, false).0
}

/// Analytic gradient of [`partial_log_likelihood`].
pub fn partial_score(data: &Dataset, target: CoxTarget, beta: &[f64]) -> Vec<f64> {
    Design::new(data, target).evaluate(beta, true).1
}

/// Newton-Raphson with step halving until the gradient sup-norm drops below
/// [`GRADIENT_TOLERANCE`].
pub fn fit_cox(data: &Dataset, target: CoxTarget) -> Result<CoxModel> {
    if data.is_empty() {
        return Err(SurvError::EmptyDataset);
    }
    let design = Design::new(data, target);
    if !design.status.iter().any(|&s| s) {
        return Err(SurvError::NoEvents);
    }
    let p = design.p();
    let mut beta = vec![0.0; p];
    let (mut loglik, mut grad, mut info) = design.evaluate(&beta, true);
    let mut iterations = 0;
    loop {
        let gnorm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gnorm <= GRADIENT_TOLERANCE {
            break;
        }
        if iterations >= MAX_NEWTON_ITERATIONS {
            return Err(SurvError::CoxNotConverged {
                iterations,
                gradient: gnorm,
            });
        }
        iterations += 1;
        let step = cholesky_solve(&info, &grad).ok_or(SurvError::CoxNotConverged {
            iterations,
            gradient: gnorm,
        })?;
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let (ll, g, h) = design.evaluate(&trial, true);
            if ll.is_finite() && ll >= loglik - 1e-12 * loglik.abs().max(1.0) {
                beta = trial;
                loglik = ll;
                grad = g;
                info = h;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(SurvError::CoxNotConverged {
                iterations,
                gradient: gnorm,
            });
        }
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(SurvError::CoxNotConverged {
            iterations,
            gradient: f64::NAN,
        });
    }
    let baseline_cumhaz = design.breslow(&beta)?;
    Ok(CoxModel {
        beta,
        baseline_cumhaz,
        covariate_means: design.means,
        target,
        iterations,
        log_likelihood: loglik,
    })
}

/// Per-subject weights `min(1 / G(u- | Z_i), cap)` from a censoring model,
/// `G(t | Z_i) = exp(-Lambda_0(t) exp(beta . (Z_i - means)))`. The returned
/// function is shared by every pseudo-value computation on `data`.
pub fn censoring_weights(data: &Dataset, model: &CoxModel, cap: f64) -> Result<WeightFunction> {
    if !(cap > 1.0) {
        return Err(SurvError::InvalidInput(format!("weight cap must exceed 1, got {cap}")));
    }
    if model.target != CoxTarget::Censoring {
        return Err(SurvError::InvalidInput(
            "censoring weights need a model fit to the censoring indicator".into(),
        ));
    }
    if data.n_covariates() != model.beta.len() {
        return Err(SurvError::DimensionMismatch(format!(
            "censoring model has {} coefficients, data has {} covariates",
            model.beta.len(),
            data.n_covariates()
        )));
    }
    let relative_risk = data
        .records()
        .iter()
        .map(|r| model.linear_predictor(&r.covariates).exp())
        .collect();
    WeightFunction::proportional(model.baseline_cumhaz.clone(), relative_risk, cap)
}
