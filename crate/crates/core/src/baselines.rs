//! Reference predictors: linear Cox survival curves and pseudo-value GEE
//! regression with a complementary log-log link.

use serde::{Deserialize, Serialize};

use crate::cox::{censoring_weights, fit_cox, CoxModel, CoxTarget};
use crate::data::Dataset;
use crate::error::{Result, SurvError};
use crate::estimators::{WeightFunction, DEFAULT_WEIGHT_CAP};
use crate::linalg::cholesky_solve;
use crate::pseudo::{pseudo_marginal, pseudo_marginal_ipcw, TimeGrid};

pub const GEE_MAX_ITERATIONS: usize = 100;
pub const GEE_TOLERANCE: f64 = 1e-8;
const GEE_MAX_HALVINGS: usize = 40;
const GEE_FULL_STEP: f64 = 1e-4;

/// `S(t | Z) = S_0(t)^exp(beta . (Z - means))` with the Breslow baseline.
pub fn cox_predict_survival(model: &CoxModel, covariates: &[f64], t: f64) -> Result<f64> {
    let h0 = model.baseline_cumhaz.eval(t)?;
    Ok((-h0 * model.linear_predictor(covariates).exp()).exp())
}

/// `log(-log S(t_j | Z)) = time_intercepts[j] + beta . Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeeModel {
    pub time_intercepts: Vec<f64>,
    pub beta: Vec<f64>,
    pub iterations: usize,
}

pub fn gee_predict_survival(model: &GeeModel, covariates: &[f64], time_index: usize) -> Result<f64> {
    let alpha = model.time_intercepts.get(time_index).ok_or_else(|| {
        SurvError::InvalidInput(format!(
            "time index {time_index} out of range for {} intercepts",
            model.time_intercepts.len()
        ))
    })?;
    let eta = alpha + dot(&model.beta, covariates);
    Ok((-eta.exp()).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Marginal pseudo values at every grid time, then the GEE fit. With `ipcw`
/// the pseudo values come from the weighted estimator, weights from a Cox
/// model for the censoring times on all covariates.
pub fn fit_gee(data: &Dataset, grid: &TimeGrid, ipcw: bool) -> Result<GeeModel> {
    let weights = if ipcw {
        let censor = fit_cox(data, CoxTarget::Censoring)?;
        Some(censoring_weights(data, &censor, DEFAULT_WEIGHT_CAP)?)
    } else {
        None
    };
    fit_gee_with(data, grid, weights.as_ref(), GeeVariance::default())
}

/// Working variance of a pseudo response around its mean `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeeVariance {
    /// Constant variance: least squares on the response scale. Stays well
    /// behaved when pseudo values fall outside [0, 1].
    #[default]
    Constant,
    /// `mu (1 - mu)`: on binary responses this is cloglog binary regression.
    Binomial,
}

pub fn fit_gee_with(
    data: &Dataset,
    grid: &TimeGrid,
    weights: Option<&WeightFunction>,
    variance: GeeVariance,
) -> Result<GeeModel> {
    let responses = grid
        .cutpoints()
        .iter()
        .map(|&t| match weights {
            None => pseudo_marginal(data, t),
            Some(w) => pseudo_marginal_ipcw(data, t, w),
        })
        .collect::<Result<Vec<_>>>()?;
    let covariates: Vec<&[f64]> = data.records().iter().map(|r| r.covariates.as_slice()).collect();
    fit_cloglog_gee(&covariates, &responses, variance)
}

/// Independence-working-correlation GEE for responses `y[j][i]` with mean
/// `exp(-exp(alpha_j + beta . z_i))`, by Fisher scoring with step halving on
/// the quasi-likelihood.
pub fn fit_cloglog_gee(covariates: &[&[f64]], responses: &[Vec<f64>], variance: GeeVariance) -> Result<GeeModel> {
    let n = covariates.len();
    let jn = responses.len();
    if n == 0 || jn == 0 {
        return Err(SurvError::EmptyDataset);
    }
    if responses.iter().any(|r| r.len() != n) {
        return Err(SurvError::DimensionMismatch(
            "response rows differ from subject count".into(),
        ));
    }
    let p = covariates[0].len();
    let q = jn + p;

    let mut theta = vec![0.0; q];
    for (j, y) in responses.iter().enumerate() {
        let m = (y.iter().sum::<f64>() / n as f64).clamp(0.01, 0.99);
        theta[j] = (-m.ln()).ln();
    }

    let (mut score, mut info) = score_and_information(&theta, covariates, responses, variance);
    for iteration in 1..=GEE_MAX_ITERATIONS {
        let step = cholesky_solve(&info, &score).ok_or(SurvError::GeeNotConverged(iteration))?;
        let max_step = step.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        if max_step <= GEE_TOLERANCE {
            for (t, s) in theta.iter_mut().zip(&step) {
                *t += s;
            }
            return Ok(GeeModel {
                time_intercepts: theta[..jn].to_vec(),
                beta: theta[jn..].to_vec(),
                iterations: iteration,
            });
        }
        // cap the step so exp() stays finite, then halve until the
        // quasi-likelihood improves; close to the root its change is below
        // rounding and the full step is taken
        let advance = |scale: f64| -> Vec<f64> { theta.iter().zip(&step).map(|(t, s)| t + scale * s).collect() };
        let accepted = if max_step <= GEE_FULL_STEP {
            Some(advance(1.0))
        } else {
            let current = quasi_loglik(&theta, covariates, responses, variance);
            let mut scale = (5.0 / max_step).min(1.0);
            (0..GEE_MAX_HALVINGS).find_map(|_| {
                let trial = advance(scale);
                scale *= 0.5;
                (quasi_loglik(&trial, covariates, responses, variance) >= current).then_some(trial)
            })
        };
        theta = accepted.ok_or(SurvError::GeeNotConverged(iteration))?;
        (score, info) = score_and_information(&theta, covariates, responses, variance);
    }
    Err(SurvError::GeeNotConverged(GEE_MAX_ITERATIONS))
}

/// Quasi-log-likelihood whose gradient is the estimating function; `-inf`
/// off the finite range.
fn quasi_loglik(theta: &[f64], covariates: &[&[f64]], responses: &[Vec<f64>], variance: GeeVariance) -> f64 {
    let jn = responses.len();
    let mut q = 0.0;
    for (j, y) in responses.iter().enumerate() {
        for (i, z) in covariates.iter().enumerate() {
            let e = (theta[j] + dot(&theta[jn..], z)).exp();
            q += match variance {
                GeeVariance::Constant => -0.5 * (y[i] - (-e).exp()).powi(2),
                GeeVariance::Binomial => -y[i] * e + (1.0 - y[i]) * (-(-e).exp_m1()).ln(),
            };
        }
    }
    if q.is_finite() {
        q
    } else {
        f64::NEG_INFINITY
    }
}

/// Estimating function and Fisher information at `theta`.
fn score_and_information(
    theta: &[f64],
    covariates: &[&[f64]],
    responses: &[Vec<f64>],
    variance: GeeVariance,
) -> (Vec<f64>, Vec<f64>) {
    let jn = responses.len();
    let p = covariates[0].len();
    let q = jn + p;
    let mut score = vec![0.0; q];
    let mut info = vec![0.0; q * q];
    for (j, y) in responses.iter().enumerate() {
        for (i, z) in covariates.iter().enumerate() {
            let eta = theta[j] + dot(&theta[jn..], z);
            let e = eta.exp();
            let mu = (-e).exp();
            let var = match variance {
                GeeVariance::Constant => 1.0,
                GeeVariance::Binomial => mu * -(-e).exp_m1(),
            };
            if !(var > 0.0) {
                continue;
            }
            let dmu = -e * mu;
            let resid = (y[i] - mu) * dmu / var;
            let w = dmu * dmu / var;
            // design row: e_j followed by z
            score[j] += resid;
            info[j * q + j] += w;
            for a in 0..p {
                score[jn + a] += resid * z[a];
                info[j * q + jn + a] += w * z[a];
                info[(jn + a) * q + j] += w * z[a];
                for b in 0..p {
                    info[(jn + a) * q + jn + b] += w * z[a] * z[b];
                }
            }
        }
    }
    (score, info)
}
