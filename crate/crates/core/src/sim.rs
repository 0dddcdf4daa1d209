//! Synthetic survival data: an accelerated failure time model whose mean is
//! a random sum of Gaussian bumps, and a one-covariate Cox model with
//! optional covariate-dependent censoring.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SurvivalRecord};
use crate::error::{Result, SurvError};

/// Variance of the Gamma(2, 1) log-time residual.
const RESIDUAL_VARIANCE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanSpec {
    pub p: usize,
    pub n_terms: usize,
    pub seed: u64,
    pub snr: f64,
    pub censoring_rate: f64,
    pub n: usize,
}

impl Default for FriedmanSpec {
    fn default() -> Self {
        Self {
            p: 20,
            n_terms: 10,
            seed: 0,
            snr: 3.0,
            censoring_rate: 0.4,
            n: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxSimSpec {
    pub base_hazard: f64,
    pub beta: f64,
    pub n: usize,
    /// Censoring times drawn from the same Cox model as the event times.
    pub dependent_censoring: bool,
    /// Target censoring fraction for independent exponential censoring when
    /// `dependent_censoring` is off; 0 leaves the data uncensored.
    pub independent_censoring_rate: f64,
    pub seed: u64,
}

impl Default for CoxSimSpec {
    fn default() -> Self {
        Self {
            base_hazard: 0.1,
            beta: 1.0,
            n: 2000,
            dependent_censoring: true,
            independent_censoring_rate: 0.0,
            seed: 0,
        }
    }
}

/// Provenance written next to a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetadata {
    pub generator: String,
    pub seed: u64,
    pub n: usize,
    pub spec: serde_json::Value,
    pub calibrated_censoring_rate: Option<f64>,
    pub achieved_snr: Option<f64>,
    pub censoring_fraction: f64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Simulated {
    pub data: Dataset,
    pub meta: SimMetadata,
    /// Latent mean of log survival time per subject (AFT generator only).
    pub mean_log_time: Option<Vec<f64>>,
}

/// One Gaussian bump `exp(-0.5 (x - center)' V (x - center))` over a subset
/// of the covariates, `V = U diag(scale^2) U'`.
#[derive(Debug, Clone)]
struct Bump {
    coefficient: f64,
    vars: Vec<usize>,
    center: Vec<f64>,
    /// rows are the orthonormal directions `u_k`
    directions: Vec<Vec<f64>>,
    scales: Vec<f64>,
}

impl Bump {
    fn draw(rng: &mut ChaCha8Rng, p: usize) -> Self {
        let coefficient = rng.random_range(-1.0..=1.0);
        let r: f64 = Exp::new(0.5).expect("positive rate").sample(rng);
        let size = ((1.5 + r).floor() as usize).clamp(1, p);
        let mut vars = sample(rng, p, size).into_vec();
        vars.sort_unstable();
        let center = (0..size).map(|_| rng.sample(StandardNormal)).collect();
        let directions = random_rotation(rng, size);
        let scales = (0..size).map(|_| rng.random_range(0.1..=2.0)).collect();
        Self {
            coefficient,
            vars,
            center,
            directions,
            scales,
        }
    }

    fn eval(&self, z: &[f64]) -> f64 {
        let diff: Vec<f64> = self.vars.iter().zip(&self.center).map(|(&v, c)| z[v] - c).collect();
        let quad: f64 = self
            .directions
            .iter()
            .zip(&self.scales)
            .map(|(u, s)| {
                let proj: f64 = u.iter().zip(&diff).map(|(a, b)| a * b).sum();
                s * s * proj * proj
            })
            .sum();
        (-0.5 * quad).exp()
    }
}

/// Orthonormalised Gaussian matrix (Gram-Schmidt), as rows.
fn random_rotation(rng: &mut ChaCha8Rng, k: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(k);
    while rows.len() < k {
        let mut v: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        for u in &rows {
            let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            rows.push(v);
        }
    }
    rows
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// AFT data `log X = mu(Z) + eps`, `eps ~ Gamma(2, 1)`, with exponential
/// censoring calibrated to `spec.censoring_rate`.
pub fn gen_friedman_aft(spec: &FriedmanSpec) -> Result<Simulated> {
    if spec.p == 0 || spec.n < 2 || spec.n_terms == 0 {
        return Err(SurvError::InvalidInput(
            "friedman spec needs p >= 1, n >= 2, n_terms >= 1".into(),
        ));
    }
    if !(spec.snr > 0.0) {
        return Err(SurvError::InvalidInput("snr must be positive".into()));
    }
    if !(spec.censoring_rate > 0.0 && spec.censoring_rate < 1.0) {
        return Err(SurvError::InvalidInput("censoring rate must lie in (0,1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bumps: Vec<Bump> = (0..spec.n_terms).map(|_| Bump::draw(&mut rng, spec.p)).collect();

    let z: Vec<Vec<f64>> = (0..spec.n)
        .map(|_| (0..spec.p).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let raw: Vec<f64> = z
        .iter()
        .map(|zi| bumps.iter().map(|b| b.coefficient * b.eval(zi)).sum())
        .collect();
    let (m, v) = mean_var(&raw);
    let scale = if v > 0.0 {
        (spec.snr * RESIDUAL_VARIANCE / v).sqrt()
    } else {
        1.0
    };
    let mu: Vec<f64> = raw.iter().map(|x| (x - m) * scale).collect();

    let gamma = Gamma::new(2.0, 1.0).expect("valid gamma");
    let eps: Vec<f64> = (0..spec.n).map(|_| gamma.sample(&mut rng)).collect();
    let x: Vec<f64> = mu.iter().zip(&eps).map(|(a, e)| (a + e).exp()).collect();

    let rate = calibrate_censoring(&x, spec.censoring_rate)?;
    let records: Vec<SurvivalRecord> = x
        .iter()
        .zip(z)
        .map(|(&xi, zi)| {
            let e: f64 = rng.sample(Exp1);
            let c = e / rate;
            SurvivalRecord::new(xi.min(c), xi <= c, zi)
        })
        .collect();
    let data = Dataset::new(records, Dataset::default_names(spec.p))?;
    let achieved_snr = mean_var(&mu).1 / mean_var(&eps).1;
    let subset_sizes: Vec<usize> = bumps.iter().map(|b| b.vars.len()).collect();
    let meta = SimMetadata {
        generator: "friedman-aft".into(),
        seed: spec.seed,
        n: spec.n,
        spec: serde_json::to_value(spec)?,
        calibrated_censoring_rate: Some(rate),
        achieved_snr: Some(achieved_snr),
        censoring_fraction: data.censoring_fraction(),
        notes: vec![
            "Z ~ N(0, I_p); log X = mu(Z) + eps, eps ~ Gamma(shape 2, rate 1)".into(),
            "mu = sum_l a_l g_l(Z_(l)), a_l ~ U[-1,1], centered and scaled so Var(mu) = snr * Var(eps) with Var(eps) = 2".into(),
            "subset size = min(floor(1.5 + r), p), r ~ Exp(mean 2); centers ~ N(0, I); V_l = U D U', U random rotation, sqrt of eigenvalues ~ U[0.1, 2]".into(),
            format!("bump subset sizes: {subset_sizes:?}"),
            "censoring C ~ Exp(rate) independent of Z, rate solved by bisection on the sample".into(),
        ],
    };
    Ok(Simulated {
        data,
        meta,
        mean_log_time: Some(mu),
    })
}

/// One covariate `z ~ N(0,1)`, hazard `base_hazard * exp(beta z)`.
pub fn gen_cox(spec: &CoxSimSpec) -> Result<Simulated> {
    if !(spec.base_hazard > 0.0) {
        return Err(SurvError::InvalidInput("base hazard must be positive".into()));
    }
    if spec.n == 0 {
        return Err(SurvError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let z: Vec<f64> = (0..spec.n).map(|_| rng.sample(StandardNormal)).collect();
    let x: Vec<f64> = z
        .iter()
        .map(|&zi| {
            let e: f64 = rng.sample(Exp1);
            e / (spec.base_hazard * (spec.beta * zi).exp())
        })
        .collect();
    let mut calibrated = None;
    let c: Vec<f64> = if spec.dependent_censoring {
        z.iter()
            .map(|&zi| {
                let e: f64 = rng.sample(Exp1);
                e / (spec.base_hazard * (spec.beta * zi).exp())
            })
            .collect()
    } else if spec.independent_censoring_rate > 0.0 {
        let rate = calibrate_censoring(&x, spec.independent_censoring_rate)?;
        calibrated = Some(rate);
        (0..spec.n)
            .map(|_| {
                let e: f64 = rng.sample(Exp1);
                e / rate
            })
            .collect()
    } else {
        vec![f64::INFINITY; spec.n]
    };
    let records: Vec<SurvivalRecord> = (0..spec.n)
        .map(|i| SurvivalRecord::new(x[i].min(c[i]), x[i] <= c[i], vec![z[i]]))
        .collect();
    let data = Dataset::new(records, vec!["z".into()])?;
    let censoring = if spec.dependent_censoring {
        "censoring time from the same Cox model as the event time"
    } else if calibrated.is_some() {
        "independent exponential censoring, rate solved by bisection"
    } else {
        "no censoring"
    };
    let meta = SimMetadata {
        generator: "cox".into(),
        seed: spec.seed,
        n: spec.n,
        spec: serde_json::to_value(spec)?,
        calibrated_censoring_rate: calibrated,
        achieved_snr: None,
        censoring_fraction: data.censoring_fraction(),
        notes: vec![
            "z ~ N(0,1); X = E / (base_hazard * exp(beta z)), E ~ Exp(1)".into(),
            censoring.into(),
        ],
    };
    Ok(Simulated {
        data,
        meta,
        mean_log_time: None,
    })
}

/// Exponential censoring rate under which the expected censored fraction
/// `mean_i P(C < X_i) = mean_i (1 - exp(-rate X_i))` equals `target_rate`.
pub fn calibrate_censoring(survival_times: &[f64], target_rate: f64) -> Result<f64> {
    if !(target_rate > 0.0 && target_rate < 1.0) {
        return Err(SurvError::Calibration(format!(
            "target rate must lie in (0,1), got {target_rate}"
        )));
    }
    if survival_times.is_empty() || survival_times.iter().any(|x| !(*x > 0.0)) {
        return Err(SurvError::Calibration("survival times must be positive".into()));
    }
    let mut sorted = survival_times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let fraction = |rate: f64| -> f64 {
        survival_times.iter().map(|&x| -(-rate * x).exp_m1()).sum::<f64>() / survival_times.len() as f64
    };
    // search in log-rate over a window tied to the time scale
    let (mut lo, mut hi) = ((1e-8 / median).ln(), (1e4 / median).ln());
    if fraction(lo.exp()) > target_rate || fraction(hi.exp()) < target_rate {
        return Err(SurvError::Calibration(format!(
            "censoring rate {target_rate} is not reachable within [1e-8, 1e4] / median time"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = fraction(mid.exp());
        if (f - target_rate).abs() <= 1e-9 {
            return Ok(mid.exp());
        }
        if f < target_rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}
