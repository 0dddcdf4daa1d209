//! End-to-end simulation studies: the nonlinear AFT comparison of the network
//! against a linear Cox model (with a coarser two-interval grid as a
//! sensitivity check), and the covariate-dependent censoring study comparing
//! plain and IPCW pseudo values in both GEE and the network.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{cox_predict_survival, fit_gee_with, GeeVariance};
use crate::cox::{censoring_weights, fit_cox, CoxModel, CoxTarget};
use crate::data::Dataset;
use crate::error::Result;
use crate::estimators::{WeightFunction, DEFAULT_WEIGHT_CAP};
use crate::fmt::sig6;
use crate::metrics::{evaluate, EvalReport};
use crate::net::{
    default_grid, derive_seed, grid_search, MlpModel, DEFAULT_BATCH_SIZE, DEFAULT_BUDGET, DEFAULT_EPOCHS,
};
use crate::pseudo::{make_grid, pseudo_conditional, GridSpec, TimeGrid};
use crate::sim::{gen_cox, gen_friedman_aft, CoxSimSpec, FriedmanSpec};

const REPLICATE_STREAM: u64 = 0x3c6e_f372_fe94_f82b;
const SEARCH_STREAM: u64 = 0xa54f_f53a_5f1d_36f1;

/// Percentile levels of the six-interval grid.
pub const SIX_INTERVALS: [f64; 6] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
/// Percentile levels of the coarse grid.
pub const TWO_INTERVALS: [f64; 2] = [0.2, 0.4];
/// Percentile levels used for the dependent-censoring study.
pub const FIVE_POINTS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSettings {
    pub budget: usize,
    pub folds: usize,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            folds: 5,
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
        }
    }
}

/// Random grid search on the pseudo conditional values of `train`, with the
/// grid cutpoints doubling as the CV evaluation horizons.
pub fn fit_network(
    train: &Dataset,
    grid: &TimeGrid,
    weights: Option<&WeightFunction>,
    search: &SearchSettings,
    seed: u64,
) -> Result<MlpModel> {
    let table = pseudo_conditional(train, grid, weights)?;
    let configs = default_grid(search.epochs, search.batch_size, seed);
    let out = grid_search(&table, train, &configs, search.folds, grid, search.budget, seed)?;
    Ok(out.model)
}

pub fn network_survival(model: &MlpModel, data: &Dataset, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    data.records()
        .iter()
        .map(|r| model.survival_at(&r.covariates, times))
        .collect()
}

pub fn cox_survival(model: &CoxModel, data: &Dataset, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    data.records()
        .iter()
        .map(|r| {
            times
                .iter()
                .map(|&t| cox_predict_survival(model, &r.covariates, t))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanStudy {
    pub replicates: usize,
    /// generator settings; `seed` is replaced per replicate
    pub spec: FriedmanSpec,
    pub train_fraction: f64,
    pub search: SearchSettings,
    pub seed: u64,
}

impl Default for FriedmanStudy {
    fn default() -> Self {
        Self {
            replicates: 100,
            spec: FriedmanSpec::default(),
            train_fraction: 0.75,
            search: SearchSettings::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanReplicate {
    pub replicate: usize,
    pub seed: u64,
    pub censoring_fraction: f64,
    /// network on six intervals, evaluated at the six cutpoints
    pub network: EvalReport,
    /// Cox at the six cutpoints
    pub cox: EvalReport,
    /// network on six intervals at the 20th/40th percentile cutpoints
    pub network_six_shared: EvalReport,
    /// network on two intervals at the same two cutpoints
    pub network_two: EvalReport,
}

/// Seed of replicate `r` in a study seeded with `seed`.
pub fn replicate_seed(seed: u64, r: usize) -> u64 {
    derive_seed(seed, REPLICATE_STREAM, r as u64)
}

pub fn run_friedman_replicate(study: &FriedmanStudy, replicate: usize) -> Result<FriedmanReplicate> {
    let seed = replicate_seed(study.seed, replicate);
    let sim = gen_friedman_aft(&FriedmanSpec {
        seed,
        ..study.spec.clone()
    })?;
    let (train, test) = sim.data.split(study.train_fraction, seed)?;
    let six = make_grid(&train, &GridSpec::Percentiles(SIX_INTERVALS.to_vec()))?;
    let two = make_grid(&train, &GridSpec::Percentiles(TWO_INTERVALS.to_vec()))?;
    let search_seed = derive_seed(seed, SEARCH_STREAM, 0);

    let net6 = fit_network(&train, &six, None, &study.search, search_seed)?;
    let net2 = fit_network(&train, &two, None, &study.search, search_seed)?;
    let cox = fit_cox(&train, CoxTarget::Event)?;

    let t6 = six.cutpoints();
    let t2 = two.cutpoints();
    Ok(FriedmanReplicate {
        replicate,
        seed,
        censoring_fraction: sim.data.censoring_fraction(),
        network: evaluate(&test, &network_survival(&net6, &test, t6)?, t6)?,
        cox: evaluate(&test, &cox_survival(&cox, &test, t6)?, t6)?,
        network_six_shared: evaluate(&test, &network_survival(&net6, &test, t2)?, t2)?,
        network_two: evaluate(&test, &network_survival(&net2, &test, t2)?, t2)?,
    })
}

pub fn run_friedman(study: &FriedmanStudy) -> Result<Vec<FriedmanReplicate>> {
    (0..study.replicates)
        .into_par_iter()
        .map(|r| run_friedman_replicate(study, r))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxStudy {
    pub replicates: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// generator settings; `n` and `seed` are replaced per replicate
    pub spec: CoxSimSpec,
    pub search: SearchSettings,
    /// also fit the two networks (the GEE part alone is much cheaper)
    pub networks: bool,
    pub seed: u64,
}

impl Default for CoxStudy {
    fn default() -> Self {
        Self {
            replicates: 100,
            n_train: 2000,
            n_test: 2000,
            spec: CoxSimSpec::default(),
            search: SearchSettings::default(),
            networks: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxReplicate {
    pub replicate: usize,
    pub seed: u64,
    pub censoring_fraction: f64,
    pub gee_beta: f64,
    pub gee_ipcw_beta: f64,
    pub cox_beta: f64,
    pub cox: EvalReport,
    pub network: Option<EvalReport>,
    pub network_ipcw: Option<EvalReport>,
}

pub fn run_cox_replicate(study: &CoxStudy, replicate: usize) -> Result<CoxReplicate> {
    let seed = replicate_seed(study.seed, replicate);
    let sim = gen_cox(&CoxSimSpec {
        n: study.n_train + study.n_test,
        seed,
        ..study.spec.clone()
    })?;
    let train_idx: Vec<usize> = (0..study.n_train).collect();
    let test_idx: Vec<usize> = (study.n_train..study.n_train + study.n_test).collect();
    let train = sim.data.subset(&train_idx)?;
    let test = sim.data.subset(&test_idx)?;
    let grid = make_grid(&sim.data, &GridSpec::Percentiles(FIVE_POINTS.to_vec()))?;
    grid.check_support(&train)?;
    let times = grid.cutpoints();

    let censor = fit_cox(&train, CoxTarget::Censoring)?;
    let weights = censoring_weights(&train, &censor, DEFAULT_WEIGHT_CAP)?;
    let gee = fit_gee_with(&train, &grid, None, GeeVariance::Constant)?;
    let gee_ipcw = fit_gee_with(&train, &grid, Some(&weights), GeeVariance::Constant)?;
    let cox = fit_cox(&train, CoxTarget::Event)?;

    let (network, network_ipcw) = if study.networks {
        let search_seed = derive_seed(seed, SEARCH_STREAM, 0);
        let plain = fit_network(&train, &grid, None, &study.search, search_seed)?;
        let ipcw = fit_network(&train, &grid, Some(&weights), &study.search, search_seed)?;
        (
            Some(evaluate(&test, &network_survival(&plain, &test, times)?, times)?),
            Some(evaluate(&test, &network_survival(&ipcw, &test, times)?, times)?),
        )
    } else {
        (None, None)
    };

    Ok(CoxReplicate {
        replicate,
        seed,
        censoring_fraction: sim.data.censoring_fraction(),
        gee_beta: gee.beta[0],
        gee_ipcw_beta: gee_ipcw.beta[0],
        cox_beta: cox.beta[0],
        cox: evaluate(&test, &cox_survival(&cox, &test, times)?, times)?,
        network,
        network_ipcw,
    })
}

pub fn run_cox(study: &CoxStudy) -> Result<Vec<CoxReplicate>> {
    (0..study.replicates)
        .into_par_iter()
        .map(|r| run_cox_replicate(study, r))
        .collect()
}

/// Mean and mean squared error around `truth`.
pub fn mean_mse(values: &[f64], truth: f64) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mse = values.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / n;
    (mean, mse)
}

fn write_metric_rows<W: Write>(w: &mut W, replicate: usize, method: &str, report: &EvalReport) -> Result<()> {
    for (h, t) in report.eval_times.iter().enumerate() {
        writeln!(
            w,
            "{replicate},{method},{},{},{},{}",
            sig6(*t),
            sig6(report.c_index[h]),
            sig6(report.brier[h]),
            report.n_pairs[h]
        )?;
    }
    Ok(())
}

const METRIC_HEADER: &str = "replicate,method,time,c_index,brier,n_pairs";

/// Long-format metric table: one row per replicate, method and horizon.
pub fn write_friedman_metrics<W: Write>(mut w: W, reps: &[FriedmanReplicate]) -> Result<()> {
    writeln!(w, "{METRIC_HEADER}")?;
    for r in reps {
        write_metric_rows(&mut w, r.replicate, "dnnsurv", &r.network)?;
        write_metric_rows(&mut w, r.replicate, "cox", &r.cox)?;
        write_metric_rows(&mut w, r.replicate, "dnnsurv_6_shared", &r.network_six_shared)?;
        write_metric_rows(&mut w, r.replicate, "dnnsurv_2", &r.network_two)?;
    }
    Ok(())
}

pub fn write_cox_metrics<W: Write>(mut w: W, reps: &[CoxReplicate]) -> Result<()> {
    writeln!(w, "{METRIC_HEADER}")?;
    for r in reps {
        write_metric_rows(&mut w, r.replicate, "cox", &r.cox)?;
        if let Some(n) = &r.network {
            write_metric_rows(&mut w, r.replicate, "dnnsurv", n)?;
        }
        if let Some(n) = &r.network_ipcw {
            write_metric_rows(&mut w, r.replicate, "dnnsurv_ipcw", n)?;
        }
    }
    Ok(())
}

pub fn write_cox_betas<W: Write>(mut w: W, reps: &[CoxReplicate]) -> Result<()> {
    writeln!(w, "replicate,censoring_fraction,gee,gee_ipcw,cox")?;
    for r in reps {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.replicate,
            sig6(r.censoring_fraction),
            sig6(r.gee_beta),
            sig6(r.gee_ipcw_beta),
            sig6(r.cox_beta)
        )?;
    }
    Ok(())
}

/// Summary table: method, mean c-index, mean Brier over replicates and horizons.
pub fn write_summary<W: Write>(mut w: W, rows: &[(&str, Vec<&EvalReport>)]) -> Result<()> {
    writeln!(w, "method,mean_c_index,mean_brier,replicates")?;
    for (name, reports) in rows {
        let n = reports.len() as f64;
        let c = reports.iter().map(|r| r.mean_c_index()).sum::<f64>() / n;
        let b = reports.iter().map(|r| r.mean_brier()).sum::<f64>() / n;
        writeln!(w, "{name},{},{},{}", sig6(c), sig6(b), reports.len())?;
    }
    Ok(())
}
