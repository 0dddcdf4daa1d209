use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use pseudosurv::cox::{censoring_weights, fit_cox, CoxTarget};
use pseudosurv::estimators::{WeightFunction, DEFAULT_WEIGHT_CAP};
use pseudosurv::experiments::{
    mean_mse, run_cox, run_friedman, write_cox_betas, write_cox_metrics, write_friedman_metrics, write_summary,
    CoxStudy, FriedmanStudy, SearchSettings,
};
use pseudosurv::fmt::sig6;
use pseudosurv::metrics::evaluate;
use pseudosurv::net::{default_grid, grid_search, MlpModel, DEFAULT_BATCH_SIZE, DEFAULT_BUDGET, DEFAULT_EPOCHS};
use pseudosurv::pseudo::{make_grid, pseudo_conditional, GridSpec, PseudoTable, TimeGrid};
use pseudosurv::sim::{gen_cox, gen_friedman_aft, CoxSimSpec, FriedmanSpec, Simulated};
use pseudosurv::{Dataset, Result, SurvError};

const DEFAULT_PERCENTILES: [f64; 6] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];

#[derive(Parser)]
#[command(
    name = "pseudosurv",
    version,
    about = "Survival prediction from pseudo conditional survival probabilities"
)]
struct Cli {
    /// worker threads (default: available parallelism); outputs do not depend on it
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the pseudo conditional survival table from a survival CSV
    Transform(TransformArgs),
    /// Grid-search, fit and save the network
    Train(TrainArgs),
    /// Conditional and marginal survival at the model's grid times
    Predict(PredictArgs),
    /// Time-dependent c-index and Brier score of saved predictions
    Evaluate(EvaluateArgs),
    /// Run a simulation study or emit one simulated dataset
    Simulate(SimulateArgs),
    /// Seeded random train/test split
    Split(SplitArgs),
}

/// Options shared by the commands that build a pseudo table.
#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(default)]
struct TableOpts {
    /// survival CSV with header `time,event,<covariates>`
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<PathBuf>,
    /// grid as quantile levels of the observed times
    #[arg(long, value_delimiter = ',', conflicts_with = "times")]
    #[serde(skip_serializing_if = "Option::is_none")]
    percentiles: Option<Vec<f64>>,
    /// explicit grid times
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    times: Option<Vec<f64>>,
    /// weight pseudo values by inverse probability of censoring
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    ipcw: Option<bool>,
    /// covariates of the censoring Cox model (default: all)
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    censor_covariates: Option<Vec<String>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    weight_cap: Option<f64>,
    /// drop rows with missing cells instead of failing
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    drop_incomplete: Option<bool>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(default)]
struct TransformArgs {
    /// JSON file with any of these options; flags override it
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    table: TableOpts,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(default)]
struct TrainArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    table: TableOpts,
    /// where to write the model JSON
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<PathBuf>,
    /// number of configurations sampled from the hyperparameter grid
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    budget: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    folds: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    batch_size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(default, deny_unknown_fields)]
struct PredictArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<PathBuf>,
    /// restrict output to these grid times (must belong to the model grid)
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    times: Option<Vec<f64>>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    drop_incomplete: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(default, deny_unknown_fields)]
struct EvaluateArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// survival CSV of the subjects that were predicted
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<PathBuf>,
    /// output of `predict`
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    predictions: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<PathBuf>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    drop_incomplete: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
enum Study {
    Friedman,
    CoxDependent,
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(default, deny_unknown_fields)]
struct SimulateArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    study: Option<Study>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    replicates: Option<usize>,
    /// friedman: subjects per dataset (split 75/25); cox-dependent: training subjects
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    /// cox-dependent: test subjects
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_test: Option<usize>,
    /// friedman: target censoring fraction
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    censoring_rate: Option<f64>,
    /// cox-dependent: also fit the networks
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    networks: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    budget: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    folds: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    batch_size: Option<usize>,
    /// directory for the study tables
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    output_dir: Option<PathBuf>,
    /// write a single simulated dataset here (plus a metadata sidecar) instead of running the study
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    emit_data: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(default, deny_unknown_fields)]
struct SplitArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    train: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    test: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    train_fraction: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    drop_incomplete: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

fn input_error(msg: impl Into<String>) -> SurvError {
    SurvError::InvalidInput(msg.into())
}

/// Config-file values overlaid with the flags that were given.
fn merge<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Path>) -> Result<T> {
    let Some(path) = config else {
        return Ok(serde_json::from_value(serde_json::to_value(flags)?)?);
    };
    let mut base: Value = serde_json::from_reader(File::open(path)?)?;
    let Value::Object(base_map) = &mut base else {
        return Err(input_error(format!("{}: config must be a JSON object", path.display())));
    };
    if let Value::Object(over) = serde_json::to_value(flags)? {
        base_map.extend(over);
    }
    Ok(serde_json::from_value(base)?)
}

fn required<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T> {
    value.as_ref().ok_or_else(|| input_error(format!("missing --{flag}")))
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn read_data(path: &Path, drop_incomplete: Option<bool>) -> Result<Dataset> {
    Dataset::read_csv_path(path, drop_incomplete.unwrap_or(false))
}

impl TableOpts {
    fn fill_defaults(&mut self) {
        if self.times.is_none() && self.percentiles.is_none() {
            self.percentiles = Some(DEFAULT_PERCENTILES.to_vec());
        }
        self.ipcw.get_or_insert(false);
        self.weight_cap.get_or_insert(DEFAULT_WEIGHT_CAP);
        self.drop_incomplete.get_or_insert(false);
    }

    fn grid_spec(&self) -> GridSpec {
        match (&self.times, &self.percentiles) {
            (Some(t), _) => GridSpec::Explicit(t.clone()),
            (None, Some(q)) => GridSpec::Percentiles(q.clone()),
            (None, None) => GridSpec::Percentiles(DEFAULT_PERCENTILES.to_vec()),
        }
    }

    /// Dataset, grid, optional weights and a metadata summary.
    fn build(&self) -> Result<(Dataset, TimeGrid, Option<WeightFunction>, Value)> {
        let data = read_data(required(&self.input, "input")?, self.drop_incomplete)?;
        let grid = make_grid(&data, &self.grid_spec())?;
        let mut weight_meta = Value::Null;
        let weights = if self.ipcw == Some(true) {
            let names = match &self.censor_covariates {
                Some(names) => names.clone(),
                None => data.covariate_names().to_vec(),
            };
            let censor_data = data.select_covariates(&names)?;
            let model = fit_cox(&censor_data, CoxTarget::Censoring)?;
            let cap = self.weight_cap.unwrap_or(DEFAULT_WEIGHT_CAP);
            weight_meta = json!({
                "censoring_model": "cox",
                "covariates": names,
                "covariates_defaulted_to_all": self.censor_covariates.is_none(),
                "beta": model.beta,
                "iterations": model.iterations,
                "log_likelihood": model.log_likelihood,
                "weight_cap": cap,
            });
            Some(censoring_weights(&censor_data, &model, cap)?)
        } else {
            None
        };
        let meta = json!({
            "n": data.len(),
            "p": data.n_covariates(),
            "covariate_names": data.covariate_names(),
            "censoring_fraction": data.censoring_fraction(),
            "grid": grid.cutpoints(),
            "ipcw": weights.is_some(),
            "weights": weight_meta,
        });
        Ok((data, grid, weights, meta))
    }
}

fn table_meta(table: &PseudoTable, mut meta: Value) -> Value {
    meta["rows"] = json!(table.rows.len());
    meta["risk_set_sizes"] = json!(table.risk_set_sizes);
    meta["zero_event_intervals"] = json!(table.zero_event_intervals);
    meta
}

fn cmd_transform(flags: &TransformArgs) -> Result<()> {
    let mut args = merge(flags, flags.config.as_deref())?;
    args.table.fill_defaults();
    args.seed.get_or_insert(0);
    let output = required(&args.output, "output")?.clone();
    write_json(&sidecar(&output, ".config.json"), &args)?;

    let (data, grid, weights, meta) = args.table.build()?;
    let table = pseudo_conditional(&data, &grid, weights.as_ref())?;
    table.write_csv_path(&output)?;
    write_json(&sidecar(&output, ".meta.json"), &table_meta(&table, meta))?;
    Ok(())
}

fn cmd_train(flags: &TrainArgs) -> Result<()> {
    let mut args = merge(flags, flags.config.as_deref())?;
    args.table.fill_defaults();
    args.budget.get_or_insert(DEFAULT_BUDGET);
    args.folds.get_or_insert(5);
    args.epochs.get_or_insert(DEFAULT_EPOCHS);
    args.batch_size.get_or_insert(DEFAULT_BATCH_SIZE);
    let seed = *args.seed.get_or_insert(0);
    let model_path = required(&args.model, "model")?.clone();
    write_json(&sidecar(&model_path, ".config.json"), &args)?;

    let (data, grid, weights, meta) = args.table.build()?;
    let table = pseudo_conditional(&data, &grid, weights.as_ref())?;
    let configs = default_grid(
        args.epochs.unwrap_or(DEFAULT_EPOCHS),
        args.batch_size.unwrap_or(DEFAULT_BATCH_SIZE),
        seed,
    );
    let budget = args.budget.unwrap_or(DEFAULT_BUDGET);
    let folds = args.folds.unwrap_or(5);
    let out = grid_search(&table, &data, &configs, folds, &grid, budget, seed)?;
    out.model.save(&model_path)?;

    let mut meta = table_meta(&table, meta);
    meta["best_index"] = json!(out.best_index);
    meta["best_config"] = serde_json::to_value(&out.best_config)?;
    meta["cv_scores"] = json!(out
        .scores
        .iter()
        .zip(&out.losses)
        .map(|((g, s), l)| {
            json!({
                "grid_index": g,
                "config": configs[*g],
                "mean_c_index": if s.is_nan() { Value::Null } else { json!(s) },
                "mean_heldout_mse": l,
            })
        })
        .collect::<Vec<_>>());
    write_json(&sidecar(&model_path, ".meta.json"), &meta)?;
    Ok(())
}

fn cmd_predict(flags: &PredictArgs) -> Result<()> {
    let mut args = merge(flags, flags.config.as_deref())?;
    args.drop_incomplete.get_or_insert(false);
    args.seed.get_or_insert(0);
    let output = required(&args.output, "output")?.clone();
    let model_path = required(&args.model, "model")?;
    if !model_path.exists() {
        return Err(input_error(format!("model file {} not found", model_path.display())));
    }
    let model = MlpModel::load(model_path)?;
    let indices: Vec<usize> = match &args.times {
        None => (0..model.n_intervals()).collect(),
        Some(times) => times
            .iter()
            .map(|t| {
                model.cutpoints.iter().position(|c| c == t).ok_or_else(|| {
                    input_error(format!(
                        "incompatible grid: time {t} is not a model cutpoint {:?}",
                        model.cutpoints
                    ))
                })
            })
            .collect::<Result<_>>()?,
    };
    write_json(&sidecar(&output, ".config.json"), &args)?;

    let data = read_data(required(&args.input, "input")?, args.drop_incomplete)?;
    if data.n_covariates() != model.n_covariates() {
        return Err(SurvError::DimensionMismatch(format!(
            "model expects {} covariates, data has {}",
            model.n_covariates(),
            data.n_covariates()
        )));
    }
    let mut w = BufWriter::new(File::create(&output)?);
    writeln!(w, "id,time_index,time,conditional,marginal")?;
    for (i, r) in data.records().iter().enumerate() {
        let cond = model.conditional_curve(&r.covariates)?;
        let marg = model.marginal_curve(&r.covariates)?;
        for &j in &indices {
            writeln!(
                w,
                "{},{j},{},{},{}",
                i + 1,
                sig6(model.cutpoints[j]),
                sig6(cond[j]),
                sig6(marg[j])
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct PredictionRow {
    id: usize,
    time_index: usize,
    time: f64,
    #[allow(dead_code)]
    conditional: f64,
    marginal: f64,
}

fn cmd_evaluate(flags: &EvaluateArgs) -> Result<()> {
    let mut args = merge(flags, flags.config.as_deref())?;
    args.drop_incomplete.get_or_insert(false);
    args.seed.get_or_insert(0);
    let output = required(&args.output, "output")?.clone();
    write_json(&sidecar(&output, ".config.json"), &args)?;

    let data = read_data(required(&args.input, "input")?, args.drop_incomplete)?;
    let mut reader = csv::Reader::from_path(required(&args.predictions, "predictions")?)?;
    let mut times: BTreeMap<usize, f64> = BTreeMap::new();
    let mut values: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for row in reader.deserialize() {
        let row: PredictionRow = row?;
        if row.id == 0 || row.id > data.len() {
            return Err(input_error(format!(
                "prediction id {} outside 1..={}",
                row.id,
                data.len()
            )));
        }
        if let Some(&t) = times.get(&row.time_index) {
            if t != row.time {
                return Err(input_error(format!("time index {} has two times", row.time_index)));
            }
        }
        times.insert(row.time_index, row.time);
        values.insert((row.id - 1, row.time_index), row.marginal);
    }
    let eval_times: Vec<f64> = times.values().copied().collect();
    let predicted = (0..data.len())
        .map(|i| {
            times
                .keys()
                .map(|&j| {
                    values
                        .get(&(i, j))
                        .copied()
                        .ok_or_else(|| input_error(format!("no prediction for subject {} at index {j}", i + 1)))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let report = evaluate(&data, &predicted, &eval_times)?;
    report.write_csv_path(&output)?;
    Ok(())
}

fn write_sim(sim: &Simulated, path: &Path) -> Result<()> {
    sim.data.write_csv_path(path)?;
    write_json(&sidecar(path, ".meta.json"), &sim.meta)
}

fn cmd_simulate(flags: &SimulateArgs) -> Result<()> {
    let mut args = merge(flags, flags.config.as_deref())?;
    let study = *required(&args.study, "study")?;
    let seed = *args.seed.get_or_insert(0);
    let search = SearchSettings {
        budget: *args.budget.get_or_insert(DEFAULT_BUDGET),
        folds: *args.folds.get_or_insert(5),
        epochs: *args.epochs.get_or_insert(DEFAULT_EPOCHS),
        batch_size: *args.batch_size.get_or_insert(DEFAULT_BATCH_SIZE),
    };
    let replicates = *args.replicates.get_or_insert(100);
    match study {
        Study::Friedman => {
            args.n.get_or_insert(5000);
            args.censoring_rate.get_or_insert(0.4);
        }
        Study::CoxDependent => {
            args.n.get_or_insert(2000);
            args.n_test.get_or_insert(2000);
            args.networks.get_or_insert(true);
        }
    }
    let n = args.n.unwrap_or_default();

    if let Some(path) = args.emit_data.clone() {
        write_json(&sidecar(&path, ".config.json"), &args)?;
        let sim = match study {
            Study::Friedman => gen_friedman_aft(&FriedmanSpec {
                n,
                censoring_rate: args.censoring_rate.unwrap_or(0.4),
                seed,
                ..FriedmanSpec::default()
            })?,
            Study::CoxDependent => gen_cox(&CoxSimSpec {
                n,
                seed,
                ..CoxSimSpec::default()
            })?,
        };
        return write_sim(&sim, &path);
    }

    let dir = required(&args.output_dir, "output-dir")?.clone();
    std::fs::create_dir_all(&dir)?;
    write_json(&dir.join("simulate.config.json"), &args)?;
    match study {
        Study::Friedman => {
            let study = FriedmanStudy {
                replicates,
                spec: FriedmanSpec {
                    n,
                    censoring_rate: args.censoring_rate.unwrap_or(0.4),
                    ..FriedmanSpec::default()
                },
                search,
                seed,
                ..FriedmanStudy::default()
            };
            let reps = run_friedman(&study)?;
            write_friedman_metrics(File::create(dir.join("metrics.csv"))?, &reps)?;
            let pick = |f: fn(&pseudosurv::experiments::FriedmanReplicate) -> &pseudosurv::metrics::EvalReport| {
                reps.iter().map(f).collect::<Vec<_>>()
            };
            write_summary(
                File::create(dir.join("summary.csv"))?,
                &[
                    ("dnnsurv", pick(|r| &r.network)),
                    ("cox", pick(|r| &r.cox)),
                    ("dnnsurv_6_shared", pick(|r| &r.network_six_shared)),
                    ("dnnsurv_2", pick(|r| &r.network_two)),
                ],
            )?;
        }
        Study::CoxDependent => {
            let study = CoxStudy {
                replicates,
                n_train: n,
                n_test: args.n_test.unwrap_or(2000),
                spec: CoxSimSpec::default(),
                search,
                networks: args.networks.unwrap_or(true),
                seed,
            };
            let reps = run_cox(&study)?;
            write_cox_betas(File::create(dir.join("betas.csv"))?, &reps)?;
            let mut w = BufWriter::new(File::create(dir.join("beta_summary.csv"))?);
            writeln!(w, "method,mean_beta,mse,replicates")?;
            for (name, values) in [
                ("gee", reps.iter().map(|r| r.gee_beta).collect::<Vec<_>>()),
                ("gee_ipcw", reps.iter().map(|r| r.gee_ipcw_beta).collect()),
                ("cox", reps.iter().map(|r| r.cox_beta).collect()),
            ] {
                let (mean, mse) = mean_mse(&values, study.spec.beta);
                writeln!(w, "{name},{},{},{}", sig6(mean), sig6(mse), values.len())?;
            }
            w.flush()?;
            write_cox_metrics(File::create(dir.join("metrics.csv"))?, &reps)?;
            let mut rows = vec![("cox", reps.iter().map(|r| &r.cox).collect::<Vec<_>>())];
            if study.networks {
                rows.push(("dnnsurv", reps.iter().filter_map(|r| r.network.as_ref()).collect()));
                rows.push((
                    "dnnsurv_ipcw",
                    reps.iter().filter_map(|r| r.network_ipcw.as_ref()).collect(),
                ));
            }
            write_summary(File::create(dir.join("summary.csv"))?, &rows)?;
        }
    }
    Ok(())
}

fn cmd_split(flags: &SplitArgs) -> Result<()> {
    let mut args = merge(flags, flags.config.as_deref())?;
    let fraction = *args.train_fraction.get_or_insert(0.75);
    let seed = *args.seed.get_or_insert(0);
    args.drop_incomplete.get_or_insert(false);
    let train_path = required(&args.train, "train")?.clone();
    let test_path = required(&args.test, "test")?.clone();
    write_json(&sidecar(&train_path, ".config.json"), &args)?;
    let data = read_data(required(&args.input, "input")?, args.drop_incomplete)?;
    let (train, test) = data.split(fraction, seed)?;
    train.write_csv_path(&train_path)?;
    test.write_csv_path(&test_path)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| input_error(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Transform(a) => cmd_transform(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Split(a) => cmd_split(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}
