//! Fully connected regressor on pseudo conditional survival values, with
//! prediction of conditional and marginal survival and a random grid search.

mod network;
mod search;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SurvError};
use crate::pseudo::{PseudoTable, TimeGrid};

pub use network::{Dense, Gradients, Network};
pub use search::{cv_folds, default_grid, derive_seed, grid_search, SearchOutcome, DEFAULT_BUDGET};

pub const ALLOWED_WIDTHS: [usize; 6] = [4, 8, 16, 32, 64, 128];
pub const ALLOWED_DROPOUT: [f64; 2] = [0.2, 0.4];
pub const ALLOWED_RIDGE: [f64; 3] = [1e-4, 1e-3, 1e-2];
pub const ALLOWED_LEARNING_RATES: [f64; 3] = [0.001, 0.005, 0.01];
pub const DEFAULT_EPOCHS: usize = 100;
pub const DEFAULT_BATCH_SIZE: usize = 256;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const MOMENTUM: f64 = 0.9;
const MODEL_FORMAT: &str = "pseudosurv-mlp";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    ReLU,
    Tanh,
}

impl Activation {
    pub(crate) fn apply_inplace(self, z: &mut Array2<f64>) {
        match self {
            Activation::ReLU => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
        }
    }

    /// Derivative evaluated at the pre-activation.
    pub(crate) fn derivative(self, pre: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::ReLU => pre.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }),
            Activation::Tanh => pre.mapv(|v| {
                let t = v.tanh();
                1.0 - t * t
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Regularization {
    Dropout(f64),
    Ridge(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Optimizer {
    SGDMomentum,
    AdaptiveMoments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    pub regularization: Regularization,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_layers: vec![32, 32],
            activation: Activation::ReLU,
            regularization: Regularization::Ridge(1e-4),
            learning_rate: 0.005,
            optimizer: Optimizer::AdaptiveMoments,
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            seed: 0,
        }
    }
}

fn one_of(x: f64, allowed: &[f64]) -> bool {
    allowed.iter().any(|a| (a - x).abs() <= 1e-12 * a.abs())
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SurvError::InvalidInput(m));
        if self.hidden_layers.is_empty() || self.hidden_layers.len() > 2 {
            return bad(format!(
                "expected 1 or 2 hidden layers, got {}",
                self.hidden_layers.len()
            ));
        }
        if let Some(w) = self.hidden_layers.iter().find(|w| !ALLOWED_WIDTHS.contains(w)) {
            return bad(format!("hidden width {w} not in {ALLOWED_WIDTHS:?}"));
        }
        match self.regularization {
            Regularization::Dropout(r) if !one_of(r, &ALLOWED_DROPOUT) => {
                return bad(format!("dropout rate {r} not in {ALLOWED_DROPOUT:?}"));
            }
            Regularization::Ridge(l) if !one_of(l, &ALLOWED_RIDGE) => {
                return bad(format!("ridge penalty {l} not in {ALLOWED_RIDGE:?}"));
            }
            _ => {}
        }
        if !one_of(self.learning_rate, &ALLOWED_LEARNING_RATES) {
            return bad(format!(
                "learning rate {} not in {ALLOWED_LEARNING_RATES:?}",
                self.learning_rate
            ));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive".into());
        }
        Ok(())
    }

    fn ridge(&self) -> f64 {
        match self.regularization {
            Regularization::Ridge(l) => l,
            Regularization::Dropout(_) => 0.0,
        }
    }

    fn dropout(&self) -> Option<f64> {
        match self.regularization {
            Regularization::Dropout(r) => Some(r),
            Regularization::Ridge(_) => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    /// mean objective over the epoch's mini-batches
    pub loss: Vec<f64>,
    /// L2 norm of all weight matrices at the end of each epoch
    pub weight_norm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub network: Network,
    pub config: MlpConfig,
    pub covariate_mean: Vec<f64>,
    pub covariate_sd: Vec<f64>,
    pub cutpoints: Vec<f64>,
    pub training_log: TrainingLog,
}

/// Column means and sample SDs over subjects (one row per subject); SD 0 -> 1.
fn standardization(table: &PseudoTable) -> (Vec<f64>, Vec<f64>) {
    let p = table.p;
    let mut seen = std::collections::BTreeMap::new();
    for r in &table.rows {
        seen.entry(r.subject_id).or_insert(&r.covariates);
    }
    let n = seen.len() as f64;
    let mut mean = vec![0.0; p];
    for z in seen.values() {
        for (m, v) in mean.iter_mut().zip(z.iter()) {
            *m += v / n;
        }
    }
    let mut sd = vec![0.0; p];
    for z in seen.values() {
        for k in 0..p {
            sd[k] += (z[k] - mean[k]).powi(2);
        }
    }
    for s in &mut sd {
        *s = if n > 1.0 { (*s / (n - 1.0)).sqrt() } else { 0.0 };
        if !(*s > 1e-12) {
            *s = 1.0;
        }
    }
    (mean, sd)
}

fn fill_row(out: &mut [f64], z: &[f64], mean: &[f64], sd: &[f64], time_index: usize) {
    let p = z.len();
    for k in 0..p {
        out[k] = (z[k] - mean[k]) / sd[k];
    }
    for v in &mut out[p..] {
        *v = 0.0;
    }
    out[p + time_index] = 1.0;
}

enum OptState {
    Sgd { velocity: Vec<f64> },
    Adam { m: Vec<f64>, v: Vec<f64>, t: i32 },
}

impl OptState {
    fn new(kind: Optimizer, n: usize) -> Self {
        match kind {
            Optimizer::SGDMomentum => OptState::Sgd { velocity: vec![0.0; n] },
            Optimizer::AdaptiveMoments => OptState::Adam {
                m: vec![0.0; n],
                v: vec![0.0; n],
                t: 0,
            },
        }
    }

    fn step(&mut self, lr: f64, params: &mut [f64], grad: &[f64]) {
        match self {
            OptState::Sgd { velocity } => {
                for ((p, g), v) in params.iter_mut().zip(grad).zip(velocity.iter_mut()) {
                    *v = MOMENTUM * *v - lr * g;
                    *p += *v;
                }
            }
            OptState::Adam { m, v, t } => {
                *t += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(*t);
                let c2 = 1.0 - ADAM_BETA2.powi(*t);
                for i in 0..params.len() {
                    m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * grad[i];
                    v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
                    params[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

fn flatten(g: &Gradients, out: &mut Vec<f64>) {
    out.clear();
    for (w, b) in g.weights.iter().zip(&g.bias) {
        out.extend(w.iter());
        out.extend(b.iter());
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Mini-batch training on the squared error against the pseudo values.
pub fn train(table: &PseudoTable, config: &MlpConfig) -> Result<MlpModel> {
    config.validate()?;
    if table.rows.is_empty() {
        return Err(SurvError::EmptyDataset);
    }
    let p = table.p;
    let jn = table.n_intervals();
    let width = p + jn;
    let (mean, sd) = standardization(table);

    let m = table.rows.len();
    let mut x = Array2::zeros((m, width));
    for (r, mut row) in table.rows.iter().zip(x.axis_iter_mut(Axis(0))) {
        fill_row(
            row.as_slice_mut().expect("standard layout"),
            &r.covariates,
            &mean,
            &sd,
            r.time_index,
        );
    }
    let y = Array1::from_iter(table.rows.iter().map(|r| r.pseudo_value));

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = Network::init(width, &config.hidden_layers, config.activation, &mut rng);
    let out_bias = logit((y.sum() / m as f64).clamp(0.01, 0.99));
    net.layers.last_mut().expect("output layer").bias[0] = out_bias;

    let ridge = config.ridge();
    let dropout = config.dropout();
    let mut params = net.params();
    let mut opt = OptState::new(config.optimizer, params.len());
    let mut flat = Vec::with_capacity(params.len());
    let mut order: Vec<usize> = (0..m).collect();
    let mut log = TrainingLog::default();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let xb = x.select(Axis(0), batch);
            let yb = Array1::from_iter(batch.iter().map(|&i| y[i]));
            let trace = net.forward_train(xb, dropout.map(|r| (r, &mut rng)));
            let sse: f64 = trace.output.iter().zip(yb.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            total += sse + ridge * net.weight_sq_norm() * batch.len() as f64;
            let g = net.backward(&trace, &yb, ridge);
            flatten(&g, &mut flat);
            opt.step(config.learning_rate, &mut params, &flat);
            net.set_params(&params);
        }
        let loss = total / m as f64;
        if !loss.is_finite() || params.iter().any(|v| !v.is_finite()) {
            return Err(SurvError::Diverged { epoch });
        }
        log.loss.push(loss);
        log.weight_norm.push(net.weight_sq_norm().sqrt());
    }

    Ok(MlpModel {
        network: net,
        config: config.clone(),
        covariate_mean: mean,
        covariate_sd: sd,
        cutpoints: table.grid.cutpoints().to_vec(),
        training_log: log,
    })
}

impl MlpModel {
    pub fn n_intervals(&self) -> usize {
        self.cutpoints.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_mean.len()
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.cutpoints.clone())
    }

    fn check_input(&self, covariates: &[f64], time_index: usize) -> Result<()> {
        if covariates.len() != self.n_covariates() {
            return Err(SurvError::DimensionMismatch(format!(
                "model expects {} covariates, got {}",
                self.n_covariates(),
                covariates.len()
            )));
        }
        if time_index >= self.n_intervals() {
            return Err(SurvError::InvalidInput(format!(
                "time index {time_index} out of range 0..{}",
                self.n_intervals()
            )));
        }
        Ok(())
    }

    /// Conditional survival for every interval, one subject.
    pub fn conditional_curve(&self, covariates: &[f64]) -> Result<Vec<f64>> {
        self.check_input(covariates, 0)?;
        let jn = self.n_intervals();
        let width = self.n_covariates() + jn;
        let mut x = Array2::zeros((jn, width));
        for (j, mut row) in x.axis_iter_mut(Axis(0)).enumerate() {
            fill_row(
                row.as_slice_mut().expect("standard layout"),
                covariates,
                &self.covariate_mean,
                &self.covariate_sd,
                j,
            );
        }
        Ok(self.network.predict(x.view()).to_vec())
    }

    pub fn predict_conditional(&self, covariates: &[f64], time_index: usize) -> Result<f64> {
        self.check_input(covariates, time_index)?;
        let width = self.n_covariates() + self.n_intervals();
        let mut x = Array2::zeros((1, width));
        fill_row(
            x.as_slice_mut().expect("standard layout"),
            covariates,
            &self.covariate_mean,
            &self.covariate_sd,
            time_index,
        );
        Ok(self.network.predict(x.view())[0])
    }

    /// Mean squared error of the conditional predictions against the
    /// pseudo values of `table`, without the penalty.
    pub fn table_mse(&self, table: &PseudoTable) -> Result<f64> {
        if table.rows.is_empty() {
            return Err(SurvError::EmptyDataset);
        }
        let width = self.n_covariates() + self.n_intervals();
        let mut x = Array2::zeros((table.rows.len(), width));
        for (r, mut row) in table.rows.iter().zip(x.axis_iter_mut(Axis(0))) {
            self.check_input(&r.covariates, r.time_index)?;
            fill_row(
                row.as_slice_mut().expect("standard layout"),
                &r.covariates,
                &self.covariate_mean,
                &self.covariate_sd,
                r.time_index,
            );
        }
        let pred = self.network.predict(x.view());
        let sse: f64 = pred
            .iter()
            .zip(&table.rows)
            .map(|(a, r)| (a - r.pseudo_value).powi(2))
            .sum();
        Ok(sse / table.rows.len() as f64)
    }

    pub fn predict_marginal(&self, covariates: &[f64], upto_index: usize) -> Result<f64> {
        self.check_input(covariates, upto_index)?;
        let cond = self.conditional_curve(covariates)?;
        Ok(cond[..=upto_index].iter().product())
    }

    /// Marginal survival at each cutpoint.
    pub fn marginal_curve(&self, covariates: &[f64]) -> Result<Vec<f64>> {
        let mut acc = 1.0;
        Ok(self
            .conditional_curve(covariates)?
            .into_iter()
            .map(|c| {
                acc *= c;
                acc
            })
            .collect())
    }

    /// Piecewise-constant marginal survival: the value at the last cutpoint
    /// not exceeding `t`, 1 before the first cutpoint.
    pub fn survival_at(&self, covariates: &[f64], times: &[f64]) -> Result<Vec<f64>> {
        let curve = self.marginal_curve(covariates)?;
        Ok(times
            .iter()
            .map(|&t| {
                let k = self.cutpoints.partition_point(|&c| c <= t);
                if k == 0 {
                    1.0
                } else {
                    curve[k - 1]
                }
            })
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelFile::from(self);
        serde_json::to_writer(BufWriter::new(File::create(path)?), &file)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: ModelFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        file.into_model()
    }
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    fan_in: usize,
    fan_out: usize,
    /// row-major `fan_in x fan_out`
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    config: MlpConfig,
    covariate_mean: Vec<f64>,
    covariate_sd: Vec<f64>,
    cutpoints: Vec<f64>,
    layers: Vec<LayerFile>,
    training_log: TrainingLog,
}

impl From<&MlpModel> for ModelFile {
    fn from(m: &MlpModel) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            config: m.config.clone(),
            covariate_mean: m.covariate_mean.clone(),
            covariate_sd: m.covariate_sd.clone(),
            cutpoints: m.cutpoints.clone(),
            layers: m
                .network
                .layers
                .iter()
                .map(|l| LayerFile {
                    fan_in: l.weights.nrows(),
                    fan_out: l.weights.ncols(),
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
            training_log: m.training_log.clone(),
        }
    }
}

impl ModelFile {
    fn into_model(self) -> Result<MlpModel> {
        let bad = |m: &str| Err(SurvError::InvalidInput(format!("model file: {m}")));
        if self.format != MODEL_FORMAT || self.version != MODEL_VERSION {
            return bad("unsupported format or version");
        }
        if self.covariate_mean.len() != self.covariate_sd.len() {
            return bad("standardization lengths differ");
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut expected_in = self.covariate_mean.len() + self.cutpoints.len();
        for l in self.layers {
            if l.fan_in != expected_in || l.bias.len() != l.fan_out {
                return bad("layer shapes do not chain");
            }
            let weights = Array2::from_shape_vec((l.fan_in, l.fan_out), l.weights)
                .map_err(|_| SurvError::InvalidInput("model file: weight matrix size".into()))?;
            expected_in = l.fan_out;
            layers.push(Dense {
                weights,
                bias: Array1::from(l.bias),
            });
        }
        if expected_in != 1 || layers.len() != self.config.hidden_layers.len() + 1 {
            return bad("output layer must have a single unit");
        }
        let network = Network {
            layers,
            activation: self.config.activation,
        };
        if network.params().iter().any(|v| !v.is_finite()) {
            return bad("non-finite parameter");
        }
        Ok(MlpModel {
            network,
            config: self.config,
            covariate_mean: self.covariate_mean,
            covariate_sd: self.covariate_sd,
            cutpoints: self.cutpoints,
            training_log: self.training_log,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pseudo::PseudoRow;
    use rand::Rng;

    fn table(n: usize, jn: usize, target: impl Fn(usize, usize) -> f64) -> PseudoTable {
        let mut rows = Vec::new();
        for i in 0..n {
            for j in 0..jn {
                rows.push(PseudoRow {
                    subject_id: i,
                    covariates: vec![i as f64 / n as f64, ((i * 7) % 5) as f64],
                    time_index: j,
                    pseudo_value: target(i, j),
                });
            }
        }
        PseudoTable {
            rows,
            grid: TimeGrid::new((1..=jn).map(|j| j as f64).collect()).unwrap(),
            p: 2,
            zero_event_intervals: vec![],
            risk_set_sizes: vec![n; jn],
        }
    }

    fn zero_model(p: usize, jn: usize) -> MlpModel {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Network::init(p + jn, &[4], Activation::Tanh, &mut rng);
        let zeros = vec![0.0; net.n_params()];
        net.set_params(&zeros);
        MlpModel {
            network: net,
            config: MlpConfig {
                hidden_layers: vec![4],
                ..MlpConfig::default()
            },
            covariate_mean: vec![0.0; p],
            covariate_sd: vec![1.0; p],
            cutpoints: (1..=jn).map(|j| j as f64).collect(),
            training_log: TrainingLog::default(),
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Network::init(5, &[4, 4], Activation::Tanh, &mut rng);
        let x = Array2::from_shape_fn((12, 5), |_| rng.random_range(-1.5..1.5));
        let y = Array1::from_shape_fn(12, |_| rng.random_range(-0.1..1.1));
        let ridge = 1e-3;
        let (_, grad) = net.loss_and_gradient(x.view(), &y, ridge);
        let base = net.params();
        let mut picks: Vec<usize> = (0..base.len()).collect();
        picks.shuffle(&mut rng);
        let h = 1e-5;
        for &k in picks.iter().take(20) {
            let mut up = net.clone();
            let mut dn = net.clone();
            let mut pu = base.clone();
            let mut pd = base.clone();
            pu[k] += h;
            pd[k] -= h;
            up.set_params(&pu);
            dn.set_params(&pd);
            let fd = (up.loss(x.view(), &y, ridge) - dn.loss(x.view(), &y, ridge)) / (2.0 * h);
            let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-8);
            assert!(rel <= 1e-5, "param {k}: fd {fd} vs analytic {}", grad[k]);
        }
    }

    #[test]
    fn relu_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Network::init(4, &[8], Activation::ReLU, &mut rng);
        let x = Array2::from_shape_fn((10, 4), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(10, |_| rng.random_range(0.0..1.0));
        let (_, grad) = net.loss_and_gradient(x.view(), &y, 0.0);
        let base = net.params();
        let h = 1e-6;
        for k in 0..base.len() {
            let mut pu = base.clone();
            let mut pd = base.clone();
            pu[k] += h;
            pd[k] -= h;
            let mut up = net.clone();
            let mut dn = net.clone();
            up.set_params(&pu);
            dn.set_params(&pd);
            let fd = (up.loss(x.view(), &y, 0.0) - dn.loss(x.view(), &y, 0.0)) / (2.0 * h);
            assert!((fd - grad[k]).abs() <= 1e-5 * fd.abs().max(grad[k].abs()).max(1e-3));
        }
    }

    #[test]
    fn constant_one_target_is_learned() {
        let t = table(40, 3, |_, _| 1.0);
        let cfg = MlpConfig {
            hidden_layers: vec![8],
            epochs: 200,
            batch_size: 32,
            learning_rate: 0.01,
            ..MlpConfig::default()
        };
        let model = train(&t, &cfg).unwrap();
        for r in &t.rows {
            assert!(model.predict_conditional(&r.covariates, r.time_index).unwrap() >= 0.95);
        }
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let t = table(30, 2, |i, j| ((i + j) % 3) as f64 / 2.0);
        for reg in [Regularization::Dropout(0.2), Regularization::Ridge(1e-3)] {
            let cfg = MlpConfig {
                hidden_layers: vec![8, 4],
                regularization: reg,
                epochs: 5,
                batch_size: 16,
                seed: 9,
                ..MlpConfig::default()
            };
            let a = train(&t, &cfg).unwrap();
            let b = train(&t, &cfg).unwrap();
            let bits = |m: &MlpModel| m.network.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a), bits(&b));
            assert_eq!(a.training_log, b.training_log);
        }
    }

    #[test]
    fn ridge_shrinks_weights_on_zero_target() {
        let t = table(50, 2, |_, _| 0.0);
        let cfg = MlpConfig {
            hidden_layers: vec![16],
            activation: Activation::Tanh,
            regularization: Regularization::Ridge(1e-2),
            optimizer: Optimizer::SGDMomentum,
            learning_rate: 0.01,
            epochs: 40,
            batch_size: 25,
            seed: 3,
        };
        let model = train(&t, &cfg).unwrap();
        let norms = &model.training_log.weight_norm;
        for w in norms[4..].windows(2) {
            assert!(w[1] <= w[0], "{norms:?}");
        }
    }

    #[test]
    fn empty_table_and_bad_config_rejected() {
        let mut t = table(3, 2, |_, _| 0.5);
        assert!(train(
            &t,
            &MlpConfig {
                hidden_layers: vec![5],
                ..MlpConfig::default()
            }
        )
        .is_err());
        assert!(train(
            &t,
            &MlpConfig {
                learning_rate: 0.1,
                ..MlpConfig::default()
            }
        )
        .is_err());
        assert!(train(
            &t,
            &MlpConfig {
                epochs: 0,
                ..MlpConfig::default()
            }
        )
        .is_err());
        t.rows.clear();
        assert!(matches!(train(&t, &MlpConfig::default()), Err(SurvError::EmptyDataset)));
    }

    #[test]
    fn zero_weights_predict_half_and_bias_ten() {
        let mut m = zero_model(2, 3);
        for j in 0..3 {
            assert_eq!(m.predict_conditional(&[0.3, -2.0], j).unwrap(), 0.5);
        }
        m.network.layers.last_mut().unwrap().bias[0] = 10.0;
        let v = m.predict_conditional(&[1.0, 1.0], 1).unwrap();
        assert!((v - 1.0 / (1.0 + (-10.0f64).exp())).abs() < 1e-15);
        assert!((v - 0.99995).abs() < 5e-6);
        assert!(m.predict_conditional(&[1.0, 1.0], 3).is_err());
        assert!(m.predict_conditional(&[1.0], 0).is_err());
    }

    #[test]
    fn marginal_is_product_of_conditionals() {
        let t = table(20, 4, |i, j| if (i + j) % 4 == 0 { 0.3 } else { 0.9 });
        let cfg = MlpConfig {
            hidden_layers: vec![8],
            epochs: 3,
            batch_size: 8,
            ..MlpConfig::default()
        };
        let model = train(&t, &cfg).unwrap();
        let z = [0.4, 2.0];
        let cond: Vec<f64> = (0..4).map(|j| model.predict_conditional(&z, j).unwrap()).collect();
        assert_eq!(model.predict_marginal(&z, 0).unwrap(), cond[0]);
        let mut prev = 1.0;
        for j in 0..4 {
            let m = model.predict_marginal(&z, j).unwrap();
            let direct: f64 = cond[..=j].iter().product();
            assert!((m - direct).abs() < 1e-15);
            assert!(m > 0.0 && m <= prev);
            prev = m;
        }
        let at = model.survival_at(&z, &[0.5, 1.0, 2.5, 9.0]).unwrap();
        let curve = model.marginal_curve(&z).unwrap();
        assert_eq!(at, vec![1.0, curve[0], curve[1], curve[3]]);
    }

    #[test]
    fn marginal_product_arithmetic() {
        let p: f64 = [0.9, 0.8, 0.7].iter().product();
        assert!((p - 0.504).abs() < 1e-12);
    }

    #[test]
    fn save_load_roundtrip() {
        let t = table(15, 2, |i, _| (i % 2) as f64);
        let cfg = MlpConfig {
            hidden_layers: vec![4, 8],
            epochs: 2,
            batch_size: 8,
            ..MlpConfig::default()
        };
        let model = train(&t, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        model.save(&path).unwrap();
        let back = MlpModel::load(&path).unwrap();
        assert_eq!(back, model);
        std::fs::write(&path, "{\"format\":\"other\"}").unwrap();
        assert!(MlpModel::load(&path).is_err());
    }
}
