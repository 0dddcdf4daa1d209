use std::collections::BTreeSet;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    train, Activation, MlpConfig, MlpModel, Optimizer, Regularization, ALLOWED_DROPOUT, ALLOWED_LEARNING_RATES,
    ALLOWED_RIDGE, ALLOWED_WIDTHS,
};
use crate::data::Dataset;
use crate::error::{Result, SurvError};
use crate::metrics::c_index;
use crate::pseudo::{PseudoTable, TimeGrid};

pub const DEFAULT_BUDGET: usize = 20;
const FOLD_STREAM: u64 = 0x6a09_e667_f3bc_c909;
const SAMPLE_STREAM: u64 = 0xbb67_ae85_84ca_a73b;

/// SplitMix64 finalizer over the combined inputs.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Every combination of depth, widths, activation, regularization, learning
/// rate and optimizer; 720 configurations.
pub fn default_grid(epochs: usize, batch_size: usize, seed: u64) -> Vec<MlpConfig> {
    // both hidden layers share the node count
    let layouts: Vec<Vec<usize>> = (1..=2)
        .flat_map(|depth| ALLOWED_WIDTHS.iter().map(move |&w| vec![w; depth]))
        .collect();
    let regs: Vec<Regularization> = ALLOWED_DROPOUT
        .iter()
        .map(|&r| Regularization::Dropout(r))
        .chain(ALLOWED_RIDGE.iter().map(|&l| Regularization::Ridge(l)))
        .collect();
    let mut out = Vec::new();
    for layers in &layouts {
        for activation in [Activation::ReLU, Activation::Tanh] {
            for &regularization in &regs {
                for &learning_rate in &ALLOWED_LEARNING_RATES {
                    for optimizer in [Optimizer::SGDMomentum, Optimizer::AdaptiveMoments] {
                        out.push(MlpConfig {
                            hidden_layers: layers.clone(),
                            activation,
                            regularization,
                            learning_rate,
                            optimizer,
                            epochs,
                            batch_size,
                            seed,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Sorted validation subject sets, one per fold.
pub fn cv_folds(subjects: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(SurvError::InvalidInput(format!("need at least 2 folds, got {k}")));
    }
    if k > subjects.len() {
        return Err(SurvError::InvalidInput(format!(
            "{k} folds exceed {} subjects",
            subjects.len()
        )));
    }
    let mut shuffled = subjects.to_vec();
    shuffled.sort_unstable();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, FOLD_STREAM, 0)));
    let mut folds = vec![Vec::new(); k];
    for (pos, s) in shuffled.into_iter().enumerate() {
        folds[pos % k].push(s);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best_index: usize,
    pub best_config: MlpConfig,
    pub model: MlpModel,
    /// `(grid index, mean fold c-index)` for every sampled config, by grid index
    pub scores: Vec<(usize, f64)>,
    /// mean held-out pseudo-value MSE, aligned with `scores`
    pub losses: Vec<f64>,
}

fn nan_mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = xs
        .filter(|v| !v.is_nan())
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if c == 0 {
        f64::NAN
    } else {
        s / c as f64
    }
}

fn with_seed(config: &MlpConfig, seed: u64) -> MlpConfig {
    MlpConfig { seed, ..config.clone() }
}

fn split_rows(table: &PseudoTable, held: &BTreeSet<usize>, keep_held: bool) -> PseudoTable {
    PseudoTable {
        rows: table
            .rows
            .iter()
            .filter(|r| held.contains(&r.subject_id) == keep_held)
            .cloned()
            .collect(),
        grid: table.grid.clone(),
        p: table.p,
        zero_event_intervals: table.zero_event_intervals.clone(),
        risk_set_sizes: table.risk_set_sizes.clone(),
    }
}

/// Position of the highest c-index; exact ties go to the lower loss, then to
/// the earlier position. NaN scores lose to any number.
fn pick_best(c_index: &[f64], loss: &[f64]) -> usize {
    let better = |a: usize, b: usize| match (c_index[a].is_nan(), c_index[b].is_nan()) {
        (false, true) => true,
        (true, _) => false,
        (false, false) => c_index[a] > c_index[b] || (c_index[a] == c_index[b] && loss[a] < loss[b]),
    };
    (1..c_index.len()).fold(0, |best, s| if better(s, best) { s } else { best })
}

/// Held-out c-index and held-out pseudo-value MSE of one fold.
fn fold_score(
    table: &PseudoTable,
    data: &Dataset,
    config: &MlpConfig,
    held_out: &[usize],
    eval_times: &[f64],
) -> Result<(f64, f64)> {
    let held: BTreeSet<usize> = held_out.iter().copied().collect();
    let model = train(&split_rows(table, &held, false), config)?;
    let validation = data.subset(held_out)?;
    let predicted = validation
        .records()
        .iter()
        .map(|r| model.survival_at(&r.covariates, eval_times))
        .collect::<Result<Vec<_>>>()?;
    let (c, _) = c_index(&validation, &predicted, eval_times)?;
    let mse = model.table_mse(&split_rows(table, &held, true))?;
    Ok((nan_mean(c.into_iter()), mse))
}

/// Random search over `grid` scored by k-fold cross-validated c-index, then a
/// refit of the winner on the whole table. Exact c-index ties, common when
/// every monotone model ranks subjects alike, go to the lower held-out
/// pseudo-value MSE and then to the lower grid index. Subject ids in `table` index
/// `data`. Each (config, fold) unit seeds its training from the search seed,
/// the config's own seed and the fold number, so identical configs score
/// identically and results do not depend on thread count.
pub fn grid_search(
    table: &PseudoTable,
    data: &Dataset,
    grid: &[MlpConfig],
    k: usize,
    eval_times: &TimeGrid,
    budget: usize,
    seed: u64,
) -> Result<SearchOutcome> {
    if budget == 0 || budget > grid.len() {
        return Err(SurvError::InvalidInput(format!(
            "budget {budget} must be in 1..={}",
            grid.len()
        )));
    }
    for c in grid {
        c.validate()?;
    }
    let subjects = table.subjects();
    if let Some(&s) = subjects.iter().find(|&&s| s >= data.len()) {
        return Err(SurvError::DimensionMismatch(format!(
            "subject {s} not present in a dataset of {} records",
            data.len()
        )));
    }
    let folds = cv_folds(&subjects, k, seed)?;
    let mut sampled = index::sample(
        &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, SAMPLE_STREAM, 0)),
        grid.len(),
        budget,
    )
    .into_vec();
    sampled.sort_unstable();

    let times = eval_times.cutpoints();
    let units: Vec<(usize, usize)> = sampled.iter().flat_map(|&g| (0..k).map(move |f| (g, f))).collect();
    let fold_scores = units
        .par_iter()
        .map(|&(g, f)| {
            let cfg = with_seed(&grid[g], derive_seed(seed, grid[g].seed, f as u64));
            fold_score(table, data, &cfg, &folds[f], times)
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;

    let mean_of = |s: usize, part: fn(&(f64, f64)) -> f64| nan_mean(fold_scores[s * k..(s + 1) * k].iter().map(part));
    let scores: Vec<(usize, f64)> = sampled
        .iter()
        .enumerate()
        .map(|(s, &g)| (g, mean_of(s, |u| u.0)))
        .collect();
    let losses: Vec<f64> = (0..sampled.len()).map(|s| mean_of(s, |u| u.1)).collect();
    let c: Vec<f64> = scores.iter().map(|s| s.1).collect();
    let best_pos = pick_best(&c, &losses);
    let best = scores[best_pos];
    log::info!(
        "grid search: best config {} with mean c-index {:.4}, held-out mse {:.5}",
        best.0,
        best.1,
        losses[best_pos]
    );

    let refit = with_seed(&grid[best.0], derive_seed(seed, grid[best.0].seed, k as u64));
    let model = train(table, &refit)?;
    Ok(SearchOutcome {
        best_index: best.0,
        best_config: grid[best.0].clone(),
        model,
        scores,
        losses,
    })
}
