//! Brute-force references shared by the integration and acceptance tests.
#![allow(dead_code)]

use pseudosurv::estimators::WeightFunction;
use pseudosurv::pseudo::{PseudoTable, TimeGrid};
use pseudosurv::{Dataset, SurvivalRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Product-limit estimate at `h`, straight from the definition.
pub fn naive_km(times: &[f64], events: &[bool], h: f64) -> f64 {
    let mut death_times: Vec<f64> = times
        .iter()
        .zip(events)
        .filter(|(t, e)| **e && **t <= h)
        .map(|(t, _)| *t)
        .collect();
    death_times.sort_by(f64::total_cmp);
    death_times.dedup();
    let mut s = 1.0;
    for u in death_times {
        let at_risk = times.iter().filter(|&&t| t >= u).count() as f64;
        let deaths = times.iter().zip(events).filter(|(t, e)| **e && **t == u).count() as f64;
        s *= 1.0 - deaths / at_risk;
    }
    s
}

/// `exp(-Lambda_W(h))` with weights `w(k, u)` for the k-th entry at time `u`.
pub fn naive_ipcw(times: &[f64], events: &[bool], w: &dyn Fn(usize, f64) -> f64, h: f64) -> f64 {
    let mut death_times: Vec<f64> = times
        .iter()
        .zip(events)
        .filter(|(t, e)| **e && **t <= h)
        .map(|(t, _)| *t)
        .collect();
    death_times.sort_by(f64::total_cmp);
    death_times.dedup();
    let mut cumhaz = 0.0;
    for u in death_times {
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..times.len() {
            if times[k] >= u {
                den += w(k, u);
                if events[k] && times[k] == u {
                    num += w(k, u);
                }
            }
        }
        cumhaz += num / den;
    }
    (-cumhaz).exp()
}

fn without<T: Copy>(v: &[T], i: usize) -> Vec<T> {
    v.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, x)| *x).collect()
}

/// `(subject, interval, pseudo value)` by refitting on each leave-one-out
/// risk set, in the same row order as `pseudo_conditional`.
pub fn naive_conditional(
    data: &Dataset,
    grid: &TimeGrid,
    weights: Option<&WeightFunction>,
) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for j in 0..grid.len() {
        let start = grid.interval_start(j);
        let h = grid.interval_end(j) - start;
        let members: Vec<usize> = (0..data.len()).filter(|&i| data.record(i).time > start).collect();
        let s: Vec<f64> = members.iter().map(|&i| data.record(i).time - start).collect();
        let e: Vec<bool> = members.iter().map(|&i| data.record(i).event).collect();
        let n = members.len() as f64;
        let fit = |s: &[f64], e: &[bool], ids: &[usize]| match weights {
            None => naive_km(s, e, h),
            Some(w) => naive_ipcw(s, e, &|k, u| w.weight(ids[k], start + u).unwrap(), h),
        };
        let full = fit(&s, &e, &members);
        for (pos, &i) in members.iter().enumerate() {
            let loo = fit(&without(&s, pos), &without(&e, pos), &without(&members, pos));
            out.push((i, j, n * full - (n - 1.0) * loo));
        }
    }
    out.sort_by_key(|&(i, j, _)| (i, j));
    out
}

pub fn max_abs_diff(table: &PseudoTable, oracle: &[(usize, usize, f64)]) -> f64 {
    assert_eq!(table.rows.len(), oracle.len(), "row counts differ");
    table
        .rows
        .iter()
        .zip(oracle)
        .map(|(r, &(i, j, v))| {
            assert_eq!((r.subject_id, r.time_index), (i, j));
            (r.pseudo_value - v).abs()
        })
        .fold(0.0, f64::max)
}

/// Random censored data with one covariate; `tied` rounds times to a coarse
/// lattice so that events and censorings share times.
pub fn random_censored(rng: &mut ChaCha8Rng, n: usize, tied: bool) -> Dataset {
    let records = (0..n)
        .map(|_| {
            let z: f64 = rng.random_range(-1.0..1.0);
            let x = -rng.random::<f64>().ln() / (0.1 * (0.7 * z).exp());
            let c = -rng.random::<f64>().ln() / 0.07;
            let (mut t, event) = if x <= c { (x, true) } else { (c, false) };
            if tied {
                t = t.ceil();
            }
            SurvivalRecord::new(t.max(1e-3), event, vec![z])
        })
        .collect();
    Dataset::new(records, vec!["z".into()]).unwrap()
}

pub fn random_uncensored(rng: &mut ChaCha8Rng, n: usize, tied: bool) -> Dataset {
    let records = (0..n)
        .map(|_| {
            let mut t = -rng.random::<f64>().ln() * 10.0;
            if tied {
                t = t.ceil();
            }
            SurvivalRecord::new(t.max(1e-3), true, vec![rng.random_range(0.0..1.0)])
        })
        .collect();
    Dataset::new(records, vec!["z".into()]).unwrap()
}

/// Up to `k` random cutpoints keeping at least two subjects at risk at each
/// interval start and the last cutpoint below the largest time.
pub fn random_grid(rng: &mut ChaCha8Rng, data: &Dataset, k: usize) -> TimeGrid {
    let mut times = data.times();
    times.sort_by(f64::total_cmp);
    let n = times.len();
    // the third largest time bounds every cutpoint so R_j keeps >= 2 subjects
    let upper = times[n - 3];
    let mut cuts: Vec<f64> = (0..k)
        .map(|_| rng.random_range(0.0..1.0) * upper)
        .filter(|&c| c > 0.0)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    if cuts.is_empty() {
        cuts.push(upper / 2.0);
    }
    TimeGrid::new(cuts).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
