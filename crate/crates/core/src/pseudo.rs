//! Jackknife pseudo survival probabilities.
//!
//! The marginal value for subject `i` at `t` is `n S(t) - (n-1) S^{-i}(t)`.
//! The conditional value for interval `(t_j, t_{j+1}]` applies the same
//! formula on the risk set `R_j = {i : T_i > t_j}`, with the estimator built
//! from the residual times `T_i - t_j` and read at `t_{j+1} - t_j`. Supplying
//! censoring weights swaps the Kaplan-Meier estimate for `exp(-Lambda_W)`.
//!
//! The leave-one-out estimates are obtained from a single pass over the
//! event table rather than by refitting on every reduced sample.

use std::io::Write;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Result, SurvError};
use crate::estimators::{event_table, WeightFunction};
use crate::fmt::sig6;

/// Interval cutpoints `t_1 < ... < t_J`; the first interval starts at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    cutpoints: Vec<f64>,
}

impl TimeGrid {
    pub fn new(cutpoints: Vec<f64>) -> Result<Self> {
        if cutpoints.is_empty() {
            return Err(SurvError::InvalidGrid("grid needs at least one cutpoint".into()));
        }
        if cutpoints.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(SurvError::InvalidGrid("cutpoints must be positive and finite".into()));
        }
        if cutpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(SurvError::InvalidGrid("cutpoints must be strictly increasing".into()));
        }
        Ok(Self { cutpoints })
    }

    pub fn cutpoints(&self) -> &[f64] {
        &self.cutpoints
    }

    /// Number of intervals `J`.
    pub fn len(&self) -> usize {
        self.cutpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cutpoints.is_empty()
    }

    /// Start of interval `j` (`t_0 = 0`).
    pub fn interval_start(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.cutpoints[j - 1]
        }
    }

    pub fn interval_end(&self, j: usize) -> f64 {
        self.cutpoints[j]
    }

    /// The last cutpoint must sit strictly below the largest follow-up time.
    pub fn check_support(&self, data: &Dataset) -> Result<()> {
        let last = *self.cutpoints.last().expect("nonempty grid");
        let max = data.max_time();
        if last >= max {
            return Err(SurvError::InvalidGrid(format!(
                "last cutpoint {last} is not below the maximum follow-up time {max}"
            )));
        }
        Ok(())
    }
}

/// How to place the cutpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GridSpec {
    /// Empirical quantiles of the observed times (events and censorings pooled).
    Percentiles(Vec<f64>),
    Explicit(Vec<f64>),
}

/// Lower empirical quantile: the smallest observed value whose empirical
/// distribution function reaches `level`.
pub fn empirical_quantile(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    let k = ((level * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

pub fn make_grid(data: &Dataset, spec: &GridSpec) -> Result<TimeGrid> {
    let grid = match spec {
        GridSpec::Explicit(times) => TimeGrid::new(times.clone())?,
        GridSpec::Percentiles(levels) => {
            if levels.is_empty() {
                return Err(SurvError::InvalidGrid("no quantile levels given".into()));
            }
            if levels.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
                return Err(SurvError::InvalidGrid("quantile levels must lie in (0,1)".into()));
            }
            if levels.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(SurvError::InvalidGrid(
                    "quantile levels must be strictly increasing".into(),
                ));
            }
            let mut sorted = data.times();
            sorted.sort_by(f64::total_cmp);
            let mut cuts: Vec<f64> = levels
                .iter()
                .map(|&q| empirical_quantile(&sorted, q))
                .filter(|&t| t > 0.0)
                .collect();
            cuts.dedup();
            if cuts.is_empty() {
                return Err(SurvError::InvalidGrid(
                    "quantile grid is empty after deduplication".into(),
                ));
            }
            TimeGrid::new(cuts)?
        }
    };
    grid.check_support(data)?;
    Ok(grid)
}

/// Full-sample estimate, the leave-one-out estimates and the resulting
/// pseudo values, one entry per input subject in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaveOneOut {
    pub full: f64,
    pub loo: Vec<f64>,
    pub pseudo: Vec<f64>,
}

/// Kaplan-Meier jackknife at `horizon` over the given (time, event) pairs.
pub fn km_leave_one_out(times: &[f64], events: &[bool], horizon: f64) -> LeaveOneOut {
    let m = times.len();
    let table = event_table(times, events);
    let k_end = table.times.partition_point(|&u| u <= horizon);
    let (u, d, r) = (&table.times[..k_end], &table.deaths[..k_end], &table.at_risk[..k_end]);

    // KM over [0, horizon] equals the survivor fraction when no censoring
    // precedes the last event; then the pseudo values are exact integers.
    let last_event = u.last().copied();
    let count_form = match last_event {
        None => true,
        Some(last) => !times.iter().zip(events).any(|(&t, &e)| !e && t < last),
    };

    // prefix[l]: product over l' < l with the subject removed from the risk set
    let mut prefix = Vec::with_capacity(k_end + 1);
    prefix.push(1.0);
    for l in 0..k_end {
        let reduced = r[l] - 1;
        let f = if reduced == 0 {
            1.0
        } else {
            1.0 - d[l] as f64 / reduced as f64
        };
        prefix.push(prefix[l] * f);
    }
    // suffix[l]: unmodified product over l' >= l
    let mut suffix = vec![1.0; k_end + 1];
    for l in (0..k_end).rev() {
        suffix[l] = suffix[l + 1] * (1.0 - d[l] as f64 / r[l] as f64);
    }
    let full = suffix[0];
    let mf = m as f64;

    let mut loo = Vec::with_capacity(m);
    let mut pseudo = Vec::with_capacity(m);
    for i in 0..m {
        let s = times[i];
        let a = u.partition_point(|&x| x < s);
        let est = if a < k_end && u[a] == s {
            let remaining = d[a] - usize::from(events[i]);
            let reduced = r[a] - 1;
            let f = if reduced == 0 {
                1.0
            } else {
                1.0 - remaining as f64 / reduced as f64
            };
            prefix[a] * f * suffix[a + 1]
        } else {
            prefix[a] * suffix[a]
        };
        loo.push(est);
        if count_form {
            let died = events[i] && s <= horizon;
            pseudo.push(if died { 0.0 } else { 1.0 });
        } else {
            pseudo.push(mf * full - (mf - 1.0) * est);
        }
    }
    LeaveOneOut { full, loo, pseudo }
}

/// IPCW Nelson-Aalen jackknife at `horizon`. `times[k]` belongs to subject
/// `ids[k]`; weights are evaluated at `offset + time`.
pub fn ipcw_leave_one_out(
    times: &[f64],
    events: &[bool],
    ids: &[usize],
    offset: f64,
    weights: &WeightFunction,
    horizon: f64,
) -> Result<LeaveOneOut> {
    let m = times.len();
    if let Some(&bad) = ids.iter().find(|&&i| i >= weights.n_subjects()) {
        return Err(SurvError::DimensionMismatch(format!(
            "no weight curve for subject {bad}"
        )));
    }
    let table = event_table(times, events);
    let k_end = table.times.partition_point(|&u| u <= horizon);
    let u = &table.times[..k_end];

    let mut full_terms = Vec::with_capacity(k_end);
    let mut loo_mod = vec![0.0; m];
    let mut w = Vec::with_capacity(m);
    for (l, &ul) in u.iter().enumerate() {
        weights.weights_at(offset + ul, ids, &mut w)?;
        let mut numer = 0.0;
        let mut denom = 0.0;
        for k in 0..m {
            if times[k] >= ul {
                denom += w[k];
                if events[k] && times[k] == ul {
                    numer += w[k];
                }
            }
        }
        full_terms.push(numer / denom);
        let alone = table.at_risk[l] == 1;
        for k in 0..m {
            if times[k] >= ul {
                if alone {
                    continue;
                }
                let own = if events[k] && times[k] == ul { w[k] } else { 0.0 };
                loo_mod[k] += (numer - own) / (denom - w[k]);
            }
        }
    }
    let mut suffix = vec![0.0; k_end + 1];
    for l in (0..k_end).rev() {
        suffix[l] = suffix[l + 1] + full_terms[l];
    }
    let full = (-suffix[0]).exp();
    let mf = m as f64;
    let mut loo = Vec::with_capacity(m);
    let mut pseudo = Vec::with_capacity(m);
    for k in 0..m {
        let after = u.partition_point(|&x| x <= times[k]);
        let est = (-(loo_mod[k] + suffix[after])).exp();
        loo.push(est);
        pseudo.push(mf * full - (mf - 1.0) * est);
    }
    Ok(LeaveOneOut { full, loo, pseudo })
}

/// Marginal pseudo survival probabilities at `t` for every subject.
pub fn pseudo_marginal(data: &Dataset, t: f64) -> Result<Vec<f64>> {
    check_marginal(data, t)?;
    Ok(km_leave_one_out(&data.times(), &data.events(), t).pseudo)
}

/// Marginal pseudo values with `exp(-Lambda_W)` in place of Kaplan-Meier.
pub fn pseudo_marginal_ipcw(data: &Dataset, t: f64, weights: &WeightFunction) -> Result<Vec<f64>> {
    check_marginal(data, t)?;
    let ids: Vec<usize> = (0..data.len()).collect();
    Ok(ipcw_leave_one_out(&data.times(), &data.events(), &ids, 0.0, weights, t)?.pseudo)
}

fn check_marginal(data: &Dataset, t: f64) -> Result<()> {
    if data.len() < 2 {
        return Err(SurvError::InvalidInput(
            "pseudo values need at least two subjects".into(),
        ));
    }
    if !(t > 0.0) {
        return Err(SurvError::InvalidInput(format!(
            "evaluation time must be positive, got {t}"
        )));
    }
    Ok(())
}

/// One training row: a subject at risk at the start of interval `time_index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoRow {
    pub subject_id: usize,
    pub covariates: Vec<f64>,
    pub time_index: usize,
    pub pseudo_value: f64,
}

impl PseudoRow {
    /// One-hot interval indicator of length `n_intervals`.
    pub fn time_indicator(&self, n_intervals: usize) -> Vec<f64> {
        let mut v = vec![0.0; n_intervals];
        v[self.time_index] = 1.0;
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoTable {
    pub rows: Vec<PseudoRow>,
    pub grid: TimeGrid,
    pub p: usize,
    /// Intervals whose risk set saw no event before the interval end.
    pub zero_event_intervals: Vec<usize>,
    /// At-risk count per interval.
    pub risk_set_sizes: Vec<usize>,
}

impl PseudoTable {
    pub fn n_intervals(&self) -> usize {
        self.grid.len()
    }

    /// Distinct subject ids in ascending order.
    pub fn subjects(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.rows.iter().map(|r| r.subject_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Header `id,z_1..z_p,d_0..d_{J-1},pseudo`; ids are 1-based row numbers.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let j = self.n_intervals();
        let mut header = vec!["id".to_string()];
        header.extend((1..=self.p).map(|k| format!("z_{k}")));
        header.extend((0..j).map(|k| format!("d_{k}")));
        header.push("pseudo".into());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![(row.subject_id + 1).to_string()];
            rec.extend(row.covariates.iter().map(|&z| sig6(z)));
            rec.extend((0..j).map(|k| if k == row.time_index { "1" } else { "0" }.to_string()));
            rec.push(sig6(row.pseudo_value));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Discrete-time training table of pseudo conditional survival probabilities.
pub fn pseudo_conditional(data: &Dataset, grid: &TimeGrid, weights: Option<&WeightFunction>) -> Result<PseudoTable> {
    grid.check_support(data)?;
    if let Some(w) = weights {
        if w.n_subjects() != data.len() {
            return Err(SurvError::DimensionMismatch(format!(
                "weight function covers {} subjects, dataset has {}",
                w.n_subjects(),
                data.len()
            )));
        }
    }
    let per_interval: Vec<Result<(Vec<PseudoRow>, bool, usize)>> = (0..grid.len())
        .into_par_iter()
        .map(|j| interval_rows(data, grid, j, weights))
        .collect();

    let mut rows = Vec::new();
    let mut zero_event_intervals = Vec::new();
    let mut risk_set_sizes = Vec::new();
    for (j, res) in per_interval.into_iter().enumerate() {
        let (r, no_events, size) = res?;
        if no_events {
            warn!("interval {j} has no events; its pseudo values carry no information");
            zero_event_intervals.push(j);
        }
        risk_set_sizes.push(size);
        rows.extend(r);
    }
    rows.sort_by_key(|r| (r.subject_id, r.time_index));
    Ok(PseudoTable {
        rows,
        grid: grid.clone(),
        p: data.n_covariates(),
        zero_event_intervals,
        risk_set_sizes,
    })
}

fn interval_rows(
    data: &Dataset,
    grid: &TimeGrid,
    j: usize,
    weights: Option<&WeightFunction>,
) -> Result<(Vec<PseudoRow>, bool, usize)> {
    let start = grid.interval_start(j);
    let horizon = grid.interval_end(j) - start;
    let ids: Vec<usize> = (0..data.len()).filter(|&i| data.record(i).time > start).collect();
    if ids.len() < 2 {
        return Err(SurvError::RiskSetTooSmall {
            interval: j,
            at_risk: ids.len(),
        });
    }
    let residual: Vec<f64> = ids.iter().map(|&i| data.record(i).time - start).collect();
    let events: Vec<bool> = ids.iter().map(|&i| data.record(i).event).collect();
    let no_events = !residual.iter().zip(&events).any(|(&s, &e)| e && s <= horizon);
    let jack = match weights {
        None => km_leave_one_out(&residual, &events, horizon),
        Some(w) => ipcw_leave_one_out(&residual, &events, &ids, start, w, horizon)?,
    };
    let rows = ids
        .iter()
        .zip(jack.pseudo)
        .map(|(&i, pseudo_value)| PseudoRow {
            subject_id: i,
            covariates: data.record(i).covariates.clone(),
            time_index: j,
            pseudo_value,
        })
        .collect();
    Ok((rows, no_events, ids.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SurvivalRecord;
    use crate::estimators::kaplan_meier;

    fn ds(times: &[f64], events: &[bool]) -> Dataset {
        Dataset::from_times(times, events).unwrap()
    }

    fn naive_km_pseudo(times: &[f64], events: &[bool], t: f64) -> Vec<f64> {
        let n = times.len();
        let full = kaplan_meier(&ds(times, events)).unwrap().eval(t).unwrap();
        (0..n)
            .map(|i| {
                let (ti, ei): (Vec<f64>, Vec<bool>) = (0..n).filter(|&k| k != i).map(|k| (times[k], events[k])).unzip();
                let loo = kaplan_meier(&ds(&ti, &ei)).unwrap().eval(t).unwrap();
                n as f64 * full - (n as f64 - 1.0) * loo
            })
            .collect()
    }

    #[test]
    fn uncensored_marginal_is_indicator() {
        let times = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        let d = ds(&times, &[true; 8]);
        for t in [0.5, 1.0, 2.5, 5.0, 8.0] {
            let p = pseudo_marginal(&d, t).unwrap();
            for (pi, &ti) in p.iter().zip(&times) {
                assert_eq!(*pi, if ti > t { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn small_censored_example_matches_refit() {
        let times = [1.0, 2.0, 3.0];
        let events = [true, false, true];
        let fast = pseudo_marginal(&ds(&times, &events), 2.5).unwrap();
        let naive = naive_km_pseudo(&times, &events, 2.5);
        // S(2.5) = 2/3; dropping subject 1 gives 1, dropping 2 or 3 gives 1/2
        let expected = [3.0 * 2.0 / 3.0 - 2.0, 3.0 * 2.0 / 3.0 - 1.0, 3.0 * 2.0 / 3.0 - 1.0];
        for k in 0..3 {
            assert!((fast[k] - naive[k]).abs() < 1e-12);
            assert!((fast[k] - expected[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_match_refit() {
        let times = [1.0, 2.0, 2.0, 2.0, 3.0, 3.0, 4.0, 5.0];
        let events = [false, true, false, true, true, false, true, false];
        for t in [1.5, 2.0, 3.0, 4.5] {
            let fast = pseudo_marginal(&ds(&times, &events), t).unwrap();
            let naive = naive_km_pseudo(&times, &events, t);
            for (a, b) in fast.iter().zip(&naive) {
                assert!((a - b).abs() < 1e-12, "t={t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn marginal_preconditions() {
        assert!(pseudo_marginal(&ds(&[1.0], &[true]), 1.0).is_err());
        assert!(pseudo_marginal(&ds(&[1.0, 2.0], &[true, true]), 0.0).is_err());
    }

    #[test]
    fn grid_from_percentiles() {
        let times: Vec<f64> = (1..=100).map(f64::from).collect();
        let d = ds(&times, &[true; 100]);
        let g = make_grid(&d, &GridSpec::Percentiles(vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6])).unwrap();
        assert_eq!(g.cutpoints(), &[10.0, 20.0, 30.0, 40.0, 50.0, 60.0]);
    }

    #[test]
    fn grid_explicit_and_errors() {
        let times: Vec<f64> = (1..=30).map(f64::from).collect();
        let d = ds(&times, &[true; 30]);
        let g = make_grid(&d, &GridSpec::Explicit(vec![6.0, 12.0, 18.0])).unwrap();
        assert_eq!(g.cutpoints(), &[6.0, 12.0, 18.0]);
        assert!(make_grid(&d, &GridSpec::Explicit(vec![12.0, 6.0])).is_err());
        assert!(make_grid(&d, &GridSpec::Explicit(vec![6.0, 30.0])).is_err());
        assert!(make_grid(&d, &GridSpec::Percentiles(vec![0.5, 0.2])).is_err());
        assert!(make_grid(&d, &GridSpec::Percentiles(vec![0.0, 0.2])).is_err());
        // duplicated quantiles collapse
        let d2 = ds(&[1.0, 1.0, 1.0, 1.0, 5.0], &[true; 5]);
        let g2 = make_grid(&d2, &GridSpec::Percentiles(vec![0.1, 0.2, 0.3])).unwrap();
        assert_eq!(g2.cutpoints(), &[1.0]);
    }

    fn toy_table_data() -> Dataset {
        let records = vec![
            SurvivalRecord::new(15.0, true, vec![3.2]),
            SurvivalRecord::new(22.0, true, vec![5.8]),
            SurvivalRecord::new(30.0, false, vec![1.5]),
        ];
        Dataset::new(records, vec!["z1".into()]).unwrap()
    }

    #[test]
    fn table_rows_only_while_at_risk() {
        let d = toy_table_data();
        let grid = TimeGrid::new(vec![6.0, 12.0, 18.0, 24.0]).unwrap();
        let table = pseudo_conditional(&d, &grid, None).unwrap();
        let per_subject: Vec<Vec<usize>> = (0..3)
            .map(|i| {
                table
                    .rows
                    .iter()
                    .filter(|r| r.subject_id == i)
                    .map(|r| r.time_index)
                    .collect()
            })
            .collect();
        assert_eq!(per_subject[0], vec![0, 1, 2]);
        assert_eq!(per_subject[1], vec![0, 1, 2, 3]);
        assert_eq!(per_subject[2], vec![0, 1, 2, 3]);
        // subject 0 dies in (12,18]; everyone survives the first two intervals
        let p0: Vec<f64> = table
            .rows
            .iter()
            .filter(|r| r.subject_id == 0)
            .map(|r| r.pseudo_value)
            .collect();
        assert_eq!(p0, vec![1.0, 1.0, 0.0]);
        assert_eq!(table.zero_event_intervals, vec![0, 1]);
        assert_eq!(table.risk_set_sizes, vec![3, 3, 3, 2]);

        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "id,z_1,d_0,d_1,d_2,d_3,pseudo");
        assert_eq!(lines.next().unwrap(), "1,3.2,1,0,0,0,1");
        assert_eq!(text.lines().count(), 1 + 11);
    }

    #[test]
    fn risk_set_too_small() {
        let d = toy_table_data();
        let grid = TimeGrid::new(vec![12.0, 24.0, 28.0]).unwrap();
        assert!(matches!(
            pseudo_conditional(&d, &grid, None),
            Err(SurvError::RiskSetTooSmall {
                interval: 2,
                at_risk: 1
            })
        ));
    }

    #[test]
    fn mean_identity_holds() {
        let times = [0.5, 1.2, 1.9, 2.2, 2.8, 3.1, 3.3, 4.0, 4.4, 5.0];
        let events = [true, false, true, true, false, true, false, true, true, false];
        let jack = km_leave_one_out(&times, &events, 3.5);
        let r = times.len() as f64;
        let mean_pseudo = jack.pseudo.iter().sum::<f64>() / r;
        let mean_loo = jack.loo.iter().sum::<f64>() / r;
        assert!((mean_pseudo - (r * jack.full - (r - 1.0) * mean_loo)).abs() < 1e-12);
    }
}
