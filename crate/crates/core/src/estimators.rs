//! Kaplan-Meier, weighted Nelson-Aalen and the IPCW survival estimate.
//!
//! Risk sets are closed on the left: a subject with `time >= u` is at risk at
//! `u`. At a tied time the deaths are counted against a risk set that still
//! contains the subjects censored at that time.

use serde::{Deserialize, Serialize};

use crate::curve::StepCurve;
use crate::data::Dataset;
use crate::error::{Result, SurvError};

/// Default upper bound on an inverse-probability-of-censoring weight.
pub const DEFAULT_WEIGHT_CAP: f64 = 20.0;

/// Distinct event times with their death and at-risk counts.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct EventTable {
    pub times: Vec<f64>,
    pub deaths: Vec<usize>,
    pub at_risk: Vec<usize>,
}

pub(crate) fn event_table(times: &[f64], events: &[bool]) -> EventTable {
    let mut sorted: Vec<f64> = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut event_times: Vec<f64> = times.iter().zip(events).filter(|(_, &e)| e).map(|(&t, _)| t).collect();
    event_times.sort_by(f64::total_cmp);

    let n = sorted.len();
    let mut table = EventTable {
        times: Vec::new(),
        deaths: Vec::new(),
        at_risk: Vec::new(),
    };
    let mut k = 0;
    while k < event_times.len() {
        let u = event_times[k];
        let mut d = 0;
        while k < event_times.len() && event_times[k] == u {
            d += 1;
            k += 1;
        }
        table.times.push(u);
        table.deaths.push(d);
        table.at_risk.push(n - sorted.partition_point(|&t| t < u));
    }
    table
}

/// Product-limit survival estimate.
pub fn kaplan_meier(data: &Dataset) -> Result<StepCurve> {
    if data.is_empty() {
        return Err(SurvError::EmptyDataset);
    }
    kaplan_meier_raw(&data.times(), &data.events())
}

pub(crate) fn kaplan_meier_raw(times: &[f64], events: &[bool]) -> Result<StepCurve> {
    if times.is_empty() {
        return Err(SurvError::EmptyDataset);
    }
    let table = event_table(times, events);
    let mut s = 1.0;
    let values = table
        .deaths
        .iter()
        .zip(&table.at_risk)
        .map(|(&d, &r)| {
            s *= 1.0 - d as f64 / r as f64;
            s
        })
        .collect();
    StepCurve::new(table.times, values, 1.0)
}

/// Conditional censoring survival `G(t | Z_i)` for every subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CensorSurvival {
    /// One explicit curve per subject.
    PerSubject(Vec<StepCurve>),
    /// `G(t | Z_i) = exp(-baseline(t) * relative_risk[i])`, the form produced
    /// by a proportional-hazards censoring model.
    Proportional {
        baseline_cumhaz: StepCurve,
        relative_risk: Vec<f64>,
    },
}

/// Per-subject inverse-probability-of-censoring weights
/// `W_i(u) = min(1 / G(u- | Z_i), cap)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightFunction {
    censor: CensorSurvival,
    cap: f64,
}

impl WeightFunction {
    pub fn from_curves(curves: Vec<StepCurve>, cap: f64) -> Result<Self> {
        Self::new(CensorSurvival::PerSubject(curves), cap)
    }

    pub fn proportional(baseline_cumhaz: StepCurve, relative_risk: Vec<f64>, cap: f64) -> Result<Self> {
        Self::new(
            CensorSurvival::Proportional {
                baseline_cumhaz,
                relative_risk,
            },
            cap,
        )
    }

    /// Weight function whose censoring survival is the constant `1/weight`
    /// for each subject (uncapped unless `weight` exceeds `cap`).
    pub fn constant(weights: &[f64], cap: f64) -> Result<Self> {
        let curves = weights.iter().map(|&w| StepCurve::constant(1.0 / w)).collect();
        Self::from_curves(curves, cap)
    }

    fn new(censor: CensorSurvival, cap: f64) -> Result<Self> {
        if !(cap > 0.0) {
            return Err(SurvError::InvalidInput(format!(
                "weight cap must be positive, got {cap}"
            )));
        }
        Ok(Self { censor, cap })
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn censor(&self) -> &CensorSurvival {
        &self.censor
    }

    pub fn n_subjects(&self) -> usize {
        match &self.censor {
            CensorSurvival::PerSubject(c) => c.len(),
            CensorSurvival::Proportional { relative_risk, .. } => relative_risk.len(),
        }
    }

    /// `G(t | Z_i)`.
    pub fn censor_survival(&self, subject: usize, t: f64) -> f64 {
        match &self.censor {
            CensorSurvival::PerSubject(c) => c[subject].at(t),
            CensorSurvival::Proportional {
                baseline_cumhaz,
                relative_risk,
            } => (-baseline_cumhaz.at(t) * relative_risk[subject]).exp(),
        }
    }

    /// `G(t- | Z_i)`.
    pub fn censor_survival_left(&self, subject: usize, t: f64) -> f64 {
        match &self.censor {
            CensorSurvival::PerSubject(c) => c[subject].left(t),
            CensorSurvival::Proportional {
                baseline_cumhaz,
                relative_risk,
            } => (-baseline_cumhaz.left(t) * relative_risk[subject]).exp(),
        }
    }

    /// The censoring survival curve of one subject as an explicit step curve.
    pub fn subject_curve(&self, subject: usize) -> StepCurve {
        match &self.censor {
            CensorSurvival::PerSubject(c) => c[subject].clone(),
            CensorSurvival::Proportional {
                baseline_cumhaz,
                relative_risk,
            } => {
                let r = relative_risk[subject];
                baseline_cumhaz.map(|h| (-h * r).exp())
            }
        }
    }

    pub fn weight(&self, subject: usize, u: f64) -> Result<f64> {
        check_weight(subject, u, self.censor_survival_left(subject, u), self.cap)
    }

    /// Weights of `subjects` at time `u`, written into `out`.
    pub(crate) fn weights_at(&self, u: f64, subjects: &[usize], out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        match &self.censor {
            CensorSurvival::PerSubject(c) => {
                for &i in subjects {
                    out.push(check_weight(i, u, c[i].left(u), self.cap)?);
                }
            }
            CensorSurvival::Proportional {
                baseline_cumhaz,
                relative_risk,
            } => {
                let h = baseline_cumhaz.left(u);
                for &i in subjects {
                    out.push(check_weight(i, u, (-h * relative_risk[i]).exp(), self.cap)?);
                }
            }
        }
        Ok(())
    }
}

fn check_weight(subject: usize, time: f64, g: f64, cap: f64) -> Result<f64> {
    let w = (1.0 / g).min(cap);
    if w.is_nan() || w <= 0.0 {
        return Err(SurvError::InvalidWeight {
            subject,
            time,
            value: w,
        });
    }
    Ok(w)
}

/// Per-event-time numerator and denominator of the weighted Nelson-Aalen sum.
#[derive(Debug, Clone)]
pub(crate) struct WeightedIncrements {
    pub times: Vec<f64>,
    pub numer: Vec<f64>,
    pub denom: Vec<f64>,
}

/// `times[k]` is the (possibly shifted) time of subject `ids[k]`; weights are
/// looked up at `offset + time`.
pub(crate) fn weighted_increments(
    times: &[f64],
    events: &[bool],
    ids: &[usize],
    offset: f64,
    weights: &WeightFunction,
) -> Result<WeightedIncrements> {
    if let Some(&bad) = ids.iter().find(|&&i| i >= weights.n_subjects()) {
        return Err(SurvError::DimensionMismatch(format!(
            "no weight curve for subject {bad}"
        )));
    }
    let table = event_table(times, events);
    let mut inc = WeightedIncrements {
        times: table.times.clone(),
        numer: Vec::with_capacity(table.times.len()),
        denom: Vec::with_capacity(table.times.len()),
    };
    let mut w = Vec::with_capacity(ids.len());
    for &u in &table.times {
        weights.weights_at(offset + u, ids, &mut w)?;
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, &wk) in w.iter().enumerate() {
            if times[k] >= u {
                den += wk;
                if times[k] == u && events[k] {
                    num += wk;
                }
            }
        }
        inc.numer.push(num);
        inc.denom.push(den);
    }
    Ok(inc)
}

/// IPCW Nelson-Aalen cumulative hazard
/// `sum_i int dN_i(u) W_i(u) / sum_j Y_j(u) W_j(u)`.
pub fn nelson_aalen_weighted(data: &Dataset, weights: &WeightFunction) -> Result<StepCurve> {
    if data.is_empty() {
        return Err(SurvError::EmptyDataset);
    }
    let ids: Vec<usize> = (0..data.len()).collect();
    let inc = weighted_increments(&data.times(), &data.events(), &ids, 0.0, weights)?;
    let mut h = 0.0;
    let values = inc
        .numer
        .iter()
        .zip(&inc.denom)
        .map(|(n, d)| {
            h += n / d;
            h
        })
        .collect();
    StepCurve::new(inc.times, values, 0.0)
}

/// `exp(-Lambda_W(t))`.
pub fn ipcw_survival(data: &Dataset, weights: &WeightFunction) -> Result<StepCurve> {
    Ok(nelson_aalen_weighted(data, weights)?.map(|h| (-h).exp()))
}

/// Unweighted Nelson-Aalen cumulative hazard.
pub fn nelson_aalen(data: &Dataset) -> Result<StepCurve> {
    if data.is_empty() {
        return Err(SurvError::EmptyDataset);
    }
    let table = event_table(&data.times(), &data.events());
    let mut h = 0.0;
    let values = table
        .deaths
        .iter()
        .zip(&table.at_risk)
        .map(|(&d, &r)| {
            h += d as f64 / r as f64;
            h
        })
        .collect();
    StepCurve::new(table.times, values, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ds(times: &[f64], events: &[bool]) -> Dataset {
        Dataset::from_times(times, events).unwrap()
    }

    fn unit_weights(n: usize) -> WeightFunction {
        WeightFunction::constant(&vec![1.0; n], DEFAULT_WEIGHT_CAP).unwrap()
    }

    #[test]
    fn km_uncensored_is_empirical() {
        let km = kaplan_meier(&ds(&[1.0, 2.0, 3.0, 4.0], &[true; 4])).unwrap();
        assert_abs_diff_eq!(km.eval(2.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(km.eval(4.0).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn km_all_censored_is_flat() {
        let km = kaplan_meier(&ds(&[1.0, 2.0, 3.0, 4.0], &[false; 4])).unwrap();
        for t in [0.0, 1.0, 2.5, 4.0, 100.0] {
            assert_eq!(km.eval(t).unwrap(), 1.0);
        }
    }

    #[test]
    fn km_with_censoring_hand_product() {
        let km = kaplan_meier(&ds(&[1.0, 2.0, 3.0, 4.0], &[true, false, true, true])).unwrap();
        assert_abs_diff_eq!(km.eval(3.0).unwrap(), 0.75 * 0.5, epsilon = 1e-15);
    }

    #[test]
    fn km_tie_keeps_censored_in_risk_set() {
        // death and censoring both at 2: risk set at 2 has 3 subjects
        let km = kaplan_meier(&ds(&[1.0, 2.0, 2.0, 3.0], &[true, true, false, true])).unwrap();
        assert_abs_diff_eq!(km.eval(2.0).unwrap(), 0.75 * (2.0 / 3.0), epsilon = 1e-15);
    }

    #[test]
    fn km_empty_errors() {
        assert!(matches!(kaplan_meier_raw(&[], &[]), Err(SurvError::EmptyDataset)));
    }

    #[test]
    fn weighted_na_unit_weights() {
        let d = ds(&[1.0, 2.0, 3.0], &[true; 3]);
        let h = nelson_aalen_weighted(&d, &unit_weights(3)).unwrap();
        assert_abs_diff_eq!(h.eval(3.0).unwrap(), 1.0 / 3.0 + 0.5 + 1.0, epsilon = 1e-15);
    }

    #[test]
    fn weighted_na_two_subjects() {
        let d = ds(&[1.0, 2.0], &[true, true]);
        let w = WeightFunction::constant(&[2.0, 1.0], DEFAULT_WEIGHT_CAP).unwrap();
        let h = nelson_aalen_weighted(&d, &w).unwrap();
        assert_abs_diff_eq!(h.eval(1.0).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h.eval(2.0).unwrap(), 2.0 / 3.0 + 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ipcw_single_subject() {
        let d = ds(&[1.0], &[true]);
        let s = ipcw_survival(&d, &unit_weights(1)).unwrap();
        assert_abs_diff_eq!(s.eval(1.0).unwrap(), (-1.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn ipcw_no_events_is_one() {
        let d = ds(&[1.0, 2.0], &[false, false]);
        let s = ipcw_survival(&d, &unit_weights(2)).unwrap();
        assert_eq!(s.eval(5.0).unwrap(), 1.0);
    }

    #[test]
    fn ipcw_hand_nelson_aalen() {
        let d = ds(&[1.0, 2.0, 3.0, 4.0], &[true, false, true, true]);
        let s = ipcw_survival(&d, &unit_weights(4)).unwrap();
        assert_abs_diff_eq!(s.eval(3.0).unwrap(), (-(0.25 + 0.5f64)).exp(), epsilon = 1e-15);
        assert!((s.eval(3.0).unwrap() - 0.472).abs() < 1e-3);
    }

    #[test]
    fn nonpositive_weight_rejected() {
        let d = ds(&[1.0, 2.0], &[true, true]);
        let curves = vec![StepCurve::constant(-0.5), StepCurve::constant(1.0)];
        let w = WeightFunction::from_curves(curves, 20.0).unwrap();
        assert!(matches!(
            nelson_aalen_weighted(&d, &w),
            Err(SurvError::InvalidWeight { subject: 0, .. })
        ));
    }

    #[test]
    fn weight_is_capped() {
        let w = WeightFunction::from_curves(vec![StepCurve::constant(0.04)], 20.0).unwrap();
        assert_eq!(w.weight(0, 3.0).unwrap(), 20.0);
    }

    #[test]
    fn weight_uses_left_limit() {
        let g = StepCurve::new(vec![2.0], vec![0.5], 1.0).unwrap();
        let w = WeightFunction::from_curves(vec![g], 20.0).unwrap();
        assert_eq!(w.weight(0, 2.0).unwrap(), 1.0);
        assert_eq!(w.weight(0, 2.5).unwrap(), 2.0);
    }

    fn censored_sample() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(1u32..30, n).prop_map(|v| v.into_iter().map(f64::from).collect()),
                prop::collection::vec(any::<bool>(), n),
            )
        })
    }

    proptest! {
        #[test]
        fn km_permutation_invariant((times, events) in censored_sample(), rot in 0usize..40) {
            let n = times.len();
            let k = rot % n;
            let mut t2 = times.clone();
            let mut e2 = events.clone();
            t2.rotate_left(k);
            e2.rotate_left(k);
            let a = kaplan_meier(&ds(&times, &events)).unwrap();
            let b = kaplan_meier(&ds(&t2, &e2)).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn survival_curves_monotone((times, events) in censored_sample()) {
            let d = ds(&times, &events);
            for curve in [kaplan_meier(&d).unwrap(), ipcw_survival(&d, &unit_weights(d.len())).unwrap()] {
                prop_assert_eq!(curve.initial_value(), 1.0);
                let mut prev = 1.0;
                for &v in curve.values() {
                    prop_assert!(v <= prev && (0.0..=1.0).contains(&v));
                    prev = v;
                }
            }
        }

        #[test]
        fn constant_weights_cancel((times, events) in censored_sample(), c in 0.1f64..15.0) {
            let d = ds(&times, &events);
            let n = d.len();
            let a = ipcw_survival(&d, &WeightFunction::constant(&vec![c; n], 20.0).unwrap()).unwrap();
            let plain = nelson_aalen(&d).unwrap().map(|h| (-h).exp());
            prop_assert_eq!(a.times(), plain.times());
            for (x, y) in a.values().iter().zip(plain.values()) {
                prop_assert!((x - y).abs() <= 1e-14);
            }
        }
    }
}
