mod common;

use common::*;
use proptest::prelude::*;
use pseudosurv::cox::{censoring_weights, fit_cox, CoxTarget};
use pseudosurv::curve::StepCurve;
use pseudosurv::estimators::WeightFunction;
use pseudosurv::pseudo::{pseudo_conditional, pseudo_marginal, TimeGrid};
use rand::Rng;

#[test]
fn km_conditional_matches_refit() {
    for seed in 0..30u64 {
        let mut r = rng(seed);
        let n = [10, 25, 60][seed as usize % 3];
        let data = random_censored(&mut r, n, seed % 2 == 0);
        let grid = random_grid(&mut r, &data, 4);
        let table = pseudo_conditional(&data, &grid, None).unwrap();
        let oracle = naive_conditional(&data, &grid, None);
        let err = max_abs_diff(&table, &oracle);
        assert!(err <= 1e-10, "seed {seed}: {err}");
    }
}

#[test]
fn ipcw_conditional_matches_refit_with_cox_weights() {
    for seed in 0..20u64 {
        let mut r = rng(100 + seed);
        let data = random_censored(&mut r, [12, 40][seed as usize % 2], seed % 3 == 0);
        let grid = random_grid(&mut r, &data, 3);
        let censor = fit_cox(&data, CoxTarget::Censoring).unwrap();
        let w = censoring_weights(&data, &censor, 20.0).unwrap();
        let table = pseudo_conditional(&data, &grid, Some(&w)).unwrap();
        let err = max_abs_diff(&table, &naive_conditional(&data, &grid, Some(&w)));
        assert!(err <= 1e-10, "seed {seed}: {err}");
    }
}

#[test]
fn ipcw_conditional_matches_refit_with_explicit_curves() {
    let mut r = rng(7);
    let data = random_censored(&mut r, 30, true);
    let curves = (0..data.len())
        .map(|_| {
            let knots: Vec<f64> = (1..6).map(|k| k as f64 * 4.0 + r.random_range(0.0..2.0)).collect();
            let mut g = 1.0;
            let values = knots
                .iter()
                .map(|_| {
                    g *= r.random_range(0.6..0.95);
                    g
                })
                .collect();
            StepCurve::new(knots, values, 1.0).unwrap()
        })
        .collect();
    let w = WeightFunction::from_curves(curves, 20.0).unwrap();
    let grid = random_grid(&mut r, &data, 4);
    let table = pseudo_conditional(&data, &grid, Some(&w)).unwrap();
    assert!(max_abs_diff(&table, &naive_conditional(&data, &grid, Some(&w))) <= 1e-10);
}

#[test]
fn marginal_matches_refit() {
    let mut r = rng(3);
    let data = random_censored(&mut r, 80, true);
    let times = data.times();
    let events = data.events();
    let n = data.len() as f64;
    for t in [3.0, 8.0, 15.0] {
        let fast = pseudo_marginal(&data, t).unwrap();
        let full = naive_km(&times, &events, t);
        for (i, &f) in fast.iter().enumerate() {
            let t_i: Vec<f64> = times
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != i)
                .map(|(_, v)| *v)
                .collect();
            let e_i: Vec<bool> = events
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != i)
                .map(|(_, v)| *v)
                .collect();
            let naive = n * full - (n - 1.0) * naive_km(&t_i, &e_i, t);
            assert!((f - naive).abs() <= 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn uncensored_values_are_exact_indicators(seed in any::<u64>(), n in 5usize..120, tied in any::<bool>(), k in 1usize..6) {
        let mut r = rng(seed);
        let data = random_uncensored(&mut r, n, tied);
        let grid = random_grid(&mut r, &data, k);
        let table = pseudo_conditional(&data, &grid, None).unwrap();
        for row in &table.rows {
            let expected = if data.record(row.subject_id).time > grid.interval_end(row.time_index) { 1.0 } else { 0.0 };
            prop_assert_eq!(row.pseudo_value, expected);
        }
    }

    #[test]
    fn rows_cover_exactly_the_risk_sets(seed in any::<u64>(), n in 6usize..60) {
        let mut r = rng(seed);
        let data = random_censored(&mut r, n, true);
        let grid = random_grid(&mut r, &data, 3);
        let table = pseudo_conditional(&data, &grid, None).unwrap();
        for j in 0..grid.len() {
            let expected = (0..n).filter(|&i| data.record(i).time > grid.interval_start(j)).count();
            prop_assert_eq!(table.rows.iter().filter(|row| row.time_index == j).count(), expected);
            prop_assert_eq!(table.risk_set_sizes[j], expected);
        }
    }
}

#[test]
fn grid_past_last_time_is_rejected() {
    let mut r = rng(1);
    let data = random_censored(&mut r, 20, false);
    let bad = TimeGrid::new(vec![data.max_time() + 1.0]).unwrap();
    assert!(pseudo_conditional(&data, &bad, None).is_err());
}

#[test]
fn unit_weights_stay_close_to_product_limit() {
    use pseudosurv::SurvivalRecord;
    let mut r = rng(44);
    // exponential event and censoring hazards tuned to about 40% censoring
    let records = (0..500)
        .map(|_| {
            let x = -r.random::<f64>().ln() / 0.1;
            let c = -r.random::<f64>().ln() / 0.0667;
            SurvivalRecord::new(x.min(c), x <= c, vec![0.0])
        })
        .collect();
    let data = pseudosurv::Dataset::new(records, vec!["z".into()]).unwrap();
    let frac = data.censoring_fraction();
    assert!((0.35..=0.45).contains(&frac), "{frac}");
    let grid = pseudosurv::pseudo::make_grid(
        &data,
        &pseudosurv::pseudo::GridSpec::Percentiles(vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]),
    )
    .unwrap();
    let ones = WeightFunction::constant(&vec![1.0; data.len()], 20.0).unwrap();
    let km = pseudo_conditional(&data, &grid, None).unwrap();
    let na = pseudo_conditional(&data, &grid, Some(&ones)).unwrap();
    for (a, b) in km.rows.iter().zip(&na.rows) {
        assert!((a.pseudo_value - b.pseudo_value).abs() <= 0.05);
    }
}
