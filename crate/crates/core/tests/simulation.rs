use pseudosurv::cox::{fit_cox, CoxTarget};
use pseudosurv::sim::{gen_cox, gen_friedman_aft, CoxSimSpec, FriedmanSpec};

#[test]
fn friedman_censoring_hits_targets() {
    for (k, target) in [0.2, 0.4, 0.6].into_iter().enumerate() {
        let sim = gen_friedman_aft(&FriedmanSpec {
            censoring_rate: target,
            n: 5000,
            seed: 10 + k as u64,
            ..FriedmanSpec::default()
        })
        .unwrap();
        let frac = sim.data.censoring_fraction();
        assert!((frac - target).abs() <= 0.03, "target {target}: {frac}");
        assert!(sim.data.records().iter().all(|r| r.time > 0.0));
    }
}

#[test]
fn friedman_signal_to_noise() {
    let sim = gen_friedman_aft(&FriedmanSpec {
        n: 5000,
        seed: 2,
        ..FriedmanSpec::default()
    })
    .unwrap();
    let snr = sim.meta.achieved_snr.unwrap();
    assert!((snr - 3.0).abs() <= 0.3, "{snr}");
    let mu = sim.mean_log_time.unwrap();
    let mean = mu.iter().sum::<f64>() / mu.len() as f64;
    assert!(mean.abs() < 1e-10);
}

#[test]
fn friedman_seeds_change_the_function() {
    let a = gen_friedman_aft(&FriedmanSpec {
        n: 50,
        seed: 1,
        ..FriedmanSpec::default()
    })
    .unwrap();
    let b = gen_friedman_aft(&FriedmanSpec {
        n: 50,
        seed: 2,
        ..FriedmanSpec::default()
    })
    .unwrap();
    assert_ne!(a.mean_log_time, b.mean_log_time);
}

#[test]
fn dependent_censoring_is_about_half() {
    let sim = gen_cox(&CoxSimSpec {
        n: 4000,
        seed: 5,
        ..CoxSimSpec::default()
    })
    .unwrap();
    let frac = sim.data.censoring_fraction();
    assert!((0.47..=0.53).contains(&frac), "{frac}");
}

#[test]
fn exponential_median_at_zero_effect() {
    // beta = 0 makes every subject exponential with rate 0.1
    let sim = gen_cox(&CoxSimSpec {
        beta: 0.0,
        n: 10_000,
        dependent_censoring: false,
        seed: 8,
        ..CoxSimSpec::default()
    })
    .unwrap();
    let mut t = sim.data.times();
    t.sort_by(f64::total_cmp);
    let median = t[t.len() / 2];
    let expected = 2f64.ln() / 0.1;
    assert!((median / expected - 1.0).abs() <= 0.05, "{median}");
    let n = t.len() as f64;
    let ks = t
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-0.1 * x).exp();
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks <= 0.02, "{ks}");
}

/// Breslow log partial likelihood for one covariate without ties.
fn loglik(times: &[f64], z: &[f64], beta: f64) -> f64 {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
    let mut risk = 0.0;
    let mut ll = 0.0;
    for &i in &order {
        risk += (beta * z[i]).exp();
        ll += beta * z[i] - risk.ln();
    }
    ll
}

#[test]
fn cox_recovers_beta_and_matches_grid_search() {
    let sim = gen_cox(&CoxSimSpec {
        n: 2000,
        dependent_censoring: false,
        seed: 21,
        ..CoxSimSpec::default()
    })
    .unwrap();
    let data = sim.data;
    assert_eq!(data.n_events(), data.len());
    let fit = fit_cox(&data, CoxTarget::Event).unwrap();
    assert!((fit.beta[0] - 1.0).abs() <= 0.1, "{}", fit.beta[0]);

    let times = data.times();
    let z: Vec<f64> = data.records().iter().map(|r| r.covariates[0]).collect();
    let (best, _) = (0..=2000)
        .map(|k| 0.5 + k as f64 * 5e-4)
        .map(|b| (b, loglik(&times, &z, b)))
        .fold(
            (f64::NAN, f64::NEG_INFINITY),
            |acc, x| if x.1 > acc.1 { x } else { acc },
        );
    assert!(
        (fit.beta[0] - best).abs() <= 5e-4,
        "newton {} vs grid {best}",
        fit.beta[0]
    );
}
