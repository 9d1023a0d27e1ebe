//! Monte-Carlo behaviour of the tests on their design scenarios. Seeds are
//! fixed; the asserted ranges carry slack for the binomial noise of the
//! replication counts.

use rand::Rng;
use rand_distr::Distribution;

use coinp::cit::{approx_cpi, coinp, cpi, Method, TestConfig};
use coinp::data::{split, Dataset};
use coinp::harness::{power_estimate, run_grid, ExperimentGrid};
use coinp::learners::LearnerSpec;
use coinp::scenarios::{generate, ScenarioConfig, ScenarioId};
use coinp::seed;

/// Strong dependence is detected almost always: dist3 with beta_s = 0.6 at
/// n = 1000 pushes the observed risk below every permuted risk in nearly
/// every run, so p <= 0.02 with B = 50 in at least 95 of 100 runs.
#[test]
fn coinp_detects_strong_signal_decisively() {
    let mut small = 0;
    for rep in 0..100u64 {
        let rep_seed = seed::derive(31, &[rep]);
        let (dataset, s) =
            generate(&ScenarioConfig::new(ScenarioId::Dist3, 0.6, 1000, rep_seed)).unwrap();
        let (train, holdout) = split(&dataset, 0.5, seed::derive(rep_seed, &[1])).unwrap();
        let cfg = TestConfig {
            b: 50,
            ..TestConfig::new(s, seed::derive(rep_seed, &[2]))
        };
        let r = coinp(&LearnerSpec::Ols, &train, &holdout, &cfg).unwrap();
        if r.p_value <= 0.02 {
            small += 1;
        }
    }
    assert!(small >= 95, "p <= 0.02 in only {small}/100 runs");
}

/// The paired-t variant also has high power on the strong-signal cell.
#[test]
fn cpi_power_on_strong_signal() {
    let mut rejections = 0;
    for rep in 0..100u64 {
        let rep_seed = seed::derive(37, &[rep]);
        let (dataset, s) =
            generate(&ScenarioConfig::new(ScenarioId::Dist3, 0.6, 1000, rep_seed)).unwrap();
        let (train, holdout) = split(&dataset, 0.5, seed::derive(rep_seed, &[1])).unwrap();
        let cfg = TestConfig::new(s, seed::derive(rep_seed, &[2]));
        let r = cpi(&LearnerSpec::Ols, &train, &holdout, &cfg).unwrap();
        if r.p_value <= 0.05 {
            rejections += 1;
        }
        // the reported statistic and the p-value agree through the t tail
        let t = r.t_statistic.unwrap();
        let df = r.degrees_of_freedom.unwrap();
        let want = 1.0 - coinp::cit::student_t_cdf(t, df).unwrap();
        assert!((r.p_value - want).abs() < 1e-12);
    }
    assert!(rejections > 90, "cpi rejected only {rejections}/100");
}

/// With mutually independent features the single-fit t variant is
/// calibrated: rejection rate at the 5% level within [0.01, 0.10] over 200
/// runs on an independent-feature null.
#[test]
fn approx_cpi_calibrated_with_independent_features() {
    let mut rejections = 0;
    let runs = 200;
    for rep in 0..runs {
        let rep_seed = seed::derive(41, &[rep]);
        let mut rng = seed::rng(rep_seed);
        let n = 1000;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<f64> = rows
            .iter()
            .map(|r| {
                let u: f64 = rand_distr::StandardNormal.sample(&mut rng);
                r[0] + 0.5 * u
            })
            .collect();
        let names = vec!["x1".into(), "x2".into(), "x3".into()];
        let dataset = Dataset::from_rows(rows, labels, names).unwrap();
        let (train, holdout) = split(&dataset, 0.5, seed::derive(rep_seed, &[1])).unwrap();
        // the tested feature is pure noise, independent of everything
        let cfg = TestConfig::new(coinp::data::FeatureSet::single(2), seed::derive(rep_seed, &[2]));
        let r = approx_cpi(&LearnerSpec::Ols, &train, &holdout, &cfg).unwrap();
        if r.p_value <= 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / runs as f64;
    assert!(
        (0.01..=0.10).contains(&rate),
        "approx_cpi null rejection rate {rate}"
    );
}

/// Desk-scale calibration envelope through the grid runner: 100
/// replications of the null cell stay within the binomial 99% envelope
/// around the nominal level.
#[test]
fn grid_null_cell_rejection_envelope() {
    let grid = ExperimentGrid {
        scenarios: vec![ScenarioId::Dist3],
        beta_s_values: vec![0.0],
        n_values: vec![500],
        methods: vec![Method::Coinp],
        learners: vec![LearnerSpec::Ols],
        replications: 100,
        b: 50,
        master_seed: 23,
        ..ExperimentGrid::default()
    };
    let records = run_grid(&grid, 0).unwrap();
    let ps: Vec<f64> = records.iter().map(|r| r.p_value.unwrap()).collect();
    let rate = power_estimate(&ps, 0.05).unwrap();
    assert!((0.01..=0.11).contains(&rate), "null rejection rate {rate}");
}
