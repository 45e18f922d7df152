use sparc_core::CodeParams;
use sparc_core::params::capacity;
use sparc_core::sim::{Experiment, SimConfig, sweep_m};

fn config(l: usize, m: usize, frac: f64, snr: f64, seed: u64) -> SimConfig {
    let params = CodeParams::derive(l, m, frac * capacity(snr), snr, 1.0).unwrap();
    let mut c = SimConfig::new(params);
    c.master_seed = seed;
    c.mc.num_samples = 20_000;
    c
}

#[test]
fn batch_matches_state_evolution_prediction() {
    let exp = Experiment::new(config(256, 256, 0.8, 11.1, 3)).unwrap();
    let predicted = exp.predicted_ser().unwrap();
    let batch = exp.run_batch(50, 1).unwrap();
    let agg = &batch.aggregate;
    assert_eq!(agg.failures, 0);
    assert!(
        (agg.mean_ser - predicted.value).abs() <= 3.0 * agg.std_err,
        "mean {} ± {} vs predicted {}",
        agg.mean_ser,
        agg.std_err,
        predicted.value
    );
}

#[test]
fn deviation_fraction_is_non_increasing_in_epsilon() {
    let mut c = config(32, 16, 0.7, 7.0, 8);
    c.epsilon_list = vec![0.0, 0.01, 0.05, 0.1, 0.5, 1.0];
    let agg = Experiment::new(c).unwrap().run_batch(30, 2).unwrap().aggregate;
    let fractions: Vec<f64> = agg.deviations.iter().map(|d| d.fraction).collect();
    assert!(fractions.windows(2).all(|w| w[1] <= w[0]), "{fractions:?}");
    assert_eq!(*fractions.last().unwrap(), 0.0);
}

#[test]
fn single_point_sweep_is_a_batch() {
    let c = config(16, 32, 0.6, 7.0, 4);
    let rate = c.params.rate();
    let row = sweep_m(&c, rate, &[32], 8, 1).unwrap().rows.remove(0);
    let exp = Experiment::new(c).unwrap();
    let batch = exp.run_batch(8, 1).unwrap();
    assert_eq!(row.mean_ser, batch.aggregate.mean_ser);
    assert_eq!(row.std_err_ser, batch.aggregate.std_err);
    assert_eq!(row.se_predicted_ser, exp.predicted_ser().unwrap().value);
}

#[test]
fn pinned_matrix_is_shared_across_trials() {
    let mut c = config(8, 8, 0.5, 7.0, 6);
    c.fresh_per_trial = false;
    let pinned = Experiment::new(c.clone()).unwrap();
    assert_eq!(pinned.matrix(0).unwrap().materialize(), pinned.matrix(5).unwrap().materialize());
    c.fresh_per_trial = true;
    let fresh = Experiment::new(c).unwrap();
    assert_ne!(fresh.matrix(0).unwrap().materialize(), fresh.matrix(5).unwrap().materialize());
}

#[test]
fn every_trajectory_starts_at_full_power() {
    let c = config(16, 16, 0.6, 5.0, 10);
    let p = c.params.power();
    let batch = Experiment::new(c).unwrap().run_batch(5, 1).unwrap();
    for r in &batch.trials {
        assert!((r.mse_trajectory[0] - p).abs() <= 1e-12 * p);
    }
}
