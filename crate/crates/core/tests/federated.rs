use fedsense::dataset::{make_client_dataset, Scene};
use fedsense::federated::{
    baseline_independent, initial_model, run_experiment, run_round, sensing_accuracy, ClientUpdate,
};
use fedsense::nn::train_local;
use fedsense::rng::{substream, TRAIN};
use fedsense::{Aggregator, SimulationConfig};

fn tiny(num_uavs: usize, settings: usize) -> SimulationConfig {
    SimulationConfig {
        num_uavs,
        settings,
        data_per_uav: 16,
        signal_len: 64,
        fs_hz: 6.4e6,
        max_epochs: 1,
        seed: 5,
        ..SimulationConfig::desk()
    }
}

#[test]
fn single_uav_round_returns_the_trained_client() {
    let cfg = tiny(1, 1);
    let global = initial_model(&cfg).unwrap();
    let (next, result) = run_round(&global, 0, &cfg).unwrap();

    let scene = Scene::generate(&cfg, 0).unwrap();
    let ds = make_client_dataset(&scene, 0, &cfg).unwrap();
    let mut r = substream(cfg.seed, &[TRAIN, 0, 0]);
    let (trained, _) = train_local(&global, &ds, &cfg.train_params(), &mut r).unwrap();
    assert_eq!(next, trained);
    assert_eq!(result.accuracies.len(), 1);
}

#[test]
fn zero_local_epochs_leave_the_global_model_unchanged() {
    for aggregator in [Aggregator::FedAvg, Aggregator::FedSnr] {
        let cfg = SimulationConfig { max_epochs: 0, aggregator, ..tiny(3, 1) };
        let global = initial_model(&cfg).unwrap();
        let (next, _) = run_round(&global, 0, &cfg).unwrap();
        assert_eq!(next, global, "{aggregator:?}");
    }
}

#[test]
fn rounds_are_bit_reproducible() {
    let cfg = tiny(4, 2);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 2);
}

#[test]
fn round_thread_count_does_not_change_results() {
    let cfg = tiny(4, 1);
    let global = initial_model(&cfg).unwrap();
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let parallel = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = serial.install(|| run_round(&global, 0, &cfg).unwrap());
    let b = parallel.install(|| run_round(&global, 0, &cfg).unwrap());
    assert_eq!(a, b);
}

#[test]
fn single_setting_gives_single_result() {
    let history = run_experiment(&tiny(2, 1)).unwrap();
    assert_eq!(history.len(), 1);
    assert_eq!(history[0].round, 0);
}

#[test]
fn history_is_bounded_and_complete() {
    let cfg = tiny(3, 3);
    for r in run_experiment(&cfg).unwrap() {
        assert_eq!(r.accuracies.len(), 3);
        assert_eq!(r.snr_db.len(), 3);
        assert!(r.accuracies.iter().all(|a| (0.0..=1.0).contains(a)));
        assert!((0.0..=1.0).contains(&r.mean_accuracy));
        assert!(r.snr_db.iter().all(|s| s.is_finite()));
    }
}

#[test]
fn single_setting_baseline_matches_the_federated_round() {
    let cfg = tiny(1, 1);
    let global = initial_model(&cfg).unwrap();
    let (_, round) = run_round(&global, 0, &cfg).unwrap();
    let baseline = baseline_independent(&cfg).unwrap();
    assert_eq!(baseline.accuracies, round.accuracies);
    assert_eq!(baseline.mean_accuracy, round.mean_accuracy);
}

#[test]
fn baseline_is_deterministic() {
    let cfg = tiny(2, 2);
    assert_eq!(baseline_independent(&cfg).unwrap(), baseline_independent(&cfg).unwrap());
}

#[test]
fn calibration_can_be_disabled() {
    let cfg = SimulationConfig { bn_calibration: false, ..tiny(1, 1) };
    let scene = Scene::generate(&cfg, 0).unwrap();
    let ds = make_client_dataset(&scene, 0, &cfg).unwrap();
    let w = initial_model(&cfg).unwrap();
    let direct = fedsense::nn::evaluate(&w, &ds.test).unwrap();
    assert_eq!(sensing_accuracy(&w, &ds.train, &ds.test, &cfg).unwrap(), direct);
}

#[test]
fn client_updates_carry_dataset_metadata() {
    let cfg = tiny(2, 1);
    let scene = Scene::generate(&cfg, 0).unwrap();
    for uav in 0..2 {
        let ds = make_client_dataset(&scene, uav, &cfg).unwrap();
        let u = ClientUpdate { weights: initial_model(&cfg).unwrap(), sample_count: ds.sample_count, snr_linear: ds.snr_linear };
        assert_eq!(u.sample_count, cfg.data_per_uav);
        assert!(u.snr_linear > 0.0);
    }
}
