use fedsense::dataset::Example;
use fedsense::nn::{
    calibrate_bn, check_gradients, evaluate, init_model, load_checkpoint, loss_and_gradients, predict, save_checkpoint,
    train_on, Batch, DropoutMasks, ModelWeights, Param, TrainParams, Weights, TENSORS,
};
use fedsense::rng::substream;
use rand::Rng;
use rand_distr::StandardNormal;

fn noise_example(rng: &mut impl Rng, m: usize, label: u8) -> Example {
    Example { x: (0..2 * m).map(|_| rng.sample::<f32, _>(StandardNormal)).collect(), label }
}

/// A model whose output is `sigmoid(bias)` for every input.
fn constant_model(m: usize, bias: f32) -> ModelWeights {
    let mut w = ModelWeights::zeros(m);
    w.get_mut(Param::Bn1Var).iter_mut().for_each(|v| *v = 1.0);
    w.get_mut(Param::Bn2Var).iter_mut().for_each(|v| *v = 1.0);
    w.get_mut(Param::OutBias)[0] = bias;
    w
}

#[test]
fn reference_model_has_the_published_parameter_count() {
    let w: ModelWeights = init_model(3000, &mut substream(0, &[])).unwrap();
    assert_eq!(w.learnable_count(), 32_971);
    assert!(w.get(Param::Bn1Var).iter().chain(w.get(Param::Bn2Var)).all(|&v| v == 1.0));
    assert!(init_model::<f32, _>(3, &mut substream(0, &[])).is_err());
}

#[test]
fn duplicated_batch_has_the_single_example_gradient() {
    let m = 32;
    let mut rng = substream(3, &[]);
    let w: Weights<f64> = init_model(m, &mut rng).unwrap();
    let e = noise_example(&mut rng, m, 1);
    let one = Batch::<f64>::from_examples([&e], m).unwrap();
    let two = Batch::<f64>::from_examples([&e, &e], m).unwrap();
    let g1 = loss_and_gradients(&w, &one, &[1.0], &DropoutMasks::identity(1, m)).unwrap();
    let g2 = loss_and_gradients(&w, &two, &[1.0, 1.0], &DropoutMasks::identity(2, m)).unwrap();
    assert!((g1.loss - g2.loss).abs() < 1e-12);
    for (t, spec) in TENSORS.iter().enumerate() {
        for (a, b) in g1.grads.tensor(t).iter().zip(g2.grads.tensor(t)) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-6), "{}: {a} vs {b}", spec.name);
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    let report = check_gradients(32, 1, 17, 1e-3).unwrap();
    assert_eq!(report.checked(), 32_971);
    assert!(report.max_rel_error() < 1e-4, "{}", report.max_rel_error());
}

#[test]
fn constant_models_score_by_enumeration() {
    let m = 16;
    let mut rng = substream(1, &[]);
    let labels = [1u8, 1, 0, 1];
    let set: Vec<Example> = labels.iter().map(|&l| noise_example(&mut rng, m, l)).collect();
    assert_eq!(evaluate(&constant_model(m, 5.0), &set).unwrap(), 0.75);
    assert_eq!(evaluate(&constant_model(m, -5.0), &set).unwrap(), 0.25);
    let positives: Vec<Example> = set.iter().map(|e| Example { label: 1, ..e.clone() }).collect();
    assert_eq!(evaluate(&constant_model(m, 5.0), &positives).unwrap(), 1.0);
    let x = Batch::<f32>::from_examples(&set, m).unwrap();
    let p = predict(&constant_model(m, 0.0), &x).unwrap();
    assert!(p.iter().all(|&v| v == 0.5));
    assert_eq!(evaluate(&constant_model(m, 0.0), &set).unwrap(), 0.25);
}

#[test]
fn checkpoints_survive_the_file_system() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    let mut rng = substream(2, &[]);
    let mut w: ModelWeights = init_model(64, &mut rng).unwrap();
    w.get_mut(Param::Bn2Mean).iter_mut().for_each(|v| *v = rng.random());
    save_checkpoint(&path, &w).unwrap();
    assert_eq!(load_checkpoint(&path).unwrap(), w);
    assert!(load_checkpoint(dir.path().join("missing")).is_err());
}

#[test]
fn calibrated_statistics_are_finite_and_non_negative() {
    let m = 64;
    let mut rng = substream(4, &[]);
    let data: Vec<Example> = (0..40).map(|i| noise_example(&mut rng, m, (i % 2) as u8)).collect();
    let w: ModelWeights = init_model(m, &mut rng).unwrap();
    let c = calibrate_bn(&w, &data).unwrap();
    assert!(c.is_finite());
    assert!(c.get(Param::Bn1Var).iter().chain(c.get(Param::Bn2Var)).all(|&v| v >= 0.0));
    assert_eq!(c.get(Param::Conv2Kernel), w.get(Param::Conv2Kernel));
}

#[test]
fn training_report_respects_limits() {
    let m = 32;
    let mut rng = substream(5, &[]);
    let data: Vec<Example> = (0..64).map(|i| noise_example(&mut rng, m, (i % 2) as u8)).collect();
    let w0: ModelWeights = init_model(m, &mut rng).unwrap();
    let hp = TrainParams { max_epochs: 4, ..TrainParams::default() };
    let (w, report) = train_on(&w0, &data, &hp, &mut substream(6, &[])).unwrap();
    assert!(report.epochs_run <= 4 && report.epochs_run >= 1);
    assert!(report.final_loss >= 0.0);
    assert!((0.0..=1.0).contains(&report.train_accuracy));
    assert!(w.is_finite());
    assert!(w.get(Param::Bn1Var).iter().all(|&v| v >= 0.0));
}
