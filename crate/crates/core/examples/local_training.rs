//! Trains one UAV's model on a single setting and scores it on the UAV's
//! held-out windows, with and without re-estimated batch-norm statistics.
//!
//! ```text
//! cargo run --release --example local_training -- [key=value ...]
//! cargo run --release --example local_training -- uav=3 max_epochs=20
//! ```

use fedsense::dataset::{make_client_dataset, Scene};
use fedsense::federated::initial_model;
use fedsense::nn::{calibrate_bn, evaluate, train_local};
use fedsense::rng::{substream, TRAIN};
use fedsense::SimulationConfig;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = SimulationConfig { max_epochs: 20, ..SimulationConfig::desk() };
    let mut uav = 0;
    for arg in std::env::args().skip(1) {
        let (key, value) = arg.split_once('=').ok_or("arguments take the form key=value")?;
        match key.trim() {
            "uav" => uav = value.trim().parse()?,
            key => cfg.set(key, value.trim())?,
        }
    }
    cfg.validate()?;
    let scene = Scene::generate(&cfg, 0)?;
    let ds = make_client_dataset(&scene, uav, &cfg)?;
    println!("uav {uav}: SNR {:.1} dB, {} training windows", 10.0 * ds.snr_linear.log10(), ds.train.len());

    let w0 = initial_model(&cfg)?;
    let (w, report) = train_local(&w0, &ds, &cfg.train_params(), &mut substream(cfg.seed, &[TRAIN, 0, uav as u64]))?;
    for (epoch, loss) in report.loss_history.iter().enumerate() {
        println!("epoch {:>2}  loss {loss:.4}", epoch + 1);
    }
    if report.stopped_early {
        println!("stopped early after {} epochs", report.epochs_run);
    }
    println!("train accuracy (dropout on) {:.4}", report.train_accuracy);
    println!("test accuracy, running statistics    {:.4}", evaluate(&w, &ds.test)?);
    println!("test accuracy, calibrated statistics {:.4}", evaluate(&calibrate_bn(&w, &ds.train)?, &ds.test)?);
    Ok(())
}
