//! One federated experiment at desk scale, printing every round.
//!
//! ```text
//! cargo run --release --example federated_run -- [key=value ...]
//! cargo run --release --example federated_run -- aggregator=fedavg ptx_dbm=-5 seed=3
//! ```

use std::time::Instant;

use fedsense::federated::{headline_accuracy, run_experiment_with};
use fedsense::{Aggregator, SimulationConfig};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = SimulationConfig::desk();
    for arg in std::env::args().skip(1) {
        let (key, value) = arg.split_once('=').ok_or("arguments take the form key=value")?;
        cfg.set(key.trim(), value.trim())?;
    }
    let started = Instant::now();
    let (_, history) = run_experiment_with(&cfg, |r| {
        let snr_mean = r.snr_db.iter().sum::<f64>() / r.snr_db.len() as f64;
        let clients = r.reports.len() as f64;
        let train_acc = r.reports.iter().map(|t| t.train_accuracy).sum::<f64>() / clients;
        let loss = r.reports.iter().map(|t| t.final_loss).sum::<f64>() / clients;
        println!(
            "round {:>3}  accuracy {:.4}  local train accuracy {train_acc:.4}  loss {loss:.4}  mean SNR {snr_mean:>6.1} dB  [{:.1?}]",
            r.round,
            r.mean_accuracy,
            started.elapsed()
        );
    })?;
    let name = match cfg.aggregator {
        Aggregator::FedAvg => "FedAvg",
        Aggregator::FedSnr => "FedSNR",
    };
    println!("{name} headline accuracy {:.4}", headline_accuracy(&history));
    Ok(())
}
