//! Independently trained per-UAV models on data concatenated across settings.
//!
//! ```text
//! cargo run --release --example baseline -- [key=value ...]
//! ```

use std::time::Instant;

use fedsense::federated::baseline_independent;
use fedsense::SimulationConfig;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = SimulationConfig::desk();
    for arg in std::env::args().skip(1) {
        let (key, value) = arg.split_once('=').ok_or("arguments take the form key=value")?;
        cfg.set(key.trim(), value.trim())?;
    }
    let started = Instant::now();
    let result = baseline_independent(&cfg)?;
    for (uav, (acc, report)) in result.accuracies.iter().zip(&result.reports).enumerate() {
        println!(
            "UAV {uav}: accuracy {acc:.4}  epochs {}  final loss {:.4}",
            report.epochs_run, report.final_loss
        );
    }
    println!("baseline mean accuracy {:.4} [{:.1?}]", result.mean_accuracy, started.elapsed());
    Ok(())
}
