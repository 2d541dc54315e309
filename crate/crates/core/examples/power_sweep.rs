//! Sweeps one axis for every method and prints the CSV summary.
//!
//! ```text
//! cargo run --release --example power_sweep -- [axis] [v1,v2,...] [seeds] [key=value ...]
//! cargo run --release --example power_sweep -- ptx -5,5,20 2 settings=10
//! ```

use fedsense::sweep::{sweep_methods, write_csv, Axis, Method};
use fedsense::SimulationConfig;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = SimulationConfig::desk();
    let mut positional = Vec::new();
    for arg in std::env::args().skip(1) {
        match arg.split_once('=') {
            Some((key, value)) => cfg.set(key.trim(), value.trim())?,
            None => positional.push(arg),
        }
    }
    let axis: Axis = positional.first().map_or("ptx", String::as_str).parse()?;
    let values: Vec<f64> = positional
        .get(1)
        .map_or("-5,5,20", String::as_str)
        .split(',')
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    let seeds: u64 = positional.get(2).map_or(Ok(1), |s| s.parse())?;
    let seed_list: Vec<u64> = (0..seeds).map(|k| cfg.seed + k).collect();
    let methods = [Method::Baseline, Method::FedAvg, Method::FedSnr];
    let result = sweep_methods(&cfg, axis, &values, &seed_list, &methods, |d| {
        eprintln!("{axis}={} {} seed {}: {:.4}", d.value, d.method, d.seed, d.accuracy);
    })?;
    write_csv(&result, &mut std::io::stdout().lock())?;
    Ok(())
}
