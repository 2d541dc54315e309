//! Generates every UAV's windows for one setting, stores them in a cache
//! file and reads them back.
//!
//! ```text
//! cargo run --release --example dataset_cache -- [path] [key=value ...]
//! ```

use fedsense::dataset::{make_client_dataset, read_cache, write_cache, DatasetCache, Scene};
use fedsense::SimulationConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut path = std::env::temp_dir().join("fedsense-setting0.fsds");
    let mut cfg = SimulationConfig::desk();
    for arg in std::env::args().skip(1) {
        match arg.split_once('=') {
            Some((key, value)) => cfg.set(key.trim(), value.trim())?,
            None => path = arg.into(),
        }
    }
    cfg.validate()?;
    let scene = Scene::generate(&cfg, 0)?;
    let clients = (0..scene.num_uavs())
        .map(|uav| make_client_dataset(&scene, uav, &cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let cache = DatasetCache {
        signal_len: cfg.signal_len,
        data_per_uav: cfg.data_per_uav,
        test_per_uav: cfg.test_per_uav(),
        seed: cfg.seed,
        clients,
    };
    write_cache(&path, &cache)?;
    let bytes = std::fs::metadata(&path)?.len();
    let back = read_cache(&path)?;
    println!("wrote {} ({bytes} bytes), read back identical: {}", path.display(), back == cache);
    for c in &back.clients {
        let positives = c.train.iter().filter(|e| e.label == 1).count();
        println!(
            "uav {:>2}: {} train ({positives} with radar), {} test, SNR {:.1} dB",
            c.uav_index,
            c.train.len(),
            c.test.len(),
            10.0 * c.snr_linear.log10()
        );
    }
    Ok(())
}
