//! Finite-difference check of every learnable gradient on a shrunken model.
//!
//! ```text
//! cargo run --release --example gradient_check -- [seeds] [step]
//! ```

use std::time::Instant;

use fedsense::nn::{check_gradients, check_gradients_unfrozen};

fn main() -> fedsense::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let step: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let batch: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(4);
    for seed in 0..seeds {
        let t = Instant::now();
        let report = if std::env::var_os("UNFROZEN").is_some() {
            check_gradients_unfrozen(32, batch, seed, step)?
        } else {
            check_gradients(32, batch, seed, step)?
        };
        println!("seed {seed}: {} components, max relative error {:.3e} ({:.1?})", report.checked(), report.max_rel_error(), t.elapsed());
        for t in &report.tensors {
            println!("  {:<14} rel {:.3e}  abs {:.3e}", t.name, t.max_rel_error, t.max_abs_error);
        }
    }
    Ok(())
}
