//! Draws radar waveforms and reports their occupied band and envelope.
//!
//! ```text
//! cargo run --release --example waveforms -- [count] [samples]
//! ```

use std::collections::BTreeMap;

use fedsense::rng::substream;
use fedsense::waveform::{random_spec, synthesize};

fn main() {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(10);
    let m: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(512);
    let fs = 51.2e6;
    let mut rng = substream(0, &[]);
    let mut tally = BTreeMap::new();
    println!("{:<12} {:>12} {:>12} {:>8} {:>8}", "kind", "f_lo_MHz", "f_hi_MHz", "power", "peak");
    for _ in 0..count {
        let spec = random_spec(m, fs, &mut rng);
        let s = synthesize(&spec, m, fs);
        let power = s.iter().map(|v| v.norm_sqr()).sum::<f64>() / m as f64;
        let peak = s.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let (lo, hi) = spec.frequency_span();
        let kind = format!("{:?}", spec.kind());
        println!("{kind:<12} {:>12.3} {:>12.3} {power:>8.4} {peak:>8.4}", lo / 1e6, hi / 1e6);
        *tally.entry(kind).or_insert(0) += 1;
    }
    println!();
    for (kind, n) in tally {
        println!("{kind:<12} {n}");
    }
}
