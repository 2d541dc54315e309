//! Compares sample-count and SNR weighting on three toy clients whose
//! weights all equal a single value.

use fedsense::federated::{fed_avg, fed_snr, ClientUpdate};
use fedsense::nn::{ModelWeights, TENSORS};

fn client(value: f32, samples: usize, snr_db: f64) -> ClientUpdate {
    let mut w = ModelWeights::zeros(16);
    for t in 0..TENSORS.len() {
        w.tensor_mut(t).iter_mut().for_each(|v| *v = value);
    }
    ClientUpdate { weights: w, sample_count: samples, snr_linear: 10f64.powf(snr_db / 10.0) }
}

fn main() -> Result<(), fedsense::Error> {
    let clients = [client(0.2, 128, -8.0), client(0.5, 128, 3.0), client(0.9, 128, 21.0)];
    println!("client  value  samples  SNR_dB");
    for (i, c) in clients.iter().enumerate() {
        println!("{i:>6} {:>6.2} {:>8} {:>7.1}", c.weights.tensor(0)[0], c.sample_count, 10.0 * c.snr_linear.log10());
    }
    println!();
    println!("FedAvg -> {:.6}", fed_avg(&clients)?.tensor(0)[0]);
    println!("FedSNR -> {:.6}", fed_snr(&clients)?.tensor(0)[0]);
    Ok(())
}
