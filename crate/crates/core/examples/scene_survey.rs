//! Draws one setting and prints each UAV's link budget.
//!
//! ```text
//! cargo run --release --example scene_survey -- [key=value ...]
//! cargo run --release --example scene_survey -- num_uavs=16 ptx_dbm=-5 seed=2
//! ```

use fedsense::channel::watts_to_dbm;
use fedsense::dataset::Scene;
use fedsense::SimulationConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = SimulationConfig::desk();
    for arg in std::env::args().skip(1) {
        let (key, value) = arg.split_once('=').ok_or("arguments take the form key=value")?;
        cfg.set(key.trim(), value.trim())?;
    }
    cfg.validate()?;
    let scene = Scene::generate(&cfg, 0)?;
    let g = &scene.geometry;
    let r = g.radar_position;
    println!("radar at ({:.0}, {:.0}, {:.0}) m", r.x, r.y, r.z);
    println!("closest UAV pair {:.1} m apart (d_min {} m)", g.min_separation(), cfg.d_min);
    println!();
    println!("uav        x        y       z   dist_m  elev_deg   PL_dB  |h|^2  rx_dBm  SNR_dB  doppler_Hz");
    for (i, (p, ch)) in g.uav_positions.iter().zip(&scene.channels).enumerate() {
        println!(
            "{i:>3} {:>8.0} {:>8.0} {:>7.0} {:>8.0} {:>9.2} {:>7.2} {:>6.3} {:>7.2} {:>7.2} {:>11.1}",
            p.x,
            p.y,
            p.z,
            g.distances[i],
            g.elevations[i],
            ch.path_loss_db,
            ch.fading_gain.norm_sqr(),
            watts_to_dbm(ch.rx_power_w),
            10.0 * ch.faded_snr().log10(),
            ch.doppler_hz,
        );
    }
    Ok(())
}
