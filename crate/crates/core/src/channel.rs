//! Air-to-ground link between the radar and one UAV: elevation-dependent path
//! loss with shadowing, Rician small-scale fading, Doppler and receiver noise.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Coefficients of the elevation-dependent air-to-ground path-loss model.
/// Angles are in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossParams {
    pub alpha: f64,
    pub beta: f64,
    pub theta0: f64,
    pub zeta: f64,
    pub nu0: f64,
    pub eta: f64,
    pub sigma0: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self {
            alpha: 3.04,
            beta: -23.29,
            theta0: -3.61,
            zeta: 4.14,
            nu0: 20.70,
            eta: -0.41,
            sigma0: 5.86,
        }
    }
}

impl PathLossParams {
    /// Path loss without the shadowing term.
    pub fn mean_db(&self, d: f64, theta: f64) -> Result<f64> {
        if d.is_nan() || d <= 0.0 {
            return Err(Error::InvalidDistance(d));
        }
        let offset = theta - self.theta0;
        Ok(10.0 * self.alpha * d.log10()
            + self.beta * offset * (-offset / self.zeta).exp()
            + self.nu0)
    }

    pub fn shadowing_std(&self, theta: f64) -> f64 {
        self.eta * theta + self.sigma0
    }
}

/// Path loss in dB with a fresh shadowing draw.
pub fn path_loss_db<R: Rng + ?Sized>(d: f64, theta: f64, p: &PathLossParams, rng: &mut R) -> Result<f64> {
    let mean = p.mean_db(d, theta)?;
    let std = p.shadowing_std(theta);
    if std < 0.0 {
        return Err(Error::NegativeStd(std));
    }
    Ok(mean + std * rng.sample::<f64, _>(StandardNormal))
}

/// Unit-power Rician gain with K-factor `k`; `k = 0` is Rayleigh.
pub fn rician_fading<R: Rng + ?Sized>(k: f64, rng: &mut R) -> Complex64 {
    let phase = 2.0 * PI * rng.random::<f64>();
    let los = Complex64::from_polar((k / (k + 1.0)).sqrt(), phase);
    let scatter = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        * (0.5 / (k + 1.0)).sqrt();
    los + scatter
}

pub fn doppler_hz(v: f64, fc: f64) -> f64 {
    v / SPEED_OF_LIGHT * fc
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Average received power (W) and linear SNR for a transmit power, path loss
/// and noise floor. Both are floored at the smallest positive `f64` so that
/// extreme excess loss never produces a zero weight.
pub fn snr(ptx_dbm: f64, pl_db: f64, n0_dbm: f64) -> (f64, f64) {
    let rx_dbm = ptx_dbm - pl_db;
    let rx_w = dbm_to_watts(rx_dbm).max(f64::MIN_POSITIVE);
    let gamma = 10f64.powf((rx_dbm - n0_dbm) / 10.0).max(f64::MIN_POSITIVE);
    (rx_w, gamma)
}

/// Receiver and propagation constants shared by every UAV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioConfig {
    pub ptx_dbm: f64,
    pub n0_dbm: f64,
    pub fc_hz: f64,
    pub fs_hz: f64,
    pub m_samples: usize,
    pub k_rician: f64,
    pub vmax_mps: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            ptx_dbm: 5.0,
            n0_dbm: -93.0,
            fc_hz: 10e9,
            fs_hz: 300e6,
            m_samples: 3000,
            k_rician: 10.0,
            vmax_mps: 44.0,
        }
    }
}

/// One UAV's link state for a setting. Held fixed over every sensing window
/// of the setting; only noise and the radar waveform change per window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRealization {
    pub path_loss_db: f64,
    pub fading_gain: Complex64,
    pub doppler_hz: f64,
    pub velocity: f64,
    /// Average received power over the path, before fading.
    pub rx_power_w: f64,
    /// This UAV's noise floor, in watts.
    pub noise_power_w: f64,
    /// `rx_power_w / noise_power_w`.
    pub snr_linear: f64,
}

impl ChannelRealization {
    /// Draws path loss, fading and velocity for a UAV at distance `d` and
    /// elevation `theta`. `n0_offset_db` shifts this UAV's noise floor.
    ///
    /// The shadowing spread is clamped at zero for elevations where the
    /// linear spread model turns negative.
    pub fn draw<R: Rng + ?Sized>(
        d: f64,
        theta: f64,
        params: &PathLossParams,
        radio: &RadioConfig,
        n0_offset_db: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let std = params.shadowing_std(theta).max(0.0);
        let path_loss_db = params.mean_db(d, theta)? + std * rng.sample::<f64, _>(StandardNormal);
        let fading_gain = rician_fading(radio.k_rician, rng);
        let velocity = radio.vmax_mps * rng.random::<f64>();
        let n0_dbm = radio.n0_dbm + n0_offset_db;
        let (rx_power_w, snr_linear) = snr(radio.ptx_dbm, path_loss_db, n0_dbm);
        Ok(Self {
            path_loss_db,
            fading_gain,
            doppler_hz: doppler_hz(velocity, radio.fc_hz),
            velocity,
            rx_power_w,
            noise_power_w: dbm_to_watts(n0_dbm),
            snr_linear,
        })
    }

    /// SNR of the faded signal, `rx_power_w * |h|^2 / noise_power_w`. This is
    /// the average received signal power over any unit-power waveform window.
    pub fn faded_snr(&self) -> f64 {
        (self.rx_power_w * self.fading_gain.norm_sqr() / self.noise_power_w).max(f64::MIN_POSITIVE)
    }
}

/// Passes a unit-power baseband window through the link and adds noise.
pub fn apply_channel<R: Rng + ?Sized>(
    s: &[Complex64],
    ch: &ChannelRealization,
    radio: &RadioConfig,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if s.len() != radio.m_samples {
        return Err(Error::LengthMismatch {
            expected: radio.m_samples,
            actual: s.len(),
        });
    }
    let gain = ch.fading_gain * ch.rx_power_w.sqrt();
    let step = 2.0 * PI * ch.doppler_hz / radio.fs_hz;
    let noise = (ch.noise_power_w > 0.0)
        .then(|| Normal::new(0.0, (ch.noise_power_w / 2.0).sqrt()))
        .transpose()
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok(s.iter()
        .enumerate()
        .map(|(n, &x)| {
            let mut y = gain * x * Complex64::from_polar(1.0, step * n as f64);
            if let Some(noise) = &noise {
                y += Complex64::new(noise.sample(rng), noise.sample(rng));
            }
            y
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn mean_power(v: &[Complex64]) -> f64 {
        v.iter().map(|c| c.norm_sqr()).sum::<f64>() / v.len() as f64
    }

    fn clean_link(doppler_hz: f64) -> ChannelRealization {
        ChannelRealization {
            path_loss_db: 0.0,
            fading_gain: Complex64::new(1.0, 0.0),
            doppler_hz,
            velocity: 0.0,
            rx_power_w: 2.5,
            noise_power_w: 0.0,
            snr_linear: f64::INFINITY,
        }
    }

    #[test]
    fn path_loss_at_reference_angle_is_offset() {
        let p = PathLossParams::default();
        assert!((p.mean_db(1.0, p.theta0).unwrap() - 20.70).abs() < 1e-12);
    }

    #[test]
    fn path_loss_table_values_at_one_km() {
        let p = PathLossParams::default();
        let oracle = 10.0 * 3.04 * 3.0 + (-23.29) * 3.61 * (-3.61f64 / 4.14).exp() + 20.70;
        let got = p.mean_db(1000.0, 0.0).unwrap();
        assert!((got - oracle).abs() < 1e-9);
        assert!((got - 76.75).abs() < 0.01, "{got}");
    }

    #[test]
    fn path_loss_rejects_bad_inputs() {
        let p = PathLossParams::default();
        let mut rng = substream(0, &[]);
        assert!(matches!(path_loss_db(0.0, 0.0, &p, &mut rng), Err(Error::InvalidDistance(_))));
        assert!(matches!(path_loss_db(-3.0, 0.0, &p, &mut rng), Err(Error::InvalidDistance(_))));
        assert!(matches!(path_loss_db(100.0, 30.0, &p, &mut rng), Err(Error::NegativeStd(_))));
    }

    #[test]
    fn shadowing_moments() {
        let p = PathLossParams::default();
        let (d, theta) = (1000.0, 2.0);
        let mean = p.mean_db(d, theta).unwrap();
        let mut rng = substream(1, &[]);
        let n = 100_000;
        let x: Vec<f64> = (0..n)
            .map(|_| path_loss_db(d, theta, &p, &mut rng).unwrap() - mean)
            .collect();
        let m = x.iter().sum::<f64>() / n as f64;
        let sd = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let expected = p.shadowing_std(theta);
        assert!((sd / expected - 1.0).abs() < 0.02);
        assert!(m.abs() < 3.0 * expected / (n as f64).sqrt());
    }

    #[test]
    fn pure_los_has_unit_modulus() {
        let mut rng = substream(2, &[]);
        for _ in 0..100 {
            assert!((rician_fading(1e9, &mut rng).norm() - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn fading_has_unit_mean_power() {
        let mut rng = substream(3, &[]);
        for k in [0.0, 1.0, 10.0, 100.0] {
            let n = 100_000;
            let p = (0..n).map(|_| rician_fading(k, &mut rng).norm_sqr()).sum::<f64>() / n as f64;
            assert!((p - 1.0).abs() < 0.02, "K={k}: {p}");
        }
    }

    #[test]
    fn k_factor_recovered_by_moments() {
        let mut rng = substream(4, &[]);
        let n = 100_000;
        let g: Vec<f64> = (0..n).map(|_| rician_fading(10.0, &mut rng).norm_sqr()).collect();
        let m2 = g.iter().sum::<f64>() / n as f64;
        let m4 = g.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let k = (-2.0 * m2 * m2 + m4 - m2 * (2.0 * m2 * m2 - m4).sqrt()) / (m2 * m2 - m4);
        assert!((9.0..=11.0).contains(&k), "{k}");
    }

    #[test]
    fn doppler_examples() {
        assert_eq!(doppler_hz(0.0, 10e9), 0.0);
        assert_eq!(doppler_hz(SPEED_OF_LIGHT, 10e9), 10e9);
        assert!((doppler_hz(44.0, 10e9) - 44.0 / 2.99792458e8 * 1e10).abs() < 1e-9);
        assert!((doppler_hz(44.0, 10e9) - 1467.7).abs() < 0.05);
    }

    #[test]
    fn snr_examples() {
        let (_, g) = snr(-93.0, 0.0, -93.0);
        assert!((g - 1.0).abs() < 1e-12);
        let (rx, g) = snr(5.0, 76.75, -93.0);
        assert!((watts_to_dbm(rx) + 71.75).abs() < 1e-9);
        assert!((10.0 * g.log10() - 21.25).abs() < 1e-9);
        assert!((g - 133.35).abs() < 0.1);
        assert!((dbm_to_watts(-93.0) - 10f64.powf(-12.3)).abs() < 1e-25);
        assert!((dbm_to_watts(-93.0) - 5.01e-13).abs() < 1e-15);
    }

    #[test]
    fn snr_monotonicity() {
        let base = snr(5.0, 90.0, -93.0).1;
        assert!(snr(5.0, 91.0, -93.0).1 < base);
        assert!(snr(6.0, 90.0, -93.0).1 > base);
        assert!(snr(5.0, 1e6, -93.0).1 > 0.0);
    }

    #[test]
    fn realization_respects_doppler_bound() {
        let radio = RadioConfig::default();
        let p = PathLossParams::default();
        let bound = radio.vmax_mps / SPEED_OF_LIGHT * radio.fc_hz;
        let mut rng = substream(5, &[]);
        for i in 0..1000 {
            let theta = -10.0 + 0.03 * i as f64;
            let ch = ChannelRealization::draw(500.0 + i as f64, theta, &p, &radio, 0.0, &mut rng).unwrap();
            assert!(ch.doppler_hz >= 0.0 && ch.doppler_hz <= bound);
            assert!(ch.snr_linear > 0.0 && ch.rx_power_w > 0.0);
        }
        // Steep elevation: linear spread model is negative there, clamped to no shadowing.
        let ch = ChannelRealization::draw(100.0, 40.0, &p, &radio, 0.0, &mut rng).unwrap();
        assert_eq!(ch.path_loss_db, p.mean_db(100.0, 40.0).unwrap());
    }

    #[test]
    fn noise_only_window_has_noise_power() {
        let radio = RadioConfig::default();
        let mut ch = clean_link(0.0);
        ch.noise_power_w = dbm_to_watts(radio.n0_dbm);
        let zeros = vec![Complex64::new(0.0, 0.0); radio.m_samples];
        let mut rng = substream(6, &[]);
        for _ in 0..20 {
            let y = apply_channel(&zeros, &ch, &radio, &mut rng).unwrap();
            let ratio = mean_power(&y) / ch.noise_power_w;
            assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
        }
    }

    #[test]
    fn noiseless_link_scales_by_amplitude() {
        let radio = RadioConfig { m_samples: 8, ..RadioConfig::default() };
        let ch = clean_link(0.0);
        let s: Vec<Complex64> = (0..8).map(|n| Complex64::new(n as f64, -1.0)).collect();
        let y = apply_channel(&s, &ch, &radio, &mut substream(0, &[])).unwrap();
        for (a, b) in y.iter().zip(&s) {
            assert!((a - b * 2.5f64.sqrt()).norm() < 1e-12);
        }
    }

    #[test]
    fn quarter_rate_doppler_rotates_ninety_degrees() {
        let radio = RadioConfig { m_samples: 8, fs_hz: 4.0, ..RadioConfig::default() };
        let mut ch = clean_link(1.0);
        ch.rx_power_w = 1.0;
        let s = vec![Complex64::new(1.0, 0.0); 8];
        let y = apply_channel(&s, &ch, &radio, &mut substream(0, &[])).unwrap();
        for (n, v) in y.iter().enumerate() {
            let expected = Complex64::i().powi(n as i32);
            assert!((v - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn length_is_checked() {
        let radio = RadioConfig { m_samples: 4, ..RadioConfig::default() };
        let err = apply_channel(&[Complex64::new(0.0, 0.0); 3], &clean_link(0.0), &radio, &mut substream(0, &[]));
        assert!(matches!(err, Err(Error::LengthMismatch { expected: 4, actual: 3 })));
    }
}
