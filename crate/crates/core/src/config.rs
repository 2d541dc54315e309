//! Simulation configuration and its `key = value` text format.
//!
//! Unset keys keep their defaults, `#` starts a comment, and blank lines are
//! ignored. [`SimulationConfig::to_config_string`] writes every key, and
//! parsing that output reproduces the configuration exactly.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::channel::{PathLossParams, RadioConfig};
use crate::error::{Error, Result};
use crate::geometry::{Bounds, DEFAULT_PACKING_BUDGET};
use crate::nn::TrainParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Aggregator {
    FedAvg,
    FedSnr,
}

impl Aggregator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Aggregator::FedAvg => "fedavg",
            Aggregator::FedSnr => "fedsnr",
        }
    }
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Aggregator {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "fedavg" => Ok(Aggregator::FedAvg),
            "fedsnr" => Ok(Aggregator::FedSnr),
            other => Err(format!("unknown aggregator `{other}` (expected fedavg or fedsnr)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub settings: usize,
    pub data_per_uav: usize,
    pub num_uavs: usize,
    pub rician_k: f64,
    pub ptx_dbm: f64,
    pub n0_dbm: f64,
    pub signal_len: usize,
    pub fs_hz: f64,
    pub fc_hz: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub z_max: f64,
    pub z_radar: f64,
    pub d_min: f64,
    pub v_max: f64,
    pub alpha: f64,
    pub theta0: f64,
    pub beta: f64,
    pub zeta: f64,
    pub nu0: f64,
    pub eta: f64,
    pub sigma0: f64,

    /// Probability that a sensing window contains the radar signal.
    pub p_h1: f64,
    /// Held-out test windows per UAV, as a fraction of `data_per_uav`.
    pub test_fraction: f64,
    /// Per-UAV noise floor offsets in dB, by UAV index; missing entries are 0.
    pub n0_offsets_db: Vec<f64>,
    /// Power that maps to unit IQ amplitude in the network input. `None`
    /// uses the nominal noise floor `n0_dbm`.
    pub iq_reference_dbm: Option<f64>,
    pub packing_budget: usize,

    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub bn_momentum: f64,
    /// Re-estimate batch-norm statistics on a UAV's own training windows
    /// before it senses with a model it received or trained.
    pub bn_calibration: bool,

    pub aggregator: Aggregator,
    /// Re-initialize client models every round instead of warm-starting from
    /// the global model. Debug aid only.
    pub fresh_init: bool,
    pub seed: u64,
    pub repeats: usize,
}

impl Default for SimulationConfig {
    /// Full-scale parameters (the bold defaults of the reference setup).
    fn default() -> Self {
        let radio = RadioConfig::default();
        let pl = PathLossParams::default();
        let train = TrainParams::default();
        Self {
            settings: 500,
            data_per_uav: 256,
            num_uavs: 16,
            rician_k: radio.k_rician,
            ptx_dbm: radio.ptx_dbm,
            n0_dbm: radio.n0_dbm,
            signal_len: radio.m_samples,
            fs_hz: radio.fs_hz,
            fc_hz: radio.fc_hz,
            x_max: 5000.0,
            y_max: 5000.0,
            z_max: 120.0,
            z_radar: 40.0,
            d_min: 100.0,
            v_max: radio.vmax_mps,
            alpha: pl.alpha,
            theta0: pl.theta0,
            beta: pl.beta,
            zeta: pl.zeta,
            nu0: pl.nu0,
            eta: pl.eta,
            sigma0: pl.sigma0,
            p_h1: 0.5,
            test_fraction: 0.25,
            n0_offsets_db: Vec::new(),
            iq_reference_dbm: None,
            packing_budget: DEFAULT_PACKING_BUDGET,
            learning_rate: train.learning_rate,
            adam_beta1: train.beta1,
            adam_beta2: train.beta2,
            adam_eps: train.eps,
            batch_size: train.batch_size,
            max_epochs: train.max_epochs,
            patience: train.patience,
            min_delta: train.min_delta,
            bn_momentum: train.bn_momentum,
            bn_calibration: true,
            aggregator: Aggregator::FedSnr,
            fresh_init: false,
            seed: 0,
            repeats: 1,
        }
    }
}

/// Local epochs per round in the desk-scale preset.
pub const DESK_LOCAL_EPOCHS: usize = 2;

impl SimulationConfig {
    /// Reduced-cost preset: 40 settings, 8 UAVs, 128 windows of 512 samples.
    /// The sampling rate shrinks with the window so each window still spans
    /// 10 µs.
    pub fn desk() -> Self {
        Self {
            settings: 40,
            num_uavs: 8,
            data_per_uav: 128,
            signal_len: 512,
            fs_hz: 51.2e6,
            max_epochs: DESK_LOCAL_EPOCHS,
            ..Self::default()
        }
    }

    pub fn radio(&self) -> RadioConfig {
        RadioConfig {
            ptx_dbm: self.ptx_dbm,
            n0_dbm: self.n0_dbm,
            fc_hz: self.fc_hz,
            fs_hz: self.fs_hz,
            m_samples: self.signal_len,
            k_rician: self.rician_k,
            vmax_mps: self.v_max,
        }
    }

    pub fn path_loss(&self) -> PathLossParams {
        PathLossParams {
            alpha: self.alpha,
            beta: self.beta,
            theta0: self.theta0,
            zeta: self.zeta,
            nu0: self.nu0,
            eta: self.eta,
            sigma0: self.sigma0,
        }
    }

    pub fn bounds(&self) -> Bounds {
        Bounds::new(self.x_max, self.y_max, self.z_max)
    }

    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            min_delta: self.min_delta,
            bn_momentum: self.bn_momentum,
        }
    }

    pub fn test_per_uav(&self) -> usize {
        (self.data_per_uav as f64 * self.test_fraction).round() as usize
    }

    pub fn n0_offset_db(&self, uav: usize) -> f64 {
        self.n0_offsets_db.get(uav).copied().unwrap_or(0.0)
    }

    /// Factor applied to physical IQ samples (√W) to form network inputs.
    pub fn iq_scale(&self) -> f64 {
        let reference = self.iq_reference_dbm.unwrap_or(self.n0_dbm);
        crate::channel::dbm_to_watts(reference).sqrt().recip()
    }

    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, key: &'static str, reason: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::validation(key, reason))
            }
        }
        check(self.settings >= 1, "settings", "must be at least 1")?;
        check(self.data_per_uav >= 1, "data_per_uav", "must be at least 1")?;
        check(self.num_uavs >= 1, "num_uavs", "must be at least 1")?;
        check(self.rician_k >= 0.0 && self.rician_k.is_finite(), "rician_k", "must be finite and >= 0")?;
        for (key, v) in [
            ("ptx_dbm", self.ptx_dbm),
            ("n0_dbm", self.n0_dbm),
            ("theta0", self.theta0),
            ("beta", self.beta),
            ("nu0", self.nu0),
            ("eta", self.eta),
            ("sigma0", self.sigma0),
        ] {
            check(v.is_finite(), key, "must be finite")?;
        }
        check(self.signal_len >= 4, "signal_len", "must be at least 4")?;
        check(self.fs_hz > 0.0 && self.fs_hz.is_finite(), "fs_hz", "must be positive")?;
        check(self.fc_hz > 0.0 && self.fc_hz.is_finite(), "fc_hz", "must be positive")?;
        for (key, v) in [("x_max", self.x_max), ("y_max", self.y_max), ("z_max", self.z_max)] {
            check(v >= 0.0 && v.is_finite(), key, "must be finite and >= 0")?;
        }
        check(self.z_radar >= 0.0 && self.z_radar.is_finite(), "z_radar", "must be finite and >= 0")?;
        check(self.d_min > 0.0 && self.d_min.is_finite(), "d_min", "must be positive")?;
        check(self.v_max >= 0.0 && self.v_max.is_finite(), "v_max", "must be finite and >= 0")?;
        check(self.alpha > 0.0 && self.alpha.is_finite(), "alpha", "must be positive")?;
        check(self.zeta != 0.0 && self.zeta.is_finite(), "zeta", "must be non-zero")?;
        check((0.0..=1.0).contains(&self.p_h1), "p_h1", "must lie in [0, 1]")?;
        check(
            self.test_fraction > 0.0 && self.test_fraction.is_finite() && self.test_per_uav() >= 1,
            "test_fraction",
            "must leave at least one test window per UAV",
        )?;
        check(self.n0_offsets_db.iter().all(|v| v.is_finite()), "n0_offsets_db", "must be finite")?;
        check(
            self.iq_reference_dbm.is_none_or(f64::is_finite),
            "iq_reference_dbm",
            "must be finite",
        )?;
        check(self.packing_budget >= 1, "packing_budget", "must be at least 1")?;
        check(self.learning_rate > 0.0 && self.learning_rate.is_finite(), "learning_rate", "must be positive")?;
        check((0.0..1.0).contains(&self.adam_beta1), "adam_beta1", "must lie in [0, 1)")?;
        check((0.0..1.0).contains(&self.adam_beta2), "adam_beta2", "must lie in [0, 1)")?;
        check(self.adam_eps > 0.0, "adam_eps", "must be positive")?;
        check(self.batch_size >= 1, "batch_size", "must be at least 1")?;
        check(self.max_epochs <= 20, "max_epochs", "must not exceed 20")?;
        check(self.min_delta >= 0.0, "min_delta", "must be >= 0")?;
        check((0.0..1.0).contains(&self.bn_momentum), "bn_momentum", "must lie in [0, 1)")?;
        check(self.repeats >= 1, "repeats", "must be at least 1")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_with_base(&std::fs::read_to_string(path)?, Self::default())
    }

    /// Parses a document on top of the full-scale defaults.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_base(text, Self::default())
    }

    /// Parses a document, starting from `base` for unset keys.
    pub fn parse_with_base(text: &str, base: Self) -> Result<Self> {
        let mut cfg = base;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|message| Error::Parse { line, message })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(key: &str, v: &str) -> std::result::Result<T, String>
        where
            T::Err: fmt::Display,
        {
            v.parse::<T>().map_err(|e| format!("{key}: cannot parse `{v}`: {e}"))
        }
        macro_rules! assign {
            ($($name:ident),* $(,)?) => {
                match key {
                    $(stringify!($name) => { self.$name = num(key, value)?; return Ok(()); })*
                    _ => {}
                }
            };
        }
        assign!(
            settings, data_per_uav, num_uavs, rician_k, ptx_dbm, n0_dbm, signal_len, fs_hz, fc_hz,
            x_max, y_max, z_max, z_radar, d_min, v_max, alpha, theta0, beta, zeta, nu0, eta, sigma0,
            p_h1, test_fraction, packing_budget, learning_rate, adam_beta1, adam_beta2, adam_eps,
            batch_size, max_epochs, patience, min_delta, bn_momentum, bn_calibration, fresh_init, seed,
            repeats,
        );
        match key {
            "aggregator" => self.aggregator = value.parse()?,
            "iq_reference_dbm" => {
                self.iq_reference_dbm = match value {
                    "" | "none" => None,
                    v => Some(num(key, v)?),
                }
            }
            "n0_offsets_db" => {
                self.n0_offsets_db = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| num(key, s))
                    .collect::<std::result::Result<_, _>>()?
            }
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        macro_rules! emit {
            ($($name:ident),* $(,)?) => {
                $( let _ = writeln!(out, "{} = {}", stringify!($name), self.$name); )*
            };
        }
        emit!(
            settings, data_per_uav, num_uavs, rician_k, ptx_dbm, n0_dbm, signal_len, fs_hz, fc_hz,
            x_max, y_max, z_max, z_radar, d_min, v_max, alpha, theta0, beta, zeta, nu0, eta, sigma0,
            p_h1, test_fraction, packing_budget, learning_rate, adam_beta1, adam_beta2, adam_eps,
            batch_size, max_epochs, patience, min_delta, bn_momentum, bn_calibration, aggregator,
            fresh_init, seed, repeats,
        );
        let offsets: Vec<String> = self.n0_offsets_db.iter().map(f64::to_string).collect();
        let _ = writeln!(out, "n0_offsets_db = {}", offsets.join(", "));
        let reference = self.iq_reference_dbm.map_or("none".to_string(), |v| v.to_string());
        let _ = writeln!(out, "iq_reference_dbm = {reference}");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_document_gives_reference_defaults() {
        let cfg = SimulationConfig::parse("").unwrap();
        assert_eq!(cfg.num_uavs, 16);
        assert_eq!(cfg.data_per_uav, 256);
        assert_eq!(cfg.rician_k, 10.0);
        assert_eq!(cfg.ptx_dbm, 5.0);
        assert_eq!(cfg.n0_dbm, -93.0);
        assert_eq!(cfg.signal_len, 3000);
        assert_eq!(cfg.fs_hz, 300e6);
        assert_eq!(cfg.fc_hz, 10e9);
        assert_eq!(cfg.settings, 500);
        assert_eq!((cfg.x_max, cfg.y_max, cfg.z_max, cfg.z_radar), (5000.0, 5000.0, 120.0, 40.0));
        assert_eq!((cfg.d_min, cfg.v_max), (100.0, 44.0));
        assert_eq!(
            (cfg.alpha, cfg.theta0, cfg.beta, cfg.zeta, cfg.nu0, cfg.eta, cfg.sigma0),
            (3.04, -3.61, -23.29, 4.14, 20.70, -0.41, 5.86)
        );
        assert_eq!(cfg.max_epochs, 20);
    }

    #[test]
    fn desk_keeps_the_sensing_interval() {
        let full = SimulationConfig::default();
        let desk = SimulationConfig::desk();
        let window = |c: &SimulationConfig| c.signal_len as f64 / c.fs_hz;
        assert!((window(&full) - 10e-6).abs() < 1e-15);
        assert!((window(&desk) - 10e-6).abs() < 1e-15);
        desk.validate().unwrap();
    }

    #[test]
    fn invalid_values_are_named() {
        match SimulationConfig::parse("d_min = -1").unwrap_err() {
            Error::Validation { key, .. } => assert_eq!(key, "d_min"),
            e => panic!("{e}"),
        }
        match SimulationConfig::parse("# header\n\nnum_uavs = 4\nbogus = 1\n").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            e => panic!("{e}"),
        }
        match SimulationConfig::parse("num_uavs: 4").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            e => panic!("{e}"),
        }
        assert!(matches!(SimulationConfig::parse("num_uavs = four"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn parses_lists_options_and_comments() {
        let cfg = SimulationConfig::parse(
            "aggregator = FedAvg  # trailing\nn0_offsets_db = 1.5, -2\niq_reference_dbm = -90\nfresh_init = true",
        )
        .unwrap();
        assert_eq!(cfg.aggregator, Aggregator::FedAvg);
        assert_eq!(cfg.n0_offsets_db, vec![1.5, -2.0]);
        assert_eq!(cfg.n0_offset_db(1), -2.0);
        assert_eq!(cfg.n0_offset_db(7), 0.0);
        assert_eq!(cfg.iq_reference_dbm, Some(-90.0));
        assert!(cfg.fresh_init);
    }

    #[test]
    fn desk_round_trips() {
        let desk = SimulationConfig::desk();
        let text = desk.to_config_string();
        assert_eq!(SimulationConfig::parse(&text).unwrap(), desk);
    }

    proptest! {
        #[test]
        fn serialize_parse_is_identity(
            ptx in -50.0..50.0f64,
            k in 0.0..1e3f64,
            n in 1usize..64,
            lr in 1e-6..1e-1f64,
            seed in any::<u64>(),
            offsets in proptest::collection::vec(-10.0..10.0f64, 0..5),
            reference in proptest::option::of(-120.0..-60.0f64),
            fedavg in any::<bool>(),
        ) {
            let cfg = SimulationConfig {
                ptx_dbm: ptx,
                rician_k: k,
                num_uavs: n,
                learning_rate: lr,
                seed,
                n0_offsets_db: offsets,
                iq_reference_dbm: reference,
                aggregator: if fedavg { Aggregator::FedAvg } else { Aggregator::FedSnr },
                ..SimulationConfig::desk()
            };
            prop_assert_eq!(SimulationConfig::parse(&cfg.to_config_string()).unwrap(), cfg);
        }
    }
}
