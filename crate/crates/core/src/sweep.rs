//! Parameter sweeps over seeds, with Student-t intervals and CSV export.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::{Aggregator, SimulationConfig};
use crate::error::{Error, Result};
use crate::federated::{baseline_independent, headline_accuracy, run_experiment};
use crate::stats::{ci95_half_width, mean};

/// Parameters a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Ptx,
    NumUavs,
    RicianK,
    DataPerUav,
}

impl Axis {
    pub const ALL: [Axis; 4] = [Axis::Ptx, Axis::NumUavs, Axis::RicianK, Axis::DataPerUav];

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Ptx => "ptx",
            Axis::NumUavs => "num_uavs",
            Axis::RicianK => "rician_k",
            Axis::DataPerUav => "data_per_uav",
        }
    }

    /// Copy of `cfg` with this parameter set to `value`.
    pub fn apply(self, cfg: &SimulationConfig, value: f64) -> Result<SimulationConfig> {
        let mut out = cfg.clone();
        let count = |key: &'static str| -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(Error::validation(key, format!("{value} is not a positive integer")))
            }
        };
        match self {
            Axis::Ptx => out.ptx_dbm = value,
            Axis::NumUavs => out.num_uavs = count("num_uavs")?,
            Axis::RicianK => out.rician_k = value,
            Axis::DataPerUav => out.data_per_uav = count("data_per_uav")?,
        }
        out.validate()?;
        Ok(out)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Axis::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown axis `{s}` (expected ptx, num_uavs, rician_k or data_per_uav)"))
    }
}

/// Training schemes compared in a sweep. The order is the CSV row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Baseline,
    FedAvg,
    FedSnr,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Baseline, Method::FedAvg, Method::FedSnr];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::FedAvg => "fedavg",
            Method::FedSnr => "fedsnr",
        }
    }

    /// Headline accuracy of one configuration.
    pub fn run(self, cfg: &SimulationConfig) -> Result<f64> {
        let federated = |rule: Aggregator| -> Result<f64> {
            let cfg = SimulationConfig { aggregator: rule, ..cfg.clone() };
            Ok(headline_accuracy(&run_experiment(&cfg)?))
        };
        match self {
            Method::Baseline => Ok(baseline_independent(cfg)?.mean_accuracy),
            Method::FedAvg => federated(Aggregator::FedAvg),
            Method::FedSnr => federated(Aggregator::FedSnr),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method `{s}` (expected baseline, fedavg or fedsnr)"))
    }
}

/// Accuracy of one (value, method) cell across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub value: f64,
    pub method: Method,
    /// One headline accuracy per seed, in seed order.
    pub accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub ci95: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn cell(&self, value: f64, method: Method) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.value == value && c.method == method)
    }
}

/// Progress notice for one finished run.
#[derive(Debug, Clone, Copy)]
pub struct RunDone {
    pub value: f64,
    pub method: Method,
    pub seed: u64,
    pub accuracy: f64,
}

/// Runs every method at every value for every seed.
pub fn sweep(cfg: &SimulationConfig, axis: Axis, values: &[f64], seeds: &[u64]) -> Result<SweepResult> {
    sweep_methods(cfg, axis, values, seeds, &Method::ALL, |_| {})
}

/// Like [`sweep`] for a subset of methods, reporting each finished run.
/// Runs may execute in parallel; the result does not depend on their order.
pub fn sweep_methods(
    cfg: &SimulationConfig,
    axis: Axis,
    values: &[f64],
    seeds: &[u64],
    methods: &[Method],
    on_run: impl Fn(RunDone) + Sync,
) -> Result<SweepResult> {
    if seeds.is_empty() {
        return Err(Error::validation("seeds", "at least one seed is required"));
    }
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    let mut jobs = Vec::new();
    for &value in values {
        let base = axis.apply(cfg, value)?;
        for &method in &methods {
            for &seed in seeds {
                jobs.push((value, method, seed, SimulationConfig { seed, ..base.clone() }));
            }
        }
    }
    let accuracies = jobs
        .par_iter()
        .map(|(value, method, seed, run_cfg)| {
            let accuracy = method.run(run_cfg)?;
            on_run(RunDone { value: *value, method: *method, seed: *seed, accuracy });
            Ok(accuracy)
        })
        .collect::<Result<Vec<f64>>>()?;
    let cells = accuracies
        .chunks(seeds.len())
        .zip(jobs.chunks(seeds.len()))
        .map(|(accs, group)| SweepCell {
            value: group[0].0,
            method: group[0].1,
            accuracies: accs.to_vec(),
            mean_accuracy: mean(accs),
            ci95: ci95_half_width(accs),
        })
        .collect();
    Ok(SweepResult { axis, values: values.to_vec(), seeds: seeds.to_vec(), cells })
}

/// Header `axis,value,method,mean_accuracy,ci95,seeds`; numbers carry six
/// decimals, the last column counts seeds, rows are ordered by value and
/// then method.
pub fn write_csv<W: Write>(result: &SweepResult, w: &mut W) -> Result<()> {
    writeln!(w, "axis,value,method,mean_accuracy,ci95,seeds")?;
    let mut rows: Vec<&SweepCell> = result.cells.iter().collect();
    rows.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.method.cmp(&b.method)));
    for c in rows {
        writeln!(
            w,
            "{},{:.6},{},{:.6},{:.6},{}",
            result.axis,
            c.value,
            c.method,
            c.mean_accuracy,
            c.ci95,
            c.accuracies.len()
        )?;
    }
    Ok(())
}

pub fn export_csv(result: &SweepResult, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv(result, &mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(value: f64, method: Method, accs: &[f64]) -> SweepCell {
        SweepCell {
            value,
            method,
            accuracies: accs.to_vec(),
            mean_accuracy: mean(accs),
            ci95: ci95_half_width(accs),
        }
    }

    fn csv(r: &SweepResult) -> String {
        let mut buf = Vec::new();
        write_csv(r, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn golden_csv() {
        let r = SweepResult {
            axis: Axis::Ptx,
            values: vec![5.0, -5.0],
            seeds: vec![0, 1],
            cells: vec![
                cell(5.0, Method::FedSnr, &[0.9, 0.8]),
                cell(-5.0, Method::FedAvg, &[0.5, 0.7]),
                cell(5.0, Method::Baseline, &[0.25, 0.25]),
                cell(-5.0, Method::FedSnr, &[0.6, 0.6]),
            ],
        };
        let expected = "axis,value,method,mean_accuracy,ci95,seeds\n\
            ptx,-5.000000,fedavg,0.600000,1.270620,2\n\
            ptx,-5.000000,fedsnr,0.600000,0.000000,2\n\
            ptx,5.000000,baseline,0.250000,0.000000,2\n\
            ptx,5.000000,fedsnr,0.850000,0.635310,2\n";
        assert_eq!(csv(&r), expected);
        assert_eq!(csv(&r), csv(&r));
    }

    #[test]
    fn empty_grid_is_header_only() {
        let r = SweepResult { axis: Axis::NumUavs, values: vec![], seeds: vec![0], cells: vec![] };
        assert_eq!(csv(&r), "axis,value,method,mean_accuracy,ci95,seeds\n");
    }

    #[test]
    fn names_round_trip() {
        for a in Axis::ALL {
            assert_eq!(a.as_str().parse::<Axis>().unwrap(), a);
        }
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("power".parse::<Axis>().is_err());
    }

    #[test]
    fn axis_application() {
        let cfg = SimulationConfig::desk();
        assert_eq!(Axis::NumUavs.apply(&cfg, 4.0).unwrap().num_uavs, 4);
        assert_eq!(Axis::Ptx.apply(&cfg, -5.0).unwrap().ptx_dbm, -5.0);
        assert!(Axis::DataPerUav.apply(&cfg, 2.5).is_err());
        assert!(Axis::RicianK.apply(&cfg, -1.0).is_err());
    }
}
