//! Command-line front end.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{Aggregator, SimulationConfig};
use crate::error::{Error, Result};
use crate::federated::{aggregate, baseline_independent, headline_accuracy, run_experiment_with, ClientUpdate};
use crate::nn::{check_gradients, save_checkpoint, ModelWeights, TENSORS};
use crate::sweep::{export_csv, sweep_methods, write_csv, Axis, Method};

/// Environment variable that overrides `--seed`.
pub const SEED_ENV: &str = "FEDSENSE_SEED";

/// Largest relative gradient error `check` accepts.
pub const GRAD_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "fedsense", version, about = "Federated spectrum sensing with UAV swarms")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed (overridden by FEDSENSE_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    aggregator: Option<AggregatorArg>,
    /// Starting point for keys the configuration file leaves unset.
    #[arg(long, global = true, value_enum, default_value_t = Scale::Desk)]
    scale: Scale,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AggregatorArg {
    Fedavg,
    Fedsnr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scale {
    /// 40 settings, 8 UAVs, 128 windows of 512 samples.
    Desk,
    /// The full reference configuration.
    Full,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one federated experiment and print the accuracy of every round.
    Run {
        /// Also save the final global model.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Sweep one parameter over several seeds and write a CSV summary.
    Sweep {
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        values: Vec<f64>,
        /// Number of seeds, counted up from the master seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Comma-separated subset of baseline, fedavg, fedsnr.
        #[arg(long, value_delimiter = ',', default_value = "baseline,fedavg,fedsnr")]
        methods: Vec<String>,
    },
    /// Train every UAV alone on its data from all settings.
    Baseline,
    /// Run the finite-difference gradient suite and aggregator self-tests.
    Check {
        #[arg(long, default_value_t = 5)]
        seeds: u64,
    },
}

fn resolve_config(common: &Common) -> Result<SimulationConfig> {
    let base = match common.scale {
        Scale::Desk => SimulationConfig::desk(),
        Scale::Full => SimulationConfig::default(),
    };
    let mut cfg = match &common.config {
        Some(path) => SimulationConfig::parse_with_base(&std::fs::read_to_string(path)?, base)?,
        None => base,
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Ok(raw) = std::env::var(SEED_ENV) {
        cfg.seed = raw
            .trim()
            .parse()
            .map_err(|_| Error::validation("seed", format!("{SEED_ENV}=`{raw}` is not an unsigned integer")))?;
    }
    if let Some(a) = common.aggregator {
        cfg.aggregator = match a {
            AggregatorArg::Fedavg => Aggregator::FedAvg,
            AggregatorArg::Fedsnr => Aggregator::FedSnr,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn cmd_run(cfg: &SimulationConfig, out: &Option<PathBuf>, checkpoint: &Option<PathBuf>) -> Result<()> {
    let mut csv = match out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            writeln!(w, "round,aggregator,mean_accuracy")?;
            Some(w)
        }
        None => None,
    };
    let mut io_error = None;
    let (model, history) = run_experiment_with(cfg, |r| {
        println!("round {} {} mean_accuracy {:.6}", r.round, r.aggregator, r.mean_accuracy);
        if let Some(w) = csv.as_mut() {
            if let Err(e) = writeln!(w, "{},{},{:.6}", r.round, r.aggregator, r.mean_accuracy) {
                io_error.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = io_error {
        return Err(e.into());
    }
    if let Some(mut w) = csv {
        w.flush()?;
    }
    println!("headline_accuracy {:.6}", headline_accuracy(&history));
    if let Some(p) = checkpoint {
        save_checkpoint(p, &model)?;
    }
    Ok(())
}

fn cmd_sweep(cfg: &SimulationConfig, out: &Option<PathBuf>, axis: &str, values: &[f64], seeds: u64, methods: &[String]) -> Result<()> {
    let axis: Axis = axis.parse().map_err(|e: String| Error::validation("axis", e))?;
    let methods = methods
        .iter()
        .map(|m| m.parse::<Method>().map_err(|e| Error::validation("methods", e)))
        .collect::<Result<Vec<_>>>()?;
    if seeds == 0 {
        return Err(Error::validation("seeds", "at least one seed is required"));
    }
    let seed_list: Vec<u64> = (0..seeds).map(|k| cfg.seed.wrapping_add(k)).collect();
    let result = sweep_methods(cfg, axis, values, &seed_list, &methods, |done| {
        eprintln!("{}={} {} seed {}: {:.4}", axis, done.value, done.method, done.seed, done.accuracy);
    })?;
    match out {
        Some(p) => export_csv(&result, p),
        None => write_csv(&result, &mut std::io::stdout().lock()),
    }
}

fn cmd_baseline(cfg: &SimulationConfig, out: &Option<PathBuf>) -> Result<()> {
    let result = baseline_independent(cfg)?;
    let mut w = output(out)?;
    writeln!(w, "uav,accuracy")?;
    for (uav, acc) in result.accuracies.iter().enumerate() {
        writeln!(w, "{uav},{acc:.6}")?;
    }
    w.flush()?;
    println!("baseline mean_accuracy {:.6}", result.mean_accuracy);
    Ok(())
}

/// Returns whether every check passed.
fn cmd_check(seeds: u64) -> Result<bool> {
    let mut ok = true;
    for seed in 0..seeds {
        let report = check_gradients(32, 1, seed, 1e-3)?;
        let worst = report.max_rel_error();
        let pass = worst < GRAD_TOLERANCE;
        ok &= pass;
        println!(
            "gradient seed {seed}: {} components, max relative error {worst:.3e} {}",
            report.checked(),
            if pass { "ok" } else { "FAILED" }
        );
    }

    let probe = |value: f32, n: usize, snr: f64| {
        let mut w = ModelWeights::zeros(8);
        for t in 0..TENSORS.len() {
            w.tensor_mut(t).iter_mut().for_each(|v| *v = value);
        }
        ClientUpdate { weights: w, sample_count: n, snr_linear: snr }
    };
    let avg = aggregate(&[probe(1.0, 1, 1.0), probe(3.0, 3, 1.0)], Aggregator::FedAvg)?;
    let snr = aggregate(&[probe(0.0, 1, 1.0), probe(1.0, 1, 3.0)], Aggregator::FedSnr)?;
    let agg_ok = avg.tensor(0)[0] == 2.5 && snr.tensor(0)[0] == 0.75;
    ok &= agg_ok;
    println!("aggregator probes: {}", if agg_ok { "ok" } else { "FAILED" });
    Ok(ok)
}

/// Parses `argv` (program name first) and runs the command. Returns the
/// process exit code: 0 on success, 1 on a usage error, 2 when the command
/// fails.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = resolve_config(&cli.common).and_then(|cfg| match &cli.command {
        Command::Run { checkpoint } => cmd_run(&cfg, &cli.common.out, checkpoint).map(|_| true),
        Command::Sweep { axis, values, seeds, methods } => {
            cmd_sweep(&cfg, &cli.common.out, axis, values, *seeds, methods).map(|_| true)
        }
        Command::Baseline => cmd_baseline(&cfg, &cli.common.out).map(|_| true),
        Command::Check { seeds } => cmd_check(*seeds),
    });
    match outcome {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(Error::Validation { key, reason }) if matches!(key, "axis" | "methods") => {
            eprintln!("error: invalid {key}: {reason}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
