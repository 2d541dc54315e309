//! Simulation of federated spectrum sensing by a UAV swarm.
//!
//! Radar waveforms pass through an air-to-ground channel to every UAV; each
//! UAV trains a small 1-D CNN to decide whether a radar is transmitting, and
//! a server merges the local models with FedAvg or the SNR-weighted FedSNR.

pub mod channel;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod nn;
pub mod federated;
pub mod rng;
pub mod stats;
pub mod sweep;
pub mod waveform;

pub use config::{Aggregator, SimulationConfig};
pub use error::{Error, Result};
