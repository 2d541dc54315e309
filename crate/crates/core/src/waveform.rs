//! Baseband radar waveforms, normalized to unit average power.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub const BARKER_13: [i8; 13] = [1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WaveformKind {
    Cw,
    Fmcw,
    Pulse,
    Chirp,
    PhaseCoded,
}

impl WaveformKind {
    pub const ALL: [WaveformKind; 5] = [
        WaveformKind::Cw,
        WaveformKind::Fmcw,
        WaveformKind::Pulse,
        WaveformKind::Chirp,
        WaveformKind::PhaseCoded,
    ];
}

/// Binary phase code applied chip by chip (+1 → 0 rad, -1 → π rad).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseCode {
    Barker13,
    Random([i8; 13]),
}

impl PhaseCode {
    pub fn chips(&self) -> &[i8; 13] {
        match self {
            PhaseCode::Barker13 => &BARKER_13,
            PhaseCode::Random(c) => c,
        }
    }
}

/// Waveform family with its parameters. Frequencies are baseband offsets in
/// Hz; periods and chip lengths are in samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WaveformSpec {
    Cw {
        offset_hz: f64,
    },
    /// Repeating sawtooth sweep of `bandwidth_hz` centred on `offset_hz`.
    Fmcw {
        offset_hz: f64,
        bandwidth_hz: f64,
        period: usize,
    },
    /// Rectangular CW bursts, on for the first `duty` fraction of each period.
    Pulse {
        offset_hz: f64,
        period: usize,
        duty: f64,
    },
    /// One linear sweep across the whole window.
    Chirp {
        offset_hz: f64,
        bandwidth_hz: f64,
    },
    PhaseCoded {
        offset_hz: f64,
        chip_len: usize,
        code: PhaseCode,
    },
}

impl WaveformSpec {
    pub fn kind(&self) -> WaveformKind {
        match self {
            WaveformSpec::Cw { .. } => WaveformKind::Cw,
            WaveformSpec::Fmcw { .. } => WaveformKind::Fmcw,
            WaveformSpec::Pulse { .. } => WaveformKind::Pulse,
            WaveformSpec::Chirp { .. } => WaveformKind::Chirp,
            WaveformSpec::PhaseCoded { .. } => WaveformKind::PhaseCoded,
        }
    }

    /// Lowest and highest instantaneous frequency of the waveform.
    pub fn frequency_span(&self) -> (f64, f64) {
        match *self {
            WaveformSpec::Cw { offset_hz }
            | WaveformSpec::Pulse { offset_hz, .. }
            | WaveformSpec::PhaseCoded { offset_hz, .. } => (offset_hz, offset_hz),
            WaveformSpec::Fmcw { offset_hz, bandwidth_hz, .. }
            | WaveformSpec::Chirp { offset_hz, bandwidth_hz } => {
                (offset_hz - bandwidth_hz / 2.0, offset_hz + bandwidth_hz / 2.0)
            }
        }
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        let (lo, hi) = self.frequency_span();
        let nyquist = fs / 2.0;
        if !(lo > -nyquist && hi < nyquist) {
            return Err(Error::validation(
                "waveform",
                format!("band [{lo}, {hi}] Hz leaves (-{nyquist}, {nyquist})"),
            ));
        }
        match *self {
            WaveformSpec::Pulse { duty, period, .. } if !(duty > 0.0 && duty <= 1.0) || period == 0 => {
                Err(Error::validation("waveform", format!("pulse duty {duty}, period {period}")))
            }
            WaveformSpec::Fmcw { period: 0, .. } => Err(Error::validation("waveform", "zero FMCW period")),
            WaveformSpec::PhaseCoded { chip_len: 0, .. } => {
                Err(Error::validation("waveform", "zero chip length"))
            }
            _ => Ok(()),
        }
    }
}

/// Draws a waveform family uniformly and its parameters from fixed ranges
/// scaled to the window length `m` and sampling rate `fs`.
pub fn random_spec<R: Rng + ?Sized>(m: usize, fs: f64, rng: &mut R) -> WaveformSpec {
    let kind = WaveformKind::ALL[rng.random_range(0..WaveformKind::ALL.len())];
    let offset_hz = rng.random_range(-fs / 4.0..=fs / 4.0);
    let bandwidth = |rng: &mut R| rng.random_range(fs / 20.0..=fs / 4.0);
    let samples = |rng: &mut R, lo: usize, hi: usize| rng.random_range(lo.max(1)..=hi.max(lo).max(1));
    match kind {
        WaveformKind::Cw => WaveformSpec::Cw { offset_hz },
        WaveformKind::Fmcw => WaveformSpec::Fmcw {
            offset_hz,
            bandwidth_hz: bandwidth(rng),
            period: samples(rng, m / 8, m / 2),
        },
        WaveformKind::Pulse => WaveformSpec::Pulse {
            offset_hz,
            period: samples(rng, m / 10, m / 2),
            duty: rng.random_range(0.5..1.0),
        },
        WaveformKind::Chirp => WaveformSpec::Chirp {
            offset_hz,
            bandwidth_hz: bandwidth(rng),
        },
        WaveformKind::PhaseCoded => {
            let code = if rng.random::<bool>() {
                PhaseCode::Barker13
            } else {
                let mut c = [0i8; 13];
                c.iter_mut().for_each(|x| *x = if rng.random::<bool>() { 1 } else { -1 });
                PhaseCode::Random(c)
            };
            WaveformSpec::PhaseCoded {
                offset_hz,
                chip_len: rng.random_range(10..=100),
                code,
            }
        }
    }
}

/// Samples `m` points of the waveform at rate `fs`, scaled to unit average power.
pub fn synthesize(spec: &WaveformSpec, m: usize, fs: f64) -> Vec<Complex64> {
    let tone = |f: f64, n: usize| Complex64::from_polar(1.0, 2.0 * PI * f * n as f64 / fs);
    let sweep = |f0: f64, bw: f64, n: usize, period: usize| {
        let t = n as f64 / fs;
        let rate = bw / (period as f64 / fs);
        Complex64::from_polar(1.0, 2.0 * PI * ((f0 - bw / 2.0) * t + 0.5 * rate * t * t))
    };
    let raw: Vec<Complex64> = match *spec {
        WaveformSpec::Cw { offset_hz } => (0..m).map(|n| tone(offset_hz, n)).collect(),
        WaveformSpec::Fmcw { offset_hz, bandwidth_hz, period } => (0..m)
            .map(|n| sweep(offset_hz, bandwidth_hz, n % period, period))
            .collect(),
        WaveformSpec::Pulse { offset_hz, period, duty } => {
            let on = ((duty * period as f64).ceil() as usize).clamp(1, period);
            (0..m)
                .map(|n| if n % period < on { tone(offset_hz, n) } else { Complex64::new(0.0, 0.0) })
                .collect()
        }
        WaveformSpec::Chirp { offset_hz, bandwidth_hz } => {
            (0..m).map(|n| sweep(offset_hz, bandwidth_hz, n, m)).collect()
        }
        WaveformSpec::PhaseCoded { offset_hz, chip_len, code } => {
            let chips = code.chips();
            (0..m)
                .map(|n| tone(offset_hz, n) * f64::from(chips[(n / chip_len) % chips.len()]))
                .collect()
        }
    };
    normalize(raw)
}

fn normalize(mut s: Vec<Complex64>) -> Vec<Complex64> {
    let power = s.iter().map(|c| c.norm_sqr()).sum::<f64>() / s.len().max(1) as f64;
    if power > 0.0 {
        let scale = power.sqrt().recip();
        s.iter_mut().for_each(|c| *c *= scale);
    }
    s
}
