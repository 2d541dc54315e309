//! Labeled sensing windows for each UAV.
//!
//! A window is either pure receiver noise (label 0) or a random radar
//! waveform passed through the UAV's link plus noise (label 1). Each window
//! is packed as a 2×M matrix whose first row is the in-phase part and whose
//! second row is the quadrature part.
//!
//! Every window is drawn from its own stream keyed by
//! `(seed, setting, uav, split, index)`, so any window can be regenerated on
//! its own and datasets do not depend on generation order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{apply_channel, ChannelRealization, RadioConfig};
use crate::config::SimulationConfig;
use crate::error::{Error, Result};
use crate::geometry::SceneGeometry;
use crate::rng::{self, substream};
use crate::waveform::{random_spec, synthesize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    Absent,
    Present,
}

impl Hypothesis {
    pub fn label(self) -> u8 {
        match self {
            Hypothesis::Absent => 0,
            Hypothesis::Present => 1,
        }
    }
}

/// One sensing window: `x` holds `[Re(y[0..M]), Im(y[0..M])]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: Vec<f32>,
    pub label: u8,
}

impl Example {
    pub fn from_samples(y: &[Complex64], scale: f64, label: u8) -> Self {
        let mut x = Vec::with_capacity(2 * y.len());
        x.extend(y.iter().map(|c| (c.re * scale) as f32));
        x.extend(y.iter().map(|c| (c.im * scale) as f32));
        Self { x, label }
    }

    pub fn signal_len(&self) -> usize {
        self.x.len() / 2
    }

    pub fn real(&self) -> &[f32] {
        &self.x[..self.signal_len()]
    }

    pub fn imag(&self) -> &[f32] {
        &self.x[self.signal_len()..]
    }

    /// Mean of `Re² + Im²` over the window.
    pub fn power(&self) -> f64 {
        self.x.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>() / self.signal_len() as f64
    }

    pub fn is_well_formed(&self, m: usize) -> bool {
        self.x.len() == 2 * m && self.label <= 1 && self.x.iter().all(|v| v.is_finite())
    }
}

/// One UAV's training and held-out windows for a setting.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientDataset {
    pub uav_index: usize,
    pub train: Vec<Example>,
    pub test: Vec<Example>,
    /// Linear SNR of the faded signal for this setting (used by FedSNR).
    pub snr_linear: f64,
    /// Number of training windows (used by FedAvg).
    pub sample_count: usize,
}

/// Geometry plus per-UAV link realizations for one setting.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub setting: usize,
    pub geometry: SceneGeometry,
    pub channels: Vec<ChannelRealization>,
}

impl Scene {
    pub fn generate(cfg: &SimulationConfig, setting: usize) -> Result<Self> {
        let mut geo_rng = substream(cfg.seed, &[rng::SCENE, setting as u64]);
        let geometry = SceneGeometry::generate(
            cfg.num_uavs,
            cfg.d_min,
            cfg.bounds(),
            cfg.z_radar,
            cfg.packing_budget,
            &mut geo_rng,
        )?;
        let params = cfg.path_loss();
        let radio = cfg.radio();
        let channels = geometry
            .distances
            .iter()
            .zip(&geometry.elevations)
            .enumerate()
            .map(|(uav, (&d, &theta))| {
                let mut r = substream(cfg.seed, &[rng::CHANNEL, setting as u64, uav as u64]);
                ChannelRealization::draw(d, theta, &params, &radio, cfg.n0_offset_db(uav), &mut r)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            setting,
            geometry,
            channels,
        })
    }

    pub fn num_uavs(&self) -> usize {
        self.channels.len()
    }
}

/// Generates one window under hypothesis `h`, in physical units (√W).
pub fn make_example_for<R: Rng + ?Sized>(
    h: Hypothesis,
    ch: &ChannelRealization,
    radio: &RadioConfig,
    rng: &mut R,
) -> Result<Example> {
    make_scaled(h, ch, radio, 1.0, rng)
}

/// Generates one window, present with probability `p_h1`, in physical units.
pub fn make_example<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    radio: &RadioConfig,
    p_h1: f64,
    rng: &mut R,
) -> Result<Example> {
    let h = draw_hypothesis(p_h1, rng);
    make_scaled(h, ch, radio, 1.0, rng)
}

fn draw_hypothesis<R: Rng + ?Sized>(p_h1: f64, rng: &mut R) -> Hypothesis {
    if rng.random::<f64>() < p_h1 {
        Hypothesis::Present
    } else {
        Hypothesis::Absent
    }
}

fn make_scaled<R: Rng + ?Sized>(
    h: Hypothesis,
    ch: &ChannelRealization,
    radio: &RadioConfig,
    scale: f64,
    rng: &mut R,
) -> Result<Example> {
    let m = radio.m_samples;
    let s = match h {
        Hypothesis::Present => synthesize(&random_spec(m, radio.fs_hz, rng), m, radio.fs_hz),
        Hypothesis::Absent => vec![Complex64::new(0.0, 0.0); m],
    };
    let y = apply_channel(&s, ch, radio, rng)?;
    Ok(Example::from_samples(&y, scale, h.label()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Window `index` of `split` for `uav` in `scene`, scaled for the network.
pub fn example_at(
    scene: &Scene,
    uav: usize,
    cfg: &SimulationConfig,
    split: Split,
    index: usize,
) -> Result<Example> {
    let ch = scene.channels.get(uav).ok_or_else(|| {
        Error::validation("uav", format!("index {uav} out of range for {} UAVs", scene.num_uavs()))
    })?;
    let split_tag = match split {
        Split::Train => 0,
        Split::Test => 1,
    };
    let mut r = substream(
        cfg.seed,
        &[rng::DATA, scene.setting as u64, uav as u64, split_tag, index as u64],
    );
    let h = draw_hypothesis(cfg.p_h1, &mut r);
    make_scaled(h, ch, &cfg.radio(), cfg.iq_scale(), &mut r)
}

pub fn make_client_dataset(scene: &Scene, uav: usize, cfg: &SimulationConfig) -> Result<ClientDataset> {
    if cfg.data_per_uav == 0 {
        return Err(Error::EmptyDataset);
    }
    let train = (0..cfg.data_per_uav)
        .map(|j| example_at(scene, uav, cfg, Split::Train, j))
        .collect::<Result<Vec<_>>>()?;
    let test = (0..cfg.test_per_uav())
        .map(|j| example_at(scene, uav, cfg, Split::Test, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClientDataset {
        uav_index: uav,
        sample_count: train.len(),
        train,
        test,
        snr_linear: scene.channels[uav].faded_snr(),
    })
}

const CACHE_MAGIC: &[u8; 4] = b"FSDS";
const CACHE_VERSION: u32 = 1;

/// Datasets for every UAV of one setting, as stored in a cache file.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetCache {
    pub signal_len: usize,
    pub data_per_uav: usize,
    pub test_per_uav: usize,
    pub seed: u64,
    pub clients: Vec<ClientDataset>,
}

/// Cache layout, all little-endian:
/// `"FSDS"`, version u32, M u32, B u32, N u32, seed u64, test count u32,
/// then per UAV `(index u32, snr f64)`, then every window's `2·M` f32 values
/// (UAV by UAV, training windows before test windows), then one label byte
/// per window in the same order.
pub fn write_cache(path: impl AsRef<Path>, cache: &DatasetCache) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_cache_to(&mut w, cache)?;
    w.flush()?;
    Ok(())
}

pub fn write_cache_to<W: Write>(w: &mut W, cache: &DatasetCache) -> Result<()> {
    let m = cache.signal_len;
    for c in &cache.clients {
        if c.train.len() != cache.data_per_uav || c.test.len() != cache.test_per_uav {
            return Err(Error::ShapeMismatch(format!(
                "UAV {} has {}/{} windows, header says {}/{}",
                c.uav_index,
                c.train.len(),
                c.test.len(),
                cache.data_per_uav,
                cache.test_per_uav
            )));
        }
        if let Some(bad) = c.train.iter().chain(&c.test).find(|e| e.x.len() != 2 * m) {
            return Err(Error::LengthMismatch { expected: 2 * m, actual: bad.x.len() });
        }
    }
    w.write_all(CACHE_MAGIC)?;
    w.write_u32::<LittleEndian>(CACHE_VERSION)?;
    w.write_u32::<LittleEndian>(to_u32(m)?)?;
    w.write_u32::<LittleEndian>(to_u32(cache.data_per_uav)?)?;
    w.write_u32::<LittleEndian>(to_u32(cache.clients.len())?)?;
    w.write_u64::<LittleEndian>(cache.seed)?;
    w.write_u32::<LittleEndian>(to_u32(cache.test_per_uav)?)?;
    for c in &cache.clients {
        w.write_u32::<LittleEndian>(to_u32(c.uav_index)?)?;
        w.write_f64::<LittleEndian>(c.snr_linear)?;
    }
    let windows = || cache.clients.iter().flat_map(|c| c.train.iter().chain(&c.test));
    for e in windows() {
        for &v in &e.x {
            w.write_f32::<LittleEndian>(v)?;
        }
    }
    for e in windows() {
        w.write_u8(e.label)?;
    }
    Ok(())
}

pub fn read_cache(path: impl AsRef<Path>) -> Result<DatasetCache> {
    read_cache_from(&mut BufReader::new(File::open(path)?))
}

pub fn read_cache_from<R: Read>(r: &mut R) -> Result<DatasetCache> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(Error::Format("not a dataset cache".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != CACHE_VERSION {
        return Err(Error::Format(format!("unsupported dataset cache version {version}")));
    }
    let m = r.read_u32::<LittleEndian>()? as usize;
    let b = r.read_u32::<LittleEndian>()? as usize;
    let n = r.read_u32::<LittleEndian>()? as usize;
    let seed = r.read_u64::<LittleEndian>()?;
    let t = r.read_u32::<LittleEndian>()? as usize;
    let mut clients = Vec::with_capacity(n);
    for _ in 0..n {
        let uav_index = r.read_u32::<LittleEndian>()? as usize;
        let snr_linear = r.read_f64::<LittleEndian>()?;
        clients.push(ClientDataset {
            uav_index,
            train: Vec::with_capacity(b),
            test: Vec::with_capacity(t),
            snr_linear,
            sample_count: b,
        });
    }
    for c in &mut clients {
        for j in 0..b + t {
            let mut x = vec![0f32; 2 * m];
            r.read_f32_into::<LittleEndian>(&mut x)?;
            let e = Example { x, label: 0 };
            if j < b {
                c.train.push(e);
            } else {
                c.test.push(e);
            }
        }
    }
    for c in &mut clients {
        for e in c.train.iter_mut().chain(c.test.iter_mut()) {
            e.label = r.read_u8()?;
            if e.label > 1 {
                return Err(Error::Format(format!("label byte {}", e.label)));
            }
        }
    }
    Ok(DatasetCache {
        signal_len: m,
        data_per_uav: b,
        test_per_uav: t,
        seed,
        clients,
    })
}

fn to_u32(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit the cache header")))
}
