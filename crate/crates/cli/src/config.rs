//! Scenario file schema.
//!
//! A scenario is a JSON object. Positions are `[x, y]` in meters, angles in
//! radians, frequencies in Hz, SNR in dB. Unknown keys are rejected.
//!
//! ```json
//! {
//!   "tx": [[3000, 0], [-1500, 2598.08], [-1500, -2598.08]],
//!   "rx": [[2121.3, 2121.3], [-2121.3, 2121.3], [-2121.3, -2121.3], [2121.3, -2121.3]],
//!   "target": [15, -20],
//!   "region": { "x_min": -3000, "x_max": 3000, "y_min": -3000, "y_max": 3000, "nx": 121, "ny": 121 },
//!   "carrier_frequency": 1e7,
//!   "snr_db": 30,
//!   "zeta": { "magnitude": 1, "phase": 0 },
//!   "seed": 7
//! }
//! ```

use std::path::Path;

use mimoloc::geometry::{Point2, PropagationConstant, Rect, SensorLayout, SPEED_OF_LIGHT};
use mimoloc::scenarios::{BAND_WIDTH, CARRIER, NUM_SAMPLES, SAMPLE_RATE};
use mimoloc::waveforms::{bandwidth_summary, BandwidthSummary, WaveformSet};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Polar {
    #[serde(default = "one")]
    pub magnitude: f64,
    #[serde(default)]
    pub phase: f64,
}

impl Default for Polar {
    fn default() -> Self {
        Self { magnitude: 1.0, phase: 0.0 }
    }
}

impl Polar {
    pub fn complex(&self) -> Complex64 {
        Complex64::from_polar(self.magnitude, self.phase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

/// Parameters of the built-in disjoint-band waveform family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformConfig {
    #[serde(default = "default_sample_rate")]
    pub sample_rate: f64,
    #[serde(default = "default_num_samples")]
    pub num_samples: usize,
    /// Width of each waveform's band, Hz.
    #[serde(default = "default_band_width")]
    pub band_width: f64,
}

impl Default for WaveformConfig {
    fn default() -> Self {
        Self { sample_rate: SAMPLE_RATE, num_samples: NUM_SAMPLES, band_width: BAND_WIDTH }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub tx: Vec<[f64; 2]>,
    pub rx: Vec<[f64; 2]>,
    #[serde(default)]
    pub target: Option<[f64; 2]>,
    #[serde(default)]
    pub region: Option<RegionConfig>,
    #[serde(default = "default_carrier")]
    pub carrier_frequency: f64,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    #[serde(default)]
    pub zeta: Polar,
    /// Per-path amplitudes for the non-coherent bound, receiver-major; all
    /// ones when absent.
    #[serde(default)]
    pub alpha: Option<Vec<Polar>>,
    #[serde(default)]
    pub waveform: WaveformConfig,
    /// Per-transmitter rms bandwidths, Hz. Overrides the waveform family.
    #[serde(default)]
    pub effective_bandwidths: Option<Vec<f64>>,
    /// Include the `1 + β_k²/f_c²` factors in the coherent bound.
    #[serde(default)]
    pub wideband_correction: bool,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub expansion_point: Option<[f64; 2]>,
    /// Measured path delays for `blue`, seconds, receiver-major.
    #[serde(default)]
    pub delays: Option<Vec<f64>>,
    /// Accepted `[low, high]` band for the Monte Carlo MSE ratio.
    #[serde(default)]
    pub tolerance: Option<[f64; 2]>,
    /// Matched-filter search half-width about each true delay, seconds.
    #[serde(default = "default_window")]
    pub window_half_width: f64,
}

fn one() -> f64 {
    1.0
}
fn default_sample_rate() -> f64 {
    SAMPLE_RATE
}
fn default_num_samples() -> usize {
    NUM_SAMPLES
}
fn default_band_width() -> f64 {
    BAND_WIDTH
}
fn default_carrier() -> f64 {
    CARRIER
}
fn default_snr() -> f64 {
    30.0
}
fn default_c() -> f64 {
    SPEED_OF_LIGHT
}
fn default_window() -> f64 {
    0.5e-6
}

fn point(p: [f64; 2]) -> Point2 {
    Point2::new(p[0], p[1])
}

/// A parsed scenario together with the SHA-256 of its source bytes.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ScenarioConfig,
    pub digest: String,
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Io { path: path.to_owned(), source })?;
    let config: ScenarioConfig =
        serde_json::from_slice(&bytes).map_err(|source| CliError::Config { path: path.to_owned(), source })?;
    Ok(LoadedConfig { config, digest: digest(&bytes) })
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl ScenarioConfig {
    pub fn layout(&self) -> Result<SensorLayout, CliError> {
        Ok(SensorLayout::new(
            self.tx.iter().copied().map(point).collect(),
            self.rx.iter().copied().map(point).collect(),
        )?)
    }

    pub fn propagation(&self) -> Result<PropagationConstant, CliError> {
        Ok(PropagationConstant::new(self.c)?)
    }

    pub fn target(&self) -> Result<Point2, CliError> {
        self.target.map(point).ok_or_else(|| CliError::Usage("config has no \"target\"".into()))
    }

    pub fn expansion_point(&self) -> Option<Point2> {
        self.expansion_point.map(point)
    }

    pub fn region(&self) -> Result<(Rect, usize, usize), CliError> {
        let r = self.region.ok_or_else(|| CliError::Usage("config has no \"region\"".into()))?;
        Ok((Rect::new(r.x_min, r.x_max, r.y_min, r.y_max)?, r.nx, r.ny))
    }

    pub fn sigma_w_sq(&self) -> f64 {
        10f64.powf(-self.snr_db / 10.0)
    }

    pub fn alpha(&self, paths: usize) -> Result<Vec<Complex64>, CliError> {
        match &self.alpha {
            None => Ok(vec![Complex64::new(1.0, 0.0); paths]),
            Some(a) if a.len() == paths => Ok(a.iter().map(Polar::complex).collect()),
            Some(a) => Err(CliError::Usage(format!("\"alpha\" has {} entries, layout has {paths} paths", a.len()))),
        }
    }

    pub fn waveforms(&self) -> Result<WaveformSet, CliError> {
        let w = &self.waveform;
        Ok(WaveformSet::frequency_division(self.tx.len(), w.sample_rate, w.num_samples, w.band_width, self.carrier_frequency)?)
    }

    pub fn bandwidths(&self) -> Result<BandwidthSummary, CliError> {
        match &self.effective_bandwidths {
            Some(b) if b.len() != self.tx.len() => Err(CliError::Usage(format!(
                "\"effective_bandwidths\" has {} entries for {} transmitters",
                b.len(),
                self.tx.len()
            ))),
            Some(b) => Ok(BandwidthSummary::from_betas(b, self.carrier_frequency)?),
            None => Ok(bandwidth_summary(&self.waveforms()?)?),
        }
    }
}
