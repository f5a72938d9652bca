//! Sampled lowpass-equivalent transmit waveforms.
//!
//! Delays are applied as spectral phase ramps, so a delayed waveform is the
//! band-limited circular shift of the sampled sequence. Spectra use the
//! unnormalized forward DFT with bin frequencies in `(-fs/2, fs/2]`; under that
//! convention `Δt·Σ|s|² = (Δt/N)·Σ|S|²`.

use std::cell::RefCell;
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::geometry::{Point2, PropagationConstant, SensorLayout};

const ENERGY_FLOOR: f64 = 1e-30;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

pub(crate) fn fft(buf: &mut [Complex64]) {
    plan(buf.len(), false).process(buf);
}

/// Unnormalized inverse DFT (`Σ X e^{+j2πmn/N}`).
pub(crate) fn ifft(buf: &mut [Complex64]) {
    plan(buf.len(), true).process(buf);
}

/// Signed DFT bin index: `m` for `m <= n/2`, `m - n` above.
fn signed_bin(m: usize, n: usize) -> i64 {
    if 2 * m <= n {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// Bin frequencies of an `n`-point DFT at `sample_rate`, in `(-fs/2, fs/2]`.
pub fn fft_frequencies(n: usize, sample_rate: f64) -> Vec<f64> {
    (0..n)
        .map(|m| signed_bin(m, n) as f64 * sample_rate / n as f64)
        .collect()
}

/// Second-moment bandwidth `sqrt(Σ f²|S|² / Σ|S|²)` of a sampled envelope.
pub fn effective_bandwidth(waveform: &[Complex64], sample_rate: f64) -> Result<f64> {
    if waveform.is_empty() {
        return Err(Error::ZeroEnergy);
    }
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::InvalidParameter(format!("sample rate {sample_rate}")));
    }
    if waveform.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFiniteInput("waveform samples"));
    }
    let mut spec = waveform.to_vec();
    fft(&mut spec);
    let freqs = fft_frequencies(spec.len(), sample_rate);
    let dt = 1.0 / sample_rate;
    let energy: f64 = spec.iter().map(|s| s.norm_sqr()).sum::<f64>() * dt / spec.len() as f64;
    if energy < ENERGY_FLOOR {
        return Err(Error::ZeroEnergy);
    }
    let num: f64 = spec.iter().zip(&freqs).map(|(s, f)| f * f * s.norm_sqr()).sum();
    let den: f64 = spec.iter().map(|s| s.norm_sqr()).sum();
    Ok((num / den).sqrt())
}

/// `M` unit-energy waveforms sharing one sample grid, plus the carrier.
#[derive(Debug, Clone)]
pub struct WaveformSet {
    sample_rate: f64,
    carrier_frequency: f64,
    samples: Vec<Vec<Complex64>>,
    spectra: Vec<Vec<Complex64>>,
    support: Vec<Vec<usize>>,
    freqs: Vec<f64>,
}

impl WaveformSet {
    /// Wrap sampled waveforms. Each must already have unit energy to 1e-9.
    pub fn new(sample_rate: f64, carrier_frequency: f64, samples: Vec<Vec<Complex64>>) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::InvalidParameter(format!("sample rate {sample_rate}")));
        }
        if !(carrier_frequency.is_finite() && carrier_frequency >= 0.0) {
            return Err(Error::InvalidParameter(format!("carrier frequency {carrier_frequency}")));
        }
        let n = samples.first().map_or(0, Vec::len);
        if samples.is_empty() || n == 0 {
            return Err(Error::InvalidParameter("empty waveform set".into()));
        }
        if let Some(bad) = samples.iter().find(|s| s.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: bad.len() });
        }
        let dt = 1.0 / sample_rate;
        let mut spectra = Vec::with_capacity(samples.len());
        let mut support = Vec::with_capacity(samples.len());
        for s in &samples {
            if s.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFiniteInput("waveform samples"));
            }
            let energy: f64 = s.iter().map(|z| z.norm_sqr()).sum::<f64>() * dt;
            if energy < ENERGY_FLOOR {
                return Err(Error::ZeroEnergy);
            }
            if (energy - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "waveform energy {energy} is not 1 (use WaveformSet::normalized)"
                )));
            }
            let mut spec = s.clone();
            fft(&mut spec);
            let peak = spec.iter().map(|z| z.norm()).fold(0.0, f64::max);
            support.push((0..n).filter(|&m| spec[m].norm() > 1e-13 * peak).collect());
            spectra.push(spec);
        }
        Ok(Self {
            sample_rate,
            carrier_frequency,
            samples,
            spectra,
            support,
            freqs: fft_frequencies(n, sample_rate),
        })
    }

    /// Like [`WaveformSet::new`] but rescales every waveform to unit energy.
    pub fn normalized(sample_rate: f64, carrier_frequency: f64, mut samples: Vec<Vec<Complex64>>) -> Result<Self> {
        let dt = 1.0 / sample_rate;
        for s in &mut samples {
            let e: f64 = s.iter().map(|z| z.norm_sqr()).sum::<f64>() * dt;
            if !(e >= ENERGY_FLOOR) {
                return Err(Error::ZeroEnergy);
            }
            let g = 1.0 / e.sqrt();
            s.iter_mut().for_each(|z| *z *= g);
        }
        Self::new(sample_rate, carrier_frequency, samples)
    }

    /// Frequency-division family: waveform `k` occupies `k·B <= |f| <= (k+1)·B`
    /// with a half-sine amplitude taper (raised-cosine power shape) that
    /// vanishes at both band edges. Spectra are real and even, so the
    /// envelopes are real with zero spectral centroid, and distinct members
    /// share no DFT bin: they stay orthogonal at every relative delay.
    pub fn frequency_division(
        count: usize,
        sample_rate: f64,
        num_samples: usize,
        band_width: f64,
        carrier_frequency: f64,
    ) -> Result<Self> {
        if count == 0 || num_samples < 8 {
            return Err(Error::InvalidParameter("need at least one waveform and 8 samples".into()));
        }
        if !(band_width > 0.0 && sample_rate > 0.0) {
            return Err(Error::InvalidParameter("band width and sample rate must be positive".into()));
        }
        if count as f64 * band_width >= 0.5 * sample_rate {
            return Err(Error::InvalidParameter(format!(
                "{count} bands of {band_width} Hz do not fit below Nyquist ({} Hz)",
                0.5 * sample_rate
            )));
        }
        let df = sample_rate / num_samples as f64;
        if band_width < 4.0 * df {
            return Err(Error::InvalidParameter(format!(
                "band width {band_width} Hz spans fewer than 4 DFT bins of {df} Hz"
            )));
        }
        let freqs = fft_frequencies(num_samples, sample_rate);
        let dt = 1.0 / sample_rate;
        let samples = (0..count)
            .map(|k| {
                let lo = k as f64 * band_width;
                let mut spec: Vec<Complex64> = freqs
                    .iter()
                    .map(|f| {
                        let x = (f.abs() - lo) / band_width;
                        if (0.0..=1.0).contains(&x) {
                            Complex64::new((PI * x).sin(), 0.0)
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect();
                let energy: f64 = spec.iter().map(|z| z.norm_sqr()).sum::<f64>() * dt / num_samples as f64;
                let g = 1.0 / (energy.sqrt() * num_samples as f64);
                ifft(&mut spec);
                spec.iter_mut().for_each(|z| *z *= g);
                spec
            })
            .collect();
        Self::normalized(sample_rate, carrier_frequency, samples)
    }

    pub fn num_waveforms(&self) -> usize {
        self.samples.len()
    }

    pub fn num_samples(&self) -> usize {
        self.freqs.len()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.num_samples() as f64 / self.sample_rate
    }

    pub fn carrier_frequency(&self) -> f64 {
        self.carrier_frequency
    }

    pub fn samples(&self, k: usize) -> &[Complex64] {
        &self.samples[k]
    }

    /// Forward DFT of waveform `k`.
    pub fn spectrum(&self, k: usize) -> &[Complex64] {
        &self.spectra[k]
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.freqs
    }

    pub(crate) fn support(&self, k: usize) -> &[usize] {
        &self.support[k]
    }

    /// `β_k² / f_c²` per waveform; small values mean the narrowband
    /// approximation holds.
    pub fn narrowband_ratios(&self) -> Result<Vec<f64>> {
        let s = bandwidth_summary(self)?;
        Ok(s.beta_k.iter().map(|b| (b / self.carrier_frequency).powi(2)).collect())
    }

    /// Waveform `k` delayed by `tau` seconds (band-limited circular shift).
    pub fn delayed(&self, k: usize, tau: f64) -> Vec<Complex64> {
        let n = self.num_samples();
        let mut buf: Vec<Complex64> = self.spectra[k]
            .iter()
            .zip(&self.freqs)
            .map(|(s, f)| s * Complex64::from_polar(1.0 / n as f64, -TAU * f * tau))
            .collect();
        ifft(&mut buf);
        buf
    }

    /// Cross-correlation `X_kk'(u) = ∫ s_k(t) s*_k'(t - u) dt`, evaluated
    /// exactly on the band-limited interpolant.
    pub fn cross_correlation(&self, k: usize, k2: usize, u: f64) -> Complex64 {
        let n = self.num_samples() as f64;
        let (a, b) = (&self.spectra[k], &self.spectra[k2]);
        let mut acc = Complex64::new(0.0, 0.0);
        for &m in &self.support[k] {
            let p = a[m] * b[m].conj();
            if p.norm_sqr() > 0.0 {
                acc += p * Complex64::from_polar(1.0, TAU * self.freqs[m] * u);
            }
        }
        acc / (n * self.sample_rate)
    }

    /// Check that `delays` lie in `[low, high)` and are finite.
    pub(crate) fn check_delays(&self, delays: &[f64], low: f64, high: f64) -> Result<()> {
        for &d in delays {
            if !d.is_finite() {
                return Err(Error::NonFiniteInput("delay"));
            }
            if d < low || d >= high {
                return Err(Error::DelayOutOfRange { delay: d, low, high });
            }
        }
        Ok(())
    }
}

/// Evaluate `(Δt/N) Σ_m C[m] e^{j2π f_m v}` over the listed bins.
pub(crate) fn spectral_eval(c: &[Complex64], bins: &[usize], freqs: &[f64], scale: f64, v: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &m in bins {
        acc += c[m] * Complex64::from_polar(1.0, TAU * freqs[m] * v);
    }
    acc * scale
}

/// Samples of `(Δt/N) Σ_m C[m] e^{j2π f_m v}` at `v = n·Δt/factor`,
/// `n = 0..N·factor` (circular lags; negative lags wrap to the end).
pub(crate) fn oversampled_correlation(c: &[Complex64], factor: usize, sample_rate: f64) -> Vec<Complex64> {
    let n = c.len();
    let big = n * factor;
    let mut buf = vec![Complex64::new(0.0, 0.0); big];
    for (m, &v) in c.iter().enumerate() {
        let s = signed_bin(m, n);
        let idx = if s >= 0 { s as usize } else { (big as i64 + s) as usize };
        buf[idx] = v;
    }
    ifft(&mut buf);
    let scale = 1.0 / (n as f64 * sample_rate);
    buf.iter_mut().for_each(|z| *z *= scale);
    buf
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthSummary {
    pub beta_k: Vec<f64>,
    pub beta: f64,
    pub beta_r: Vec<f64>,
    pub f_r: Vec<f64>,
}

impl BandwidthSummary {
    /// Build from per-waveform bandwidths (Hz) and the carrier (Hz).
    pub fn from_betas(beta_k: &[f64], carrier_frequency: f64) -> Result<Self> {
        if beta_k.is_empty() {
            return Err(Error::InvalidParameter("no bandwidths".into()));
        }
        if beta_k.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::InvalidParameter("bandwidths must be finite and non-negative".into()));
        }
        let beta = (beta_k.iter().map(|b| b * b).sum::<f64>() / beta_k.len() as f64).sqrt();
        if beta <= 0.0 {
            return Err(Error::ZeroEnergy);
        }
        Ok(Self {
            beta_k: beta_k.to_vec(),
            beta,
            beta_r: beta_k.iter().map(|b| b / beta).collect(),
            f_r: beta_k
                .iter()
                .map(|b| {
                    if carrier_frequency > 0.0 {
                        1.0 + (b / carrier_frequency).powi(2)
                    } else {
                        1.0
                    }
                })
                .collect(),
        })
    }

    pub fn num_waveforms(&self) -> usize {
        self.beta_k.len()
    }
}

pub fn bandwidth_summary(set: &WaveformSet) -> Result<BandwidthSummary> {
    let betas = (0..set.num_waveforms())
        .map(|k| effective_bandwidth(set.samples(k), set.sample_rate()))
        .collect::<Result<Vec<_>>>()?;
    BandwidthSummary::from_betas(&betas, set.carrier_frequency())
}

/// Same-receiver correlation matrix over paths.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub values: DMatrix<Complex64>,
    pub delay_vector: Vec<f64>,
}

/// Number of receivers implied by a path-indexed vector of length `len`.
pub(crate) fn receivers_for(len: usize, num_tx: usize) -> Result<usize> {
    if num_tx == 0 || len == 0 || !len.is_multiple_of(num_tx) {
        return Err(Error::DimensionMismatch {
            expected: num_tx * (len / num_tx.max(1)).max(1),
            got: len,
        });
    }
    Ok(len / num_tx)
}

/// Entry `(i, i')` for paths sharing receiver `l` is
/// `∫ s_k(t - τ_i) s*_k'(t - τ_i') dt`; entries across receivers are zero.
pub fn correlation_matrix(set: &WaveformSet, delays: &[f64]) -> Result<CorrelationMatrix> {
    let m = set.num_waveforms();
    let n_rx = receivers_for(delays.len(), m)?;
    set.check_delays(delays, 0.0, set.duration())?;
    let mn = m * n_rx;
    let mut values = DMatrix::from_element(mn, mn, Complex64::new(0.0, 0.0));
    for l in 0..n_rx {
        for k in 0..m {
            for k2 in 0..m {
                let (i, i2) = (l * m + k, l * m + k2);
                values[(i, i2)] = set.cross_correlation(k, k2, delays[i2] - delays[i]);
            }
        }
    }
    Ok(CorrelationMatrix { values, delay_vector: delays.to_vec() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalityWorst {
    pub k: usize,
    pub k2: usize,
    pub delay: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalityReport {
    pub passed: bool,
    pub worst: Option<OrthogonalityWorst>,
}

/// Scan `|X_kk'(u)|` for `k != k'` over `|u| <= delay_span` on a grid four
/// times finer than the sample period.
pub fn orthogonality_check(set: &WaveformSet, delay_span: f64, tolerance: f64) -> OrthogonalityReport {
    const FACTOR: usize = 4;
    let m = set.num_waveforms();
    let n = set.num_samples();
    let step = set.sample_period() / FACTOR as f64;
    let max_lag = ((delay_span.abs() / step).floor() as usize).min(n * FACTOR / 2);
    let mut worst: Option<OrthogonalityWorst> = None;
    for k in 0..m {
        for k2 in 0..m {
            if k == k2 {
                continue;
            }
            let cross: Vec<Complex64> = set.spectra[k]
                .iter()
                .zip(&set.spectra[k2])
                .map(|(a, b)| a * b.conj())
                .collect();
            let corr = oversampled_correlation(&cross, FACTOR, set.sample_rate());
            let big = corr.len();
            for lag in -(max_lag as i64)..=(max_lag as i64) {
                let idx = lag.rem_euclid(big as i64) as usize;
                let mag = corr[idx].norm();
                if worst.as_ref().is_none_or(|w| mag > w.magnitude) {
                    worst = Some(OrthogonalityWorst { k, k2, delay: lag as f64 * step, magnitude: mag });
                }
            }
        }
    }
    OrthogonalityReport {
        passed: worst.as_ref().is_none_or(|w| w.magnitude < tolerance),
        worst,
    }
}

/// Per-path complex gains applied when synthesizing echoes.
#[derive(Debug, Clone, Copy)]
pub enum PathAmplitudes<'a> {
    /// Phase-synchronized sensors: gain `ζ·e^{-j2π f_c τ}` on every path.
    Coherent(Complex64),
    /// Independent path amplitudes `α`, path-indexed.
    Noncoherent(&'a [Complex64]),
}

/// Received sequences for a scatterer at `target`, noise drawn from `seed`.
pub fn synthesize_received(
    layout: &SensorLayout,
    target: &Point2,
    set: &WaveformSet,
    amplitudes: PathAmplitudes<'_>,
    sigma_w_sq: f64,
    c: PropagationConstant,
    seed: u64,
) -> Result<Vec<Vec<Complex64>>> {
    if layout.num_tx() != set.num_waveforms() {
        return Err(Error::DimensionMismatch { expected: layout.num_tx(), got: set.num_waveforms() });
    }
    let delays = layout.path_delays(target, c);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    synthesize_from_delays(set, &delays, amplitudes, sigma_w_sq, &mut rng)
}

/// Received sequences for explicit path delays (path-indexed, `[0, T)`).
///
/// Noise is circular complex white Gaussian with per-sample variance
/// `σ_w²/Δt`, the sampled counterpart of autocorrelation `σ_w² δ(τ)`.
pub fn synthesize_from_delays<R: Rng + ?Sized>(
    set: &WaveformSet,
    delays: &[f64],
    amplitudes: PathAmplitudes<'_>,
    sigma_w_sq: f64,
    rng: &mut R,
) -> Result<Vec<Vec<Complex64>>> {
    let m = set.num_waveforms();
    let n_rx = receivers_for(delays.len(), m)?;
    set.check_delays(delays, 0.0, set.duration())?;
    if !(sigma_w_sq.is_finite() && sigma_w_sq >= 0.0) {
        return Err(Error::NonFiniteInput("noise level"));
    }
    let fc = set.carrier_frequency();
    let gains: Vec<Complex64> = match amplitudes {
        PathAmplitudes::Coherent(zeta) => {
            if !(zeta.re.is_finite() && zeta.im.is_finite()) {
                return Err(Error::NonFiniteInput("zeta"));
            }
            delays.iter().map(|t| zeta * Complex64::from_polar(1.0, -TAU * fc * t)).collect()
        }
        PathAmplitudes::Noncoherent(alpha) => {
            if alpha.len() != delays.len() {
                return Err(Error::DimensionMismatch { expected: delays.len(), got: alpha.len() });
            }
            if alpha.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
                return Err(Error::NonFiniteInput("alpha"));
            }
            alpha.to_vec()
        }
    };
    let n = set.num_samples();
    let freqs = set.frequencies();
    let noise_sd = (sigma_w_sq * set.sample_rate() / 2.0).sqrt();
    let mut out = Vec::with_capacity(n_rx);
    for l in 0..n_rx {
        let mut spec = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..m {
            let i = l * m + k;
            let g = gains[i] / n as f64;
            for &b in set.support(k) {
                spec[b] += set.spectrum(k)[b] * g * Complex64::from_polar(1.0, -TAU * freqs[b] * delays[i]);
            }
        }
        ifft(&mut spec);
        if noise_sd > 0.0 {
            for z in spec.iter_mut() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *z += Complex64::new(re * noise_sd, im * noise_sd);
            }
        }
        out.push(spec);
    }
    Ok(out)
}
