//! Position estimators and the Monte Carlo harness that checks them against
//! the bounds.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::crlb::EPS_DET;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{bearing_angles, d_matrix, BearingSet, Point2, PropagationConstant, Rect, SensorLayout};
use crate::waveforms::{
    fft, oversampled_correlation, spectral_eval, synthesize_from_delays, PathAmplitudes,
    WaveformSet,
};

/// Observed path delays, path-indexed, seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayObservations {
    pub mu: Vec<f64>,
}

impl DelayObservations {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("delay observations"));
        }
        Ok(Self { mu })
    }
}

/// Independent, equal-variance delay errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayErrorModel {
    pub variance: f64,
}

impl DelayErrorModel {
    pub fn from_variance(variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(Error::InvalidParameter(format!("delay variance {variance}")));
        }
        Ok(Self { variance })
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Diagonal `(MN)×(MN)` covariance.
    pub fn covariance(&self, paths: usize) -> DMatrix<f64> {
        DMatrix::from_diagonal_element(paths, paths, self.variance)
    }
}

/// Small-error delay variance `σ_w² / (8π² f_c² |ζ|²)` of coherent delay
/// estimation.
pub fn delay_error_covariance(f_c: f64, zeta_sq: f64, sigma_w_sq: f64) -> Result<DelayErrorModel> {
    for (name, v) in [("carrier frequency", f_c), ("|zeta|^2", zeta_sq), ("noise level", sigma_w_sq)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    DelayErrorModel::from_variance(sigma_w_sq / (8.0 * PI * PI * f_c * f_c * zeta_sq))
}

/// Geometry sums of the BLUE: `g1B = ΣB² - (ΣB)²/MN`, `g2B = ΣA² - (ΣA)²/MN`,
/// `hB = -ΣAB + ΣAΣB/MN` over the per-path bearing sums `(A, B)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlueCoefficients {
    pub g1b: f64,
    pub g2b: f64,
    pub hb: f64,
}

impl BlueCoefficients {
    pub fn det(&self) -> f64 {
        self.g1b * self.g2b - self.hb * self.hb
    }

    fn check(&self) -> Result<f64> {
        let det = self.det();
        let scale = (self.g1b * self.g2b).abs();
        if !(det > EPS_DET * scale) || !det.is_finite() {
            return Err(Error::SingularGeometry { det, scale });
        }
        Ok(det)
    }
}

pub fn blue_coefficients(bearings: &BearingSet) -> BlueCoefficients {
    let sums = bearings.path_sums();
    let mn = sums.len() as f64;
    let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, b) in sums {
        sa += a;
        sb += b;
        saa += a * a;
        sbb += b * b;
        sab += a * b;
    }
    BlueCoefficients {
        g1b: sbb - sb * sb / mn,
        g2b: saa - sa * sa / mn,
        hb: -sab + sa * sb / mn,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlueCovariance {
    pub sigma_x_sq: f64,
    pub sigma_y_sq: f64,
    pub g1b: f64,
    pub g2b: f64,
    pub hb: f64,
}

impl BlueCovariance {
    pub fn trace(&self) -> f64 {
        self.sigma_x_sq + self.sigma_y_sq
    }
}

/// Closed-form BLUE position variances.
pub fn blue_covariance(bearings: &BearingSet, err: &DelayErrorModel, c: PropagationConstant) -> Result<BlueCovariance> {
    let k = blue_coefficients(bearings);
    let det = k.check()?;
    let s = c.value().powi(2) * err.variance / det;
    Ok(BlueCovariance { sigma_x_sq: s * k.g1b, sigma_y_sq: s * k.g2b, g1b: k.g1b, g2b: k.g2b, hb: k.hb })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlueResult {
    pub x_hat: f64,
    pub y_hat: f64,
    /// Common additive term absorbed by the all-ones column of `D`, meters.
    pub offset_hat: f64,
    pub covariance: Matrix3<f64>,
    pub position_covariance: Matrix2<f64>,
    pub g1b: f64,
    pub g2b: f64,
    pub hb: f64,
}

/// Gauss-Markov estimate of `[x, y, offset]` from `μ = Dθ + ε`, cross-checked
/// against the explicit 2×2 form built from the centered observations.
pub fn blue_estimate(
    obs: &DelayObservations,
    bearings: &BearingSet,
    err: &DelayErrorModel,
    c: PropagationConstant,
) -> Result<BlueResult> {
    let mn = bearings.num_paths();
    if obs.mu.len() != mn {
        return Err(Error::DimensionMismatch { expected: mn, got: obs.mu.len() });
    }
    if mn < 3 {
        return Err(Error::RankDeficient);
    }
    let d = DMatrix::from_iterator(mn, 3, d_matrix(bearings, c).iter().copied());
    let mu = DVector::from_column_slice(&obs.mu);

    // whiten with the Cholesky factor of C (identity when noiseless), then
    // solve by QR so the conditioning is not squared
    let (dw, muw) = if err.variance > 0.0 {
        let chol = err
            .covariance(mn)
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("delay covariance is not positive definite".into()))?;
        let l = chol.l();
        let dw = l.solve_lower_triangular(&d).ok_or(Error::RankDeficient)?;
        let muw = l.solve_lower_triangular(&mu).ok_or(Error::RankDeficient)?;
        (dw, muw)
    } else {
        (d.clone(), mu.clone())
    };
    let qr = dw.clone().qr();
    let r = qr.r();
    let conditioning: f64 = (0..3).map(|i| (r[(i, i)] / dw.column(i).norm()).powi(2)).product();
    if !(conditioning > EPS_DET) {
        return Err(Error::RankDeficient);
    }
    let qtmu = qr.q().transpose() * &muw;
    let theta = r.solve_upper_triangular(&qtmu).ok_or(Error::RankDeficient)?;
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(3, 3)).ok_or(Error::RankDeficient)?;
    let cov = if err.variance > 0.0 { &r_inv * r_inv.transpose() } else { DMatrix::zeros(3, 3) };

    let k = blue_coefficients(bearings);
    let kdet = k.check().map_err(|_| Error::RankDeficient)?;
    let mean = obs.mu.iter().sum::<f64>() / mn as f64;
    let (mut pa, mut pb) = (0.0, 0.0);
    for ((a, b), m) in bearings.path_sums().into_iter().zip(&obs.mu) {
        pa += a * (m - mean);
        pb += b * (m - mean);
    }
    let cv = c.value();
    let x_exp = -cv * (k.g1b * pa + k.hb * pb) / kdet;
    let y_exp = -cv * (k.hb * pa + k.g2b * pb) / kdet;
    // the generic solve carries the common delay, so its rounding scales with |μ|
    let spread = obs.mu.iter().fold(0.0f64, |s, m| s.max(m.abs()));
    let scale = theta[0].abs().max(theta[1].abs()).max(cv * spread).max(f64::MIN_POSITIVE);
    // both forms lose accuracy in proportion to κ = g1B·g2B / det
    let kappa = (k.g1b * k.g2b).abs() / kdet;
    let tol = 1e-9f64.max(1e-12 * kappa);
    let gap = (x_exp - theta[0]).abs().max((y_exp - theta[1]).abs());
    if gap > tol * scale {
        return Err(Error::NumericalMismatch(format!(
            "explicit BLUE differs from Gauss-Markov solve by {gap:e} (scale {scale:e})"
        )));
    }

    let covariance = Matrix3::from_iterator(cov.iter().copied());
    let position_covariance = covariance.fixed_view::<2, 2>(0, 0).into_owned();
    Ok(BlueResult {
        x_hat: theta[0],
        y_hat: theta[1],
        offset_hat: theta[2],
        covariance,
        position_covariance,
        g1b: k.g1b,
        g2b: k.g2b,
        hb: k.hb,
    })
}

/// One linearized BLUE step about `expansion`: residuals `μ - τ(expansion)`
/// are regressed on `D` built from bearings pointing from the expansion
/// point toward each sensor, and the returned position is
/// `expansion + (x̂, ŷ)`. A common delay bias `Δ` shows up as
/// `offset_hat = -cΔ`.
pub fn localize_blue(
    obs: &DelayObservations,
    layout: &SensorLayout,
    expansion: &Point2,
    err: &DelayErrorModel,
    c: PropagationConstant,
) -> Result<BlueResult> {
    let bearings = bearing_angles(layout, expansion)?.reversed();
    let tau0 = layout.path_delays(expansion, c);
    if obs.mu.len() != tau0.len() {
        return Err(Error::DimensionMismatch { expected: tau0.len(), got: obs.mu.len() });
    }
    let resid = DelayObservations { mu: obs.mu.iter().zip(&tau0).map(|(m, t)| m - t).collect() };
    let mut r = blue_estimate(&resid, &bearings, err, c)?;
    r.x_hat += expansion.x;
    r.y_hat += expansion.y;
    Ok(r)
}

/// Delay search interval `[start, end]`, seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayWindow {
    pub start: f64,
    pub end: f64,
}

impl DelayWindow {
    pub fn around(center: f64, half_width: f64) -> Self {
        Self { start: center - half_width, end: center + half_width }
    }
}

fn quadratic_vertex(ym: f64, y0: f64, yp: f64) -> f64 {
    let den = ym - 2.0 * y0 + yp;
    if den < 0.0 {
        (0.5 * (ym - yp) / den).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

/// Per-path delay estimates maximizing `Re(e^{j2π f_c v} ∫ r_l(t) s*_k(t - v) dt)`.
///
/// The envelope `|·|` is searched on the sample grid inside the window, then
/// refined by a quadratic fit on a 16× oversampled neighborhood. The carrier
/// objective is scanned over one carrier cycle (at least two samples) either
/// side of the envelope peak; the local maximum closest to the envelope peak
/// is refined by a quadratic fit. Waveforms are assumed orthogonal.
/// `windows` holds either one window for every path or one per path.
pub fn matched_filter_delays(
    received: &[Vec<Complex64>],
    set: &WaveformSet,
    windows: &[DelayWindow],
) -> Result<DelayObservations> {
    let m = set.num_waveforms();
    let n_rx = received.len();
    let mn = m * n_rx;
    if n_rx == 0 {
        return Err(Error::InvalidParameter("no received signals".into()));
    }
    if windows.len() != 1 && windows.len() != mn {
        return Err(Error::DimensionMismatch { expected: mn, got: windows.len() });
    }
    let ns = set.num_samples();
    if let Some(bad) = received.iter().find(|r| r.len() != ns) {
        return Err(Error::DimensionMismatch { expected: ns, got: bad.len() });
    }
    let dt = set.sample_period();
    let fs = set.sample_rate();
    let fc = set.carrier_frequency();
    let freqs = set.frequencies();
    let scale = dt / ns as f64;
    let mut mu = vec![0.0; mn];
    for (l, r) in received.iter().enumerate() {
        if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFiniteInput("received samples"));
        }
        let mut spec = r.clone();
        fft(&mut spec);
        for k in 0..m {
            let i = l * m + k;
            let win = windows[if windows.len() == 1 { 0 } else { i }];
            if !(win.start.is_finite() && win.end.is_finite()) {
                return Err(Error::NonFiniteInput("delay window"));
            }
            let bins = set.support(k);
            let mut cross = vec![Complex64::new(0.0, 0.0); ns];
            for &b in bins {
                cross[b] = spec[b] * set.spectrum(k)[b].conj();
            }
            let z = oversampled_correlation(&cross, 1, fs);
            // tolerate rounding when window edges sit on sample instants
            let lo = (win.start / dt - 1e-9).ceil() as i64;
            let hi = (win.end / dt + 1e-9).floor() as i64;
            if hi - lo < 2 {
                return Err(Error::InvalidParameter(format!("delay window for path {i} spans fewer than 3 samples")));
            }
            let at = |n: i64| z[n.rem_euclid(ns as i64) as usize].norm();
            let mut best = lo;
            for n in lo..=hi {
                if at(n) > at(best) {
                    best = n;
                }
            }
            if best == lo || best == hi {
                return Err(Error::PeakNotFound { path: i });
            }
            let env = |v: f64| spectral_eval(&cross, bins, freqs, scale, v);
            let fine = dt / 16.0;
            let mags: Vec<f64> = (-16..=16).map(|j| env(best as f64 * dt + j as f64 * fine).norm()).collect();
            let jmax = (1..32).max_by(|&a, &b| mags[a].total_cmp(&mags[b])).unwrap_or(16);
            let v_env = best as f64 * dt
                + (jmax as f64 - 16.0 + quadratic_vertex(mags[jmax - 1], mags[jmax], mags[jmax + 1])) * fine;

            let step = if fc > 0.0 { fine.min(1.0 / (16.0 * fc)) } else { fine };
            let half = if fc > 0.0 { (1.0 / fc).max(2.0 * dt) } else { 2.0 * dt };
            let count = (half / step).ceil() as i64;
            let objective = |v: f64| (Complex64::from_polar(1.0, TAU * fc * v) * env(v)).re;
            let vals: Vec<f64> = (-count..=count).map(|j| objective(v_env + j as f64 * step)).collect();
            let mut pick: Option<usize> = None;
            for j in 1..vals.len() - 1 {
                if vals[j] >= vals[j - 1] && vals[j] > vals[j + 1] {
                    let dist = (j as i64 - count).abs();
                    if pick.is_none_or(|p| dist < (p as i64 - count).abs()) {
                        pick = Some(j);
                    }
                }
            }
            let j = pick.ok_or(Error::PeakNotFound { path: i })?;
            let off = quadratic_vertex(vals[j - 1], vals[j], vals[j + 1]);
            mu[i] = v_env + (j as f64 - count as f64 + off) * step;
        }
    }
    Ok(DelayObservations { mu })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleResult {
    pub x_hat: f64,
    pub y_hat: f64,
    /// Set when `fine_step` exceeds half a carrier wavelength.
    pub fine_step_warning: bool,
}

/// Per-path correlation `∫ r_l(t) s*_k(t - v) dt` tabulated on a 16×
/// oversampled circular delay grid, read by linear interpolation.
struct CorrelationTable {
    m: usize,
    step: f64,
    tables: Vec<Vec<Complex64>>,
}

impl CorrelationTable {
    const FACTOR: usize = 16;

    fn new(received: &[Vec<Complex64>], set: &WaveformSet) -> Self {
        let m = set.num_waveforms();
        let ns = set.num_samples();
        let mut tables = Vec::with_capacity(received.len() * m);
        for r in received {
            let mut spec = r.clone();
            fft(&mut spec);
            for k in 0..m {
                let mut cross = vec![Complex64::new(0.0, 0.0); ns];
                for &b in set.support(k) {
                    cross[b] = spec[b] * set.spectrum(k)[b].conj();
                }
                tables.push(oversampled_correlation(&cross, Self::FACTOR, set.sample_rate()));
            }
        }
        Self { m, step: set.sample_period() / Self::FACTOR as f64, tables }
    }

    fn at(&self, path: usize, v: f64) -> Complex64 {
        let t = &self.tables[path];
        let len = t.len();
        let x = (v / self.step).rem_euclid(len as f64);
        let i = (x.floor() as usize).min(len - 1);
        let f = x - i as f64;
        t[i] * (1.0 - f) + t[(i + 1) % len] * f
    }
}

fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// Two-stage grid maximum-likelihood position estimate.
///
/// Grid nodes sit at `x_min + i·coarse_step` (likewise in `y`). The coarse
/// stage maximizes `Σ|C_lk(τ_lk)|²`; the fine stage maximizes
/// `|Σ e^{j2π f_c τ_lk} C_lk(τ_lk)|²` on a `fine_step` lattice spanning
/// `±coarse_step` about the current peak, re-centering while the peak sits on
/// the lattice edge.
#[allow(clippy::too_many_arguments)]
pub fn mle_grid_search(
    received: &[Vec<Complex64>],
    set: &WaveformSet,
    layout: &SensorLayout,
    region: &Rect,
    coarse_step: f64,
    fine_step: f64,
    c: PropagationConstant,
) -> Result<MleResult> {
    mle_grid_search_with(received, set, layout, region, coarse_step, fine_step, c, Exec::default())
}

#[allow(clippy::too_many_arguments)]
pub fn mle_grid_search_with(
    received: &[Vec<Complex64>],
    set: &WaveformSet,
    layout: &SensorLayout,
    region: &Rect,
    coarse_step: f64,
    fine_step: f64,
    c: PropagationConstant,
    exec: Exec,
) -> Result<MleResult> {
    region.validate()?;
    if !(fine_step > 0.0 && coarse_step > fine_step && coarse_step.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < fine_step < coarse_step, got {fine_step} and {coarse_step}"
        )));
    }
    if layout.num_tx() != set.num_waveforms() {
        return Err(Error::DimensionMismatch { expected: layout.num_tx(), got: set.num_waveforms() });
    }
    if received.len() != layout.num_rx() {
        return Err(Error::DimensionMismatch { expected: layout.num_rx(), got: received.len() });
    }
    let fc = set.carrier_frequency();
    let wavelength = if fc > 0.0 { c.value() / fc } else { f64::INFINITY };
    let fine_step_warning = fine_step > 0.5 * wavelength;
    if fine_step_warning {
        log::warn!(
            "fine step {fine_step} m exceeds half a carrier wavelength ({} m); coherent sidelobes may capture the search",
            0.5 * wavelength
        );
    }
    let table = CorrelationTable::new(received, set);
    let m = table.m;
    let stat = |p: &Point2, coherent: bool| -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut energy = 0.0;
        for (l, r) in layout.rx().iter().enumerate() {
            for (k, t) in layout.tx().iter().enumerate() {
                let tau = (t.distance(p) + r.distance(p)) / c.value();
                let z = table.at(l * m + k, tau);
                if coherent {
                    acc += Complex64::from_polar(1.0, TAU * fc * tau) * z;
                } else {
                    energy += z.norm_sqr();
                }
            }
        }
        if coherent {
            acc.norm_sqr()
        } else {
            energy
        }
    };
    let argmax = |xs: &[f64], ys: &[f64], coherent: bool| -> (usize, usize) {
        let vals = exec.map_range(xs.len() * ys.len(), |idx| stat(&Point2::new(xs[idx % xs.len()], ys[idx / xs.len()]), coherent));
        let mut best = 0;
        for (i, v) in vals.iter().enumerate() {
            if *v > vals[best] {
                best = i;
            }
        }
        (best % xs.len(), best / xs.len())
    };

    let xs = axis(region.x_min, region.x_max, coarse_step);
    let ys = axis(region.y_min, region.y_max, coarse_step);
    if xs.len() < 3 || ys.len() < 3 {
        return Err(Error::InvalidParameter("coarse grid needs at least 3 nodes per axis".into()));
    }
    let (ix, iy) = argmax(&xs, &ys, false);
    if ix == 0 || iy == 0 || ix == xs.len() - 1 || iy == ys.len() - 1 {
        return Err(Error::BoundaryMaximum);
    }
    let mut center = Point2::new(xs[ix], ys[iy]);
    let span = (coarse_step / fine_step).round() as i64;
    let on_edge = |v: f64, lo: f64, hi: f64| v <= lo + 1e-9 * fine_step || v >= hi - 1e-9 * fine_step;
    for _ in 0..8 {
        let fx: Vec<f64> = (-span..=span)
            .map(|j| center.x + j as f64 * fine_step)
            .filter(|x| *x >= region.x_min && *x <= region.x_max)
            .collect();
        let fy: Vec<f64> = (-span..=span)
            .map(|j| center.y + j as f64 * fine_step)
            .filter(|y| *y >= region.y_min && *y <= region.y_max)
            .collect();
        let (jx, jy) = argmax(&fx, &fy, true);
        let best = Point2::new(fx[jx], fy[jy]);
        if on_edge(best.x, region.x_min, region.x_max) || on_edge(best.y, region.y_min, region.y_max) {
            return Err(Error::BoundaryMaximum);
        }
        let lattice_edge = jx == 0 || jy == 0 || jx == fx.len() - 1 || jy == fy.len() - 1;
        center = best;
        if !lattice_edge {
            break;
        }
    }
    Ok(MleResult { x_hat: center.x, y_hat: center.y, fine_step_warning })
}

#[derive(Debug, Clone)]
pub enum McMode {
    /// Delays drawn as `τ + ε` with the analytic delay-error variance.
    AnalyticDelays,
    /// Full waveform simulation followed by matched filtering; each path is
    /// searched within `±window_half_width` seconds of its true delay.
    FullSignal { waveforms: WaveformSet, window_half_width: f64 },
}

#[derive(Debug, Clone)]
pub struct MonteCarloConfig {
    pub trials: usize,
    pub seed: u64,
    pub layout: SensorLayout,
    pub target: Point2,
    /// Linearization point for the BLUE; the target when absent.
    pub expansion_point: Option<Point2>,
    /// `σ_w² = 10^(-snr_db/10)`; `+∞` gives a noiseless run.
    pub snr_db: f64,
    pub zeta: Complex64,
    pub carrier_frequency: f64,
    pub c: PropagationConstant,
    pub mode: McMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub trials: usize,
    pub failures: usize,
    pub sigma_w_sq: f64,
    pub empirical_mse: f64,
    pub theoretical_trace: f64,
    pub ratio: f64,
    pub mean_error: (f64, f64),
    pub analytic_delay_variance: f64,
    /// Pooled delay-error variance about each path's mean (full-signal mode).
    pub delay_error_variance: Option<f64>,
}

impl MonteCarloReport {
    pub fn delay_variance_ratio(&self) -> Option<f64> {
        self.delay_error_variance.map(|v| v / self.analytic_delay_variance)
    }
}

struct TrialOutcome {
    dx: f64,
    dy: f64,
    delay_errors: Vec<f64>,
}

pub fn monte_carlo(config: &MonteCarloConfig) -> Result<MonteCarloReport> {
    monte_carlo_with(config, Exec::default())
}

/// Run `trials` independent localizations. Trial `t` draws from ChaCha stream
/// `t` of `seed`, so results do not depend on scheduling.
pub fn monte_carlo_with(config: &MonteCarloConfig, exec: Exec) -> Result<MonteCarloReport> {
    if config.trials < 100 {
        return Err(Error::InvalidParameter(format!("need at least 100 trials, got {}", config.trials)));
    }
    let sigma_w_sq = if config.snr_db == f64::INFINITY { 0.0 } else { 10f64.powf(-config.snr_db / 10.0) };
    if !sigma_w_sq.is_finite() {
        return Err(Error::InvalidParameter(format!("SNR {} dB", config.snr_db)));
    }
    let fc = match &config.mode {
        McMode::FullSignal { waveforms, .. } => {
            let f = waveforms.carrier_frequency();
            if (f - config.carrier_frequency).abs() > 1e-9 * f.abs() {
                return Err(Error::InvalidParameter(format!(
                    "carrier {} Hz differs from the waveform carrier {f} Hz",
                    config.carrier_frequency
                )));
            }
            f
        }
        McMode::AnalyticDelays => config.carrier_frequency,
    };
    let zeta_sq = config.zeta.norm_sqr();
    let err = if sigma_w_sq > 0.0 {
        delay_error_covariance(fc, zeta_sq, sigma_w_sq)?
    } else {
        DelayErrorModel::from_variance(0.0)?
    };
    let layout = &config.layout;
    let c = config.c;
    let target = config.target;
    let expansion = config.expansion_point.unwrap_or(target);
    let tau = layout.path_delays(&target, c);
    let theory = blue_covariance(&bearing_angles(layout, &expansion)?, &err, c)?;
    let sd = err.std_dev();

    let run = |trial: usize| -> Result<TrialOutcome> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(trial as u64);
        let (mu, delay_errors) = match &config.mode {
            McMode::AnalyticDelays => {
                let mu: Vec<f64> = tau.iter().map(|t| t + sd * rng.sample::<f64, _>(StandardNormal)).collect();
                (mu, Vec::new())
            }
            McMode::FullSignal { waveforms, window_half_width } => {
                let rx = synthesize_from_delays(waveforms, &tau, PathAmplitudes::Coherent(config.zeta), sigma_w_sq, &mut rng)?;
                let windows: Vec<DelayWindow> = tau.iter().map(|t| DelayWindow::around(*t, *window_half_width)).collect();
                let obs = matched_filter_delays(&rx, waveforms, &windows)?;
                let errs = obs.mu.iter().zip(&tau).map(|(m, t)| m - t).collect();
                (obs.mu, errs)
            }
        };
        let est = localize_blue(&DelayObservations { mu }, layout, &expansion, &err, c)?;
        Ok(TrialOutcome { dx: est.x_hat - target.x, dy: est.y_hat - target.y, delay_errors })
    };
    let outcomes = exec.map_range(config.trials, run);

    let mut failures = 0;
    let mut ok = Vec::with_capacity(outcomes.len());
    let mut first_err = None;
    for o in outcomes {
        match o {
            Ok(t) => ok.push(t),
            Err(e) => {
                failures += 1;
                first_err.get_or_insert(e);
            }
        }
    }
    if ok.is_empty() {
        return Err(first_err.unwrap_or(Error::InvalidParameter("no trials".into())));
    }
    if failures > 0 {
        log::warn!("{failures} of {} trials failed", config.trials);
    }
    let n = ok.len() as f64;
    let empirical_mse = ok.iter().map(|t| t.dx * t.dx + t.dy * t.dy).sum::<f64>() / n;
    let mean_error = (ok.iter().map(|t| t.dx).sum::<f64>() / n, ok.iter().map(|t| t.dy).sum::<f64>() / n);
    let delay_error_variance = match config.mode {
        McMode::FullSignal { .. } if ok.len() > 1 => {
            let paths = tau.len();
            let means: Vec<f64> =
                (0..paths).map(|i| ok.iter().map(|t| t.delay_errors[i]).sum::<f64>() / n).collect();
            let ss: f64 = ok
                .iter()
                .map(|t| t.delay_errors.iter().zip(&means).map(|(e, m)| (e - m).powi(2)).sum::<f64>())
                .sum();
            Some(ss / (paths as f64 * (n - 1.0)))
        }
        _ => None,
    };
    let theoretical_trace = theory.trace();
    Ok(MonteCarloReport {
        trials: config.trials,
        failures,
        sigma_w_sq,
        empirical_mse,
        theoretical_trace,
        ratio: empirical_mse / theoretical_trace,
        mean_error,
        analytic_delay_variance: err.variance,
        delay_error_variance,
    })
}
