//! Cramér-Rao bounds on the target position.
//!
//! The closed forms assume orthogonal waveforms. The numeric Fisher
//! information routines build the full FIM over delays and nuisance
//! amplitudes from sampled waveforms, so they also cover correlated sets.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{h_matrix, BearingSet, PropagationConstant};
use crate::waveforms::{receivers_for, BandwidthSummary, WaveformSet};

/// Relative determinant threshold separating rank deficiency from roundoff.
pub const EPS_DET: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct NoncoherentChannel {
    /// Path amplitudes `α`, path-indexed.
    pub alpha: Vec<Complex64>,
    pub sigma_w_sq: f64,
}

impl NoncoherentChannel {
    /// Every path with unit amplitude.
    pub fn unit(paths: usize, sigma_w_sq: f64) -> Self {
        Self { alpha: vec![Complex64::new(1.0, 0.0); paths], sigma_w_sq }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentChannel {
    pub zeta: Complex64,
    pub sigma_w_sq: f64,
    pub carrier_frequency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrlbMode {
    Coherent,
    Noncoherent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrlbResult {
    pub eta: f64,
    pub g_x: f64,
    pub g_y: f64,
    pub h: f64,
    pub covariance: Matrix2<f64>,
    pub sigma_x_sq: f64,
    pub sigma_y_sq: f64,
}

impl CrlbResult {
    /// Assemble from `η` and the geometry coefficients, failing on a
    /// (relatively) vanishing determinant.
    pub fn from_coefficients(eta: f64, g_x: f64, g_y: f64, h: f64) -> Result<Self> {
        let det = g_x * g_y - h * h;
        let scale = (g_x * g_y).abs();
        if !(det > EPS_DET * scale) || !det.is_finite() {
            return Err(Error::SingularGeometry { det, scale });
        }
        let sigma_x_sq = eta * g_x / det;
        let sigma_y_sq = eta * g_y / det;
        let off = eta * h / det;
        Ok(Self {
            eta,
            g_x,
            g_y,
            h,
            covariance: Matrix2::new(sigma_x_sq, off, off, sigma_y_sq),
            sigma_x_sq,
            sigma_y_sq,
        })
    }

    pub fn trace(&self) -> f64 {
        self.sigma_x_sq + self.sigma_y_sq
    }
}

fn check_paths(bearings: &BearingSet, len: usize) -> Result<()> {
    if len != bearings.num_paths() {
        return Err(Error::DimensionMismatch { expected: bearings.num_paths(), got: len });
    }
    Ok(())
}

fn check_noise(sigma_w_sq: f64) -> Result<()> {
    if !(sigma_w_sq.is_finite() && sigma_w_sq >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise level {sigma_w_sq}")));
    }
    Ok(())
}

/// Non-coherent bound for orthogonal waveforms.
pub fn crlb_noncoherent(
    bearings: &BearingSet,
    channel: &NoncoherentChannel,
    bands: &BandwidthSummary,
    c: PropagationConstant,
) -> Result<CrlbResult> {
    check_paths(bearings, channel.alpha.len())?;
    check_noise(channel.sigma_w_sq)?;
    let m = bearings.num_tx();
    if bands.num_waveforms() != m {
        return Err(Error::DimensionMismatch { expected: m, got: bands.num_waveforms() });
    }
    if channel.alpha.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err(Error::NonFiniteInput("alpha"));
    }
    let eta = c.value().powi(2) * channel.sigma_w_sq / (8.0 * PI * PI * bands.beta * bands.beta);
    let (mut gx, mut gy, mut h) = (0.0, 0.0, 0.0);
    for (i, (a, b)) in bearings.path_sums().into_iter().enumerate() {
        let w = channel.alpha[i].norm_sqr() * bands.beta_r[i % m].powi(2);
        gx += w * b * b;
        gy += w * a * a;
        h -= w * a * b;
    }
    CrlbResult::from_coefficients(eta, gx, gy, h)
}

/// Coherent bound for orthogonal waveforms. With `bands = None` the
/// narrowband factors `f_R = 1 + β_k²/f_c²` are all taken as 1.
pub fn crlb_coherent(
    bearings: &BearingSet,
    channel: &CoherentChannel,
    bands: Option<&BandwidthSummary>,
    c: PropagationConstant,
) -> Result<CrlbResult> {
    check_noise(channel.sigma_w_sq)?;
    let zeta_sq = channel.zeta.norm_sqr();
    if !(zeta_sq > 0.0 && zeta_sq.is_finite()) {
        return Err(Error::InvalidParameter("|zeta| must be positive".into()));
    }
    let fc = channel.carrier_frequency;
    if !(fc > 0.0 && fc.is_finite()) {
        return Err(Error::InvalidParameter(format!("carrier frequency {fc}")));
    }
    let m = bearings.num_tx();
    let f_r: Vec<f64> = match bands {
        Some(b) => {
            if b.num_waveforms() != m {
                return Err(Error::DimensionMismatch { expected: m, got: b.num_waveforms() });
            }
            b.beta_k.iter().map(|bk| 1.0 + (bk / fc).powi(2)).collect()
        }
        None => vec![1.0; m],
    };
    let eta = c.value().powi(2) * channel.sigma_w_sq / (8.0 * PI * PI * fc * fc * zeta_sq);
    let sums = bearings.path_sums();
    let mn = sums.len() as f64;
    let (mut sa, mut sb) = (0.0, 0.0);
    let (mut gx, mut gy, mut h) = (0.0, 0.0, 0.0);
    for (i, (a, b)) in sums.into_iter().enumerate() {
        let f = f_r[i % m];
        sa += a;
        sb += b;
        gx += f * b * b;
        gy += f * a * a;
        h -= f * a * b;
    }
    gx -= sb * sb / mn;
    gy -= sa * sa / mn;
    h += sa * sb / mn;
    CrlbResult::from_coefficients(eta, gx, gy, h)
}

/// Numeric Fisher information over `ψ`.
///
/// Non-coherent parameter order: `[τ (MN), Re α (MN), Im α (MN)]`.
/// Coherent order: `[τ (MN), Re ζ, Im ζ]`. `values` already carries the
/// `2/σ_w²` factor, recorded in `scale`.
#[derive(Debug, Clone)]
pub struct FimMatrix {
    pub values: DMatrix<f64>,
    pub mode: CrlbMode,
    pub paths: usize,
    pub scale: f64,
}

impl FimMatrix {
    pub fn dimension(&self) -> usize {
        self.values.nrows()
    }

    /// Largest `|J - Jᵀ|` relative to the largest `|J|`.
    pub fn asymmetry(&self) -> f64 {
        let peak = self.values.amax().max(f64::MIN_POSITIVE);
        (&self.values - self.values.transpose()).amax() / peak
    }
}

/// Finite-difference step used by the FIM oracle.
pub fn fd_step(sample_rate: f64) -> f64 {
    1.0 / (64.0 * sample_rate)
}

/// One term `coef · (-∂/∂τ)^order` of a model derivative on a path.
#[derive(Clone, Copy)]
struct Term {
    path: usize,
    coef: Complex64,
    order: usize,
}

/// Kernel `K_ab(u)` and its first two derivatives for every same-receiver
/// ordered path pair, by 5-point central differences.
struct KernelTable {
    m: usize,
    derivs: Vec<[Complex64; 3]>,
}

impl KernelTable {
    fn build(set: &WaveformSet, delays: &[f64], phase_freq: f64) -> Self {
        let m = set.num_waveforms();
        let n_rx = delays.len() / m;
        let h = fd_step(set.sample_rate());
        let kernel = |k: usize, k2: usize, u: f64| {
            set.cross_correlation(k, k2, u) * Complex64::from_polar(1.0, TAU * phase_freq * u)
        };
        let mut derivs = Vec::with_capacity(n_rx * m * m);
        for l in 0..n_rx {
            for k in 0..m {
                for k2 in 0..m {
                    let u = delays[l * m + k2] - delays[l * m + k];
                    let f: Vec<Complex64> = (-2..=2).map(|j| kernel(k, k2, u + j as f64 * h)).collect();
                    let d1 = (f[0] - f[1] * 8.0 + f[3] * 8.0 - f[4]) / (12.0 * h);
                    let d2 = (-f[0] + f[1] * 16.0 - f[2] * 30.0 + f[3] * 16.0 - f[4]) / (12.0 * h * h);
                    derivs.push([f[2], d1, d2]);
                }
            }
        }
        Self { m, derivs }
    }

    fn get(&self, a: usize, b: usize, order: usize) -> Option<Complex64> {
        let (la, lb) = (a / self.m, b / self.m);
        if la != lb {
            return None;
        }
        let idx = la * self.m * self.m + (a % self.m) * self.m + (b % self.m);
        Some(self.derivs[idx][order])
    }
}

fn assemble(params: &[Vec<Term>], table: &KernelTable, scale: f64) -> DMatrix<f64> {
    let n = params.len();
    let mut j = DMatrix::zeros(n, n);
    for p in 0..n {
        for q in p..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for tp in &params[p] {
                for tq in &params[q] {
                    if let Some(kd) = table.get(tp.path, tq.path, tp.order + tq.order) {
                        let sign = if tq.order % 2 == 1 { -1.0 } else { 1.0 };
                        acc += tp.coef * tq.coef.conj() * kd * sign;
                    }
                }
            }
            j[(p, q)] = scale * acc.re;
            j[(q, p)] = scale * acc.re;
        }
    }
    j
}

fn check_oracle_inputs(set: &WaveformSet, delays: &[f64], sigma_w_sq: f64) -> Result<usize> {
    let n_rx = receivers_for(delays.len(), set.num_waveforms())?;
    if !(sigma_w_sq.is_finite() && sigma_w_sq > 0.0) {
        return Err(Error::InvalidParameter(format!("noise level {sigma_w_sq} must be positive")));
    }
    let h = fd_step(set.sample_rate());
    set.check_delays(delays, h, set.duration() - h)?;
    Ok(n_rx)
}

/// Fisher information of `[τ, Re α, Im α]` for the non-coherent model.
pub fn fim_numeric_noncoherent(
    set: &WaveformSet,
    delays: &[f64],
    channel: &NoncoherentChannel,
) -> Result<FimMatrix> {
    check_oracle_inputs(set, delays, channel.sigma_w_sq)?;
    let mn = delays.len();
    if channel.alpha.len() != mn {
        return Err(Error::DimensionMismatch { expected: mn, got: channel.alpha.len() });
    }
    let one = Complex64::new(1.0, 0.0);
    let mut params = Vec::with_capacity(3 * mn);
    params.extend((0..mn).map(|i| vec![Term { path: i, coef: -channel.alpha[i], order: 1 }]));
    params.extend((0..mn).map(|i| vec![Term { path: i, coef: one, order: 0 }]));
    params.extend((0..mn).map(|i| vec![Term { path: i, coef: Complex64::i(), order: 0 }]));
    let table = KernelTable::build(set, delays, 0.0);
    let scale = 2.0 / channel.sigma_w_sq;
    Ok(FimMatrix { values: assemble(&params, &table, scale), mode: CrlbMode::Noncoherent, paths: mn, scale })
}

/// Fisher information of `[τ, Re ζ, Im ζ]` for the coherent model, with the
/// carrier phase `e^{-j2π f_c τ}` inside the differentiated kernel.
pub fn fim_numeric_coherent(set: &WaveformSet, delays: &[f64], channel: &CoherentChannel) -> Result<FimMatrix> {
    check_oracle_inputs(set, delays, channel.sigma_w_sq)?;
    let fc = channel.carrier_frequency;
    if !(fc.is_finite() && fc >= 0.0) {
        return Err(Error::InvalidParameter(format!("carrier frequency {fc}")));
    }
    if fd_step(set.sample_rate()) * fc >= 1.0 / 16.0 {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step does not resolve the carrier: need f_c < 4·fs, got f_c = {fc}"
        )));
    }
    let mn = delays.len();
    let mut params = Vec::with_capacity(mn + 2);
    params.extend((0..mn).map(|i| vec![Term { path: i, coef: -channel.zeta, order: 1 }]));
    params.push((0..mn).map(|i| Term { path: i, coef: Complex64::new(1.0, 0.0), order: 0 }).collect());
    params.push((0..mn).map(|i| Term { path: i, coef: Complex64::i(), order: 0 }).collect());
    let table = KernelTable::build(set, delays, fc);
    let scale = 2.0 / channel.sigma_w_sq;
    Ok(FimMatrix { values: assemble(&params, &table, scale), mode: CrlbMode::Coherent, paths: mn, scale })
}

/// Invert a small dense block, checking `‖J·J⁻¹ - I‖_max < 1e-8`.
fn checked_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let inv = m
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::SingularFim("nuisance block is not invertible".into()))?;
    let resid = (m * &inv - DMatrix::<f64>::identity(n, n)).amax();
    if !(resid < 1e-8) {
        return Err(Error::SingularFim(format!("inverse residual {resid:e}")));
    }
    Ok(inv)
}

/// Position block of the inverse FIM after the chain rule to `[x, y, nuisance]`.
pub fn crlb_from_fim(
    fim: &FimMatrix,
    bearings: &BearingSet,
    c: PropagationConstant,
    mode: CrlbMode,
) -> Result<Matrix2<f64>> {
    if fim.mode != mode {
        return Err(Error::InvalidParameter(format!("FIM was built for {:?}, not {mode:?}", fim.mode)));
    }
    let mn = bearings.num_paths();
    let expected = match mode {
        CrlbMode::Coherent => mn + 2,
        CrlbMode::Noncoherent => 3 * mn,
    };
    if fim.paths != mn || fim.dimension() != expected {
        return Err(Error::DimensionMismatch { expected, got: fim.dimension() });
    }
    let g = h_matrix(bearings) * (-1.0 / c.value());
    let g = DMatrix::from_iterator(2, mn, g.iter().copied());
    let n_nuis = expected - mn;
    let a = fim.values.view((0, 0), (mn, mn));
    let b = fim.values.view((0, mn), (mn, n_nuis));
    let d = fim.values.view((mn, mn), (n_nuis, n_nuis)).into_owned();
    let d_inv = checked_inverse(&d)?;
    let gb = &g * b;
    let schur = &g * a * g.transpose() - &gb * d_inv * gb.transpose();
    let (s00, s01, s10, s11) = (schur[(0, 0)], schur[(0, 1)], schur[(1, 0)], schur[(1, 1)]);
    let off = 0.5 * (s01 + s10);
    let det = s00 * s11 - off * off;
    if !(det > EPS_DET * (s00 * s11).abs()) {
        return Err(Error::SingularFim(format!("position Schur complement determinant {det:e}")));
    }
    Ok(Matrix2::new(s11 / det, -off / det, -off / det, s00 / det))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{bearing_angles, Point2, SensorLayout};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ring(count: usize, offset: f64) -> Vec<f64> {
        (0..count).map(|i| offset + TAU * i as f64 / count as f64).collect()
    }

    fn unit_coherent() -> CoherentChannel {
        CoherentChannel { zeta: Complex64::new(1.0, 0.0), sigma_w_sq: 1.0, carrier_frequency: 1.0 }
    }

    #[test]
    fn noncoherent_symmetric_3x3() {
        let b = BearingSet::from_angles(&ring(3, 0.0), &ring(3, 0.0));
        let bands = BandwidthSummary::from_betas(&[1.0; 3], 1e9).unwrap();
        let r = crlb_noncoherent(&b, &NoncoherentChannel::unit(9, 1.0), &bands, PropagationConstant::unit()).unwrap();
        // direct evaluation of the coefficient sums
        let mut gx = 0.0;
        let mut gy = 0.0;
        let mut h = 0.0;
        for r_ang in ring(3, 0.0) {
            for t_ang in ring(3, 0.0) {
                let a = t_ang.cos() + r_ang.cos();
                let bb = t_ang.sin() + r_ang.sin();
                gx += bb * bb;
                gy += a * a;
                h -= a * bb;
            }
        }
        assert_relative_eq!(r.g_x, gx, max_relative = 1e-12);
        assert_relative_eq!(r.g_x, 9.0, max_relative = 1e-12);
        assert_relative_eq!(r.g_y, 9.0, max_relative = 1e-12);
        assert!(r.h.abs() < 1e-12 && h.abs() < 1e-12 && (gy - 9.0).abs() < 1e-12);
        assert_relative_eq!(r.trace(), 1.0 / (36.0 * PI * PI), max_relative = 1e-12);
        assert_relative_eq!(r.trace(), 2.8145e-3, max_relative = 1e-4);
    }

    #[test]
    fn collinear_paths_are_singular() {
        let b = BearingSet::from_angles(&[0.4; 3], &[0.4; 2]);
        let bands = BandwidthSummary::from_betas(&[1.0; 3], 1e9).unwrap();
        let e = crlb_noncoherent(&b, &NoncoherentChannel::unit(6, 1.0), &bands, PropagationConstant::unit());
        assert!(matches!(e, Err(Error::SingularGeometry { .. })));
        let e = crlb_coherent(&b, &unit_coherent(), None, PropagationConstant::unit());
        assert!(matches!(e, Err(Error::SingularGeometry { .. })));
    }

    #[test]
    fn noise_doubling_doubles_variances() {
        let b = BearingSet::from_angles(&[0.1, 2.0, 4.1], &[0.7, 3.3]);
        let bands = BandwidthSummary::from_betas(&[1.0, 2.0, 1.5], 10.0).unwrap();
        let c = PropagationConstant::unit();
        let r1 = crlb_noncoherent(&b, &NoncoherentChannel::unit(6, 0.3), &bands, c).unwrap();
        let r2 = crlb_noncoherent(&b, &NoncoherentChannel::unit(6, 0.6), &bands, c).unwrap();
        assert_eq!(r2.sigma_x_sq, 2.0 * r1.sigma_x_sq);
        assert_eq!(r2.sigma_y_sq, 2.0 * r1.sigma_y_sq);
    }

    #[test]
    fn coherent_symmetric_3x3_attains_floor() {
        let b = BearingSet::from_angles(&ring(3, 0.0), &ring(3, 0.0));
        let r = crlb_coherent(&b, &unit_coherent(), None, PropagationConstant::unit()).unwrap();
        assert_relative_eq!(r.trace(), 2.0 * r.eta / 9.0, max_relative = 1e-12);
        assert_relative_eq!(r.trace(), 1.0 / (36.0 * PI * PI), max_relative = 1e-12);
    }

    #[test]
    fn simo_coefficients() {
        for mn in [3usize, 5, 12] {
            let b = BearingSet::from_angles(&[1.234], &ring(mn, 0.3));
            let r = crlb_coherent(&b, &unit_coherent(), None, PropagationConstant::unit()).unwrap();
            assert_relative_eq!(r.g_x, mn as f64 / 2.0, max_relative = 1e-12);
            assert_relative_eq!(r.g_y, mn as f64 / 2.0, max_relative = 1e-12);
            assert!(r.h.abs() < 1e-12);
            assert_relative_eq!(r.trace(), 4.0 * r.eta / mn as f64, max_relative = 1e-12);
        }
    }

    #[test]
    fn narrowband_factors_tighten_the_bound() {
        let b = BearingSet::from_angles(&ring(3, 0.2), &ring(4, 0.0));
        let bands = BandwidthSummary::from_betas(&[0.1, 0.2, 0.3], 1.0).unwrap();
        let c = PropagationConstant::unit();
        let exact = crlb_coherent(&b, &unit_coherent(), Some(&bands), c).unwrap();
        let approx1 = crlb_coherent(&b, &unit_coherent(), None, c).unwrap();
        assert!(exact.trace() < approx1.trace());
    }

    #[test]
    fn coherent_rejects_zero_amplitude() {
        let b = BearingSet::from_angles(&ring(3, 0.0), &ring(3, 0.0));
        let ch = CoherentChannel { zeta: Complex64::new(0.0, 0.0), ..unit_coherent() };
        assert!(crlb_coherent(&b, &ch, None, PropagationConstant::unit()).is_err());
    }

    #[test]
    fn from_fim_rejects_mode_and_size_mismatch() {
        let b = BearingSet::from_angles(&ring(3, 0.0), &ring(3, 0.0));
        let fim = FimMatrix { values: DMatrix::identity(11, 11), mode: CrlbMode::Coherent, paths: 9, scale: 1.0 };
        assert!(crlb_from_fim(&fim, &b, PropagationConstant::unit(), CrlbMode::Noncoherent).is_err());
        let fim = FimMatrix { values: DMatrix::identity(10, 10), mode: CrlbMode::Coherent, paths: 9, scale: 1.0 };
        assert!(matches!(
            crlb_from_fim(&fim, &b, PropagationConstant::unit(), CrlbMode::Coherent),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn from_fim_reduces_to_closed_form_for_block_model() {
        // Hand-built orthogonal coherent FIM with S = F, V from ζ = 1 and Λ = MN·I
        let b = BearingSet::from_angles(&[0.3, 2.2, 4.0], &[1.0, 3.0]);
        let mn = 6;
        let fc = 1.0;
        let mut j = DMatrix::zeros(mn + 2, mn + 2);
        for i in 0..mn {
            j[(i, i)] = 4.0 * PI * PI * fc * fc;
            j[(i, mn + 1)] = -TAU * fc;
            j[(mn + 1, i)] = -TAU * fc;
        }
        j[(mn, mn)] = mn as f64;
        j[(mn + 1, mn + 1)] = mn as f64;
        let fim = FimMatrix { values: j * 2.0, mode: CrlbMode::Coherent, paths: mn, scale: 2.0 };
        let cov = crlb_from_fim(&fim, &b, PropagationConstant::unit(), CrlbMode::Coherent).unwrap();
        let r = crlb_coherent(&b, &unit_coherent(), None, PropagationConstant::unit()).unwrap();
        for (x, y) in cov.iter().zip(r.covariance.iter()) {
            assert!((x - y).abs() < 1e-12 * r.trace());
        }
    }

    fn arb_angles(max: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0..TAU, 1..=max)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn coherent_trace_respects_floor(tx in arb_angles(6), rx in arb_angles(6)) {
            let b = BearingSet::from_angles(&tx, &rx);
            if let Ok(r) = crlb_coherent(&b, &unit_coherent(), None, PropagationConstant::unit()) {
                let floor = 2.0 * r.eta / b.num_paths() as f64;
                prop_assert!(r.trace() >= floor - 1e-12);
                prop_assert!(r.sigma_x_sq > 0.0 && r.sigma_y_sq > 0.0);
            }
        }

        #[test]
        fn trace_is_rotation_invariant(
            tx in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 1..5),
            rx in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 1..5),
            rho in -PI..PI,
        ) {
            let pts = |v: &Vec<(f64, f64)>| v.iter().map(|&(x, y)| Point2::new(x, y)).collect::<Vec<_>>();
            let layout = SensorLayout::new(pts(&tx), pts(&rx)).unwrap();
            let o = Point2::default();
            let c = PropagationConstant::unit();
            let (Ok(b0), Ok(b1)) = (bearing_angles(&layout, &o), bearing_angles(&layout.rotated(&o, rho), &o)) else {
                return Ok(());
            };
            let bands = BandwidthSummary::from_betas(&vec![1.0; tx.len()], 10.0).unwrap();
            if let (Ok(r0), Ok(r1)) = (
                crlb_coherent(&b0, &unit_coherent(), Some(&bands), c),
                crlb_coherent(&b1, &unit_coherent(), Some(&bands), c),
            ) {
                // skip near-singular draws where conditioning dominates
                let cond = r0.trace() / r0.eta;
                if cond < 1e3 {
                    prop_assert!((r0.trace() / r1.trace() - 1.0).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn trace_scales_with_noise_and_amplitude(s in 0.01..10.0f64, z in 0.1..10.0f64) {
            let b = BearingSet::from_angles(&ring(3, 0.1), &ring(4, 0.5));
            let c = PropagationConstant::unit();
            let base = crlb_coherent(&b, &unit_coherent(), None, c).unwrap().trace();
            let ch = CoherentChannel { zeta: Complex64::new(0.0, z), sigma_w_sq: s, carrier_frequency: 1.0 };
            let t = crlb_coherent(&b, &ch, None, c).unwrap().trace();
            prop_assert!((t / (base * s / (z * z)) - 1.0).abs() < 1e-12);
        }
    }
}
