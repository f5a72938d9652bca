use std::f64::consts::{PI, TAU};

use mimoloc::crlb::{
    crlb_coherent, crlb_from_fim, crlb_noncoherent, fim_numeric_coherent, fim_numeric_noncoherent,
    CoherentChannel, CrlbMode, NoncoherentChannel,
};
use mimoloc::geometry::{bearing_angles, Point2, PropagationConstant, SensorLayout};
use mimoloc::waveforms::{bandwidth_summary, WaveformSet};
use mimoloc::Error;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FS: f64 = 40.0e6;
const FC: f64 = 10.0e6;

fn waveforms(n: usize) -> WaveformSet {
    WaveformSet::frequency_division(3, FS, n, 0.6e6, FC).unwrap()
}

fn random_layout(rng: &mut ChaCha8Rng, m: usize, n: usize) -> SensorLayout {
    let mut pt = || {
        let r = rng.gen_range(1000.0..5000.0);
        Point2::default().offset_polar(r, rng.gen_range(0.0..TAU))
    };
    let tx = (0..m).map(|_| pt()).collect();
    let rx = (0..n).map(|_| pt()).collect();
    SensorLayout::new(tx, rx).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn noncoherent_blocks_match_orthogonal_closed_form() {
    let set = waveforms(2048);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let layout = random_layout(&mut rng, 3, 3);
    let c = PropagationConstant::default();
    let delays = layout.path_delays(&Point2::default(), c);
    let alpha: Vec<Complex64> = (0..9).map(|_| Complex64::from_polar(rng.gen_range(0.5..2.0), rng.gen_range(0.0..TAU))).collect();
    let ch = NoncoherentChannel { alpha: alpha.clone(), sigma_w_sq: 0.01 };
    let fim = fim_numeric_noncoherent(&set, &delays, &ch).unwrap();
    assert_eq!(fim.dimension(), 27);
    assert!(fim.asymmetry() < 1e-9);
    let bands = bandwidth_summary(&set).unwrap();
    let j = &fim.values / fim.scale;
    let s_peak = (0..9).map(|i| j[(i, i)]).fold(0.0, f64::max);
    for i in 0..9 {
        let expect = 4.0 * PI * PI * bands.beta.powi(2) * alpha[i].norm_sqr() * bands.beta_r[i % 3].powi(2);
        assert!(rel(j[(i, i)], expect) < 1e-3, "S[{i}] {} vs {expect}", j[(i, i)]);
        for q in 9..27 {
            assert!(j[(i, q)].abs() < 1e-3 * s_peak.sqrt(), "V[{i},{q}] = {}", j[(i, q)]);
        }
        for k in 0..9 {
            if k != i {
                assert!(j[(i, k)].abs() < 1e-3 * s_peak);
            }
        }
    }
    for p in 9..27 {
        for q in 9..27 {
            let expect = if p == q { 1.0 } else { 0.0 };
            assert!((j[(p, q)] - expect).abs() < 1e-3);
        }
    }
}

#[test]
fn coherent_blocks_match_orthogonal_closed_form() {
    let set = waveforms(2048);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let layout = random_layout(&mut rng, 3, 3);
    let c = PropagationConstant::default();
    let delays = layout.path_delays(&Point2::default(), c);
    let zeta = Complex64::from_polar(0.8, 0.5);
    let ch = CoherentChannel { zeta, sigma_w_sq: 0.02, carrier_frequency: FC };
    let fim = fim_numeric_coherent(&set, &delays, &ch).unwrap();
    assert_eq!(fim.dimension(), 11);
    assert!(fim.asymmetry() < 1e-9);
    let bands = bandwidth_summary(&set).unwrap();
    let j = &fim.values / fim.scale;
    for i in 0..9 {
        let f_r = 1.0 + (bands.beta_k[i % 3] / FC).powi(2);
        let expect = 4.0 * PI * PI * zeta.norm_sqr() * FC * FC * f_r;
        assert!(rel(j[(i, i)], expect) < 1e-3);
        assert!(rel(j[(i, 9)], TAU * zeta.im * FC) < 1e-3);
        assert!(rel(j[(i, 10)], -TAU * zeta.re * FC) < 1e-3);
    }
    // the nuisance block is MN times the identity
    assert!(rel(j[(9, 9)], 9.0) < 1e-3 && rel(j[(10, 10)], 9.0) < 1e-3);
    assert!(j[(9, 10)].abs() < 1e-3);
}

#[test]
fn real_zeta_zeroes_first_coupling_column() {
    let set = waveforms(2048);
    let layout = random_layout(&mut ChaCha8Rng::seed_from_u64(9), 3, 2);
    let delays = layout.path_delays(&Point2::default(), PropagationConstant::default());
    let ch = CoherentChannel { zeta: Complex64::new(1.3, 0.0), sigma_w_sq: 1.0, carrier_frequency: FC };
    let fim = fim_numeric_coherent(&set, &delays, &ch).unwrap();
    let j = &fim.values / fim.scale;
    for i in 0..6 {
        assert!(j[(i, 6)].abs() < 1e-3 * TAU * FC);
    }
}

#[test]
fn zero_amplitude_path_carries_no_delay_information() {
    let set = waveforms(2048);
    let layout = random_layout(&mut ChaCha8Rng::seed_from_u64(2), 3, 1);
    let delays = layout.path_delays(&Point2::default(), PropagationConstant::default());
    let mut ch = NoncoherentChannel::unit(3, 1.0);
    ch.alpha[1] = Complex64::new(0.0, 0.0);
    let fim = fim_numeric_noncoherent(&set, &delays, &ch).unwrap();
    assert_eq!(fim.values[(1, 1)], 0.0);
}

#[test]
fn oracle_bounds_match_closed_forms() {
    let set = waveforms(4096);
    let bands = bandwidth_summary(&set).unwrap();
    let c = PropagationConstant::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..3 {
        let layout = random_layout(&mut rng, 3, 3);
        let target = Point2::new(rng.gen_range(-200.0..200.0), rng.gen_range(-200.0..200.0));
        let delays = layout.path_delays(&target, c);
        let bearings = bearing_angles(&layout, &target).unwrap();

        let coh = CoherentChannel { zeta: Complex64::from_polar(1.0, 0.3), sigma_w_sq: 0.05, carrier_frequency: FC };
        let closed = crlb_coherent(&bearings, &coh, Some(&bands), c).unwrap();
        let fim = fim_numeric_coherent(&set, &delays, &coh).unwrap();
        let numeric = crlb_from_fim(&fim, &bearings, c, CrlbMode::Coherent).unwrap();
        assert!(rel(numeric.trace(), closed.trace()) < 1e-3);
        assert!((numeric - closed.covariance).amax() < 1e-3 * closed.trace());

        let nc = NoncoherentChannel::unit(9, 0.05);
        let closed = crlb_noncoherent(&bearings, &nc, &bands, c).unwrap();
        let fim = fim_numeric_noncoherent(&set, &delays, &nc).unwrap();
        let numeric = crlb_from_fim(&fim, &bearings, c, CrlbMode::Noncoherent).unwrap();
        assert!(rel(numeric.trace(), closed.trace()) < 1e-3);
        assert!(numeric.symmetric_eigenvalues().iter().all(|&e| e > 0.0));
    }
}

#[test]
fn finite_differences_track_exact_spectral_derivatives() {
    // two waveforms sharing spectrum: correlated, so every block is populated
    let base = waveforms(1024);
    let s0 = base.samples(0).to_vec();
    let s1: Vec<Complex64> = base.samples(0).iter().zip(base.samples(1)).map(|(a, b)| a + b * 0.5).collect();
    let set = WaveformSet::normalized(FS, FC, vec![s0, s1]).unwrap();
    let dt = set.sample_period();
    let delays = [100.3 * dt, 103.9 * dt];
    let alpha = vec![Complex64::new(0.7, 0.2), Complex64::new(-0.4, 1.1)];
    let ch = NoncoherentChannel { alpha: alpha.clone(), sigma_w_sq: 1.0 };
    let fim = fim_numeric_noncoherent(&set, &delays, &ch).unwrap();
    assert!(fim.asymmetry() < 1e-9);
    // exact second derivative of the cross-correlation from the spectra
    let freqs = set.frequencies();
    let n = set.num_samples() as f64;
    let u = delays[1] - delays[0];
    let x2: Complex64 = (0..set.num_samples())
        .map(|m| {
            let w = Complex64::new(0.0, TAU * freqs[m]);
            set.spectrum(0)[m] * set.spectrum(1)[m].conj() * w * w * Complex64::from_polar(1.0, TAU * freqs[m] * u)
        })
        .sum::<Complex64>()
        * (dt / n);
    let expect = 2.0 * (alpha[0] * alpha[1].conj() * -x2).re;
    assert!(rel(fim.values[(0, 1)], expect) < 1e-6, "{} vs {expect}", fim.values[(0, 1)]);
}

#[test]
fn carrier_must_be_resolved_by_the_step() {
    let set = WaveformSet::frequency_division(1, FS, 512, 0.6e6, 0.0).unwrap();
    let ch = CoherentChannel { zeta: Complex64::new(1.0, 0.0), sigma_w_sq: 1.0, carrier_frequency: 5.0 * FS };
    assert!(matches!(fim_numeric_coherent(&set, &[1e-6], &ch), Err(Error::InvalidParameter(_))));
    let ch = CoherentChannel { carrier_frequency: FC, ..ch };
    assert!(matches!(fim_numeric_coherent(&set, &[0.0], &ch), Err(Error::DelayOutOfRange { .. })));
}
