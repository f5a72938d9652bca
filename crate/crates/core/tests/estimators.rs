use mimoloc::crlb::{crlb_coherent, CoherentChannel};
use mimoloc::estimators::{
    matched_filter_delays, mle_grid_search, monte_carlo, monte_carlo_with, DelayWindow, McMode, MonteCarloConfig,
};
use mimoloc::geometry::{bearing_angles, Point2, PropagationConstant, Rect, SensorLayout};
use mimoloc::scenarios::{default_waveforms, symmetric_layout, three_by_four, CARRIER};
use mimoloc::waveforms::{synthesize_from_delays, PathAmplitudes, WaveformSet};
use mimoloc::{Error, Exec};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn three_by_three() -> SensorLayout {
    symmetric_layout(3, 0.0, 3, 0.5, 3000.0, Point2::default()).unwrap()
}

fn mc_config(mode: McMode) -> MonteCarloConfig {
    MonteCarloConfig {
        trials: 400,
        seed: 99,
        layout: three_by_four(3000.0),
        target: Point2::new(15.0, -20.0),
        expansion_point: None,
        snr_db: 30.0,
        zeta: Complex64::new(1.0, 0.0),
        carrier_frequency: CARRIER,
        c: PropagationConstant::default(),
        mode,
    }
}

#[test]
fn matched_filter_recovers_grid_aligned_delays() {
    let set = default_waveforms(3).unwrap();
    let dt = set.sample_period();
    let delays: Vec<f64> = [400, 431, 457, 512, 530, 601].iter().map(|k| *k as f64 * dt).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rx = synthesize_from_delays(&set, &delays, PathAmplitudes::Coherent(Complex64::new(1.0, 0.0)), 0.0, &mut rng).unwrap();
    assert_eq!(rx.len(), 2);
    let windows: Vec<_> = delays.iter().map(|t| DelayWindow::around(*t, 20.0 * dt)).collect();
    let obs = matched_filter_delays(&rx, &set, &windows).unwrap();
    for (est, truth) in obs.mu.iter().zip(&delays) {
        assert!((est - truth).abs() < dt / 16.0, "{est} vs {truth}");
    }
}

#[test]
fn matched_filter_recovers_fractional_delays() {
    let set = default_waveforms(3).unwrap();
    let dt = set.sample_period();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let delays: Vec<f64> = (0..9).map(|_| rng.gen_range(300.0..900.0) * dt).collect();
    let rx = synthesize_from_delays(&set, &delays, PathAmplitudes::Coherent(Complex64::new(0.7, 0.0)), 0.0, &mut rng).unwrap();
    let obs = matched_filter_delays(&rx, &set, &[DelayWindow::around(600.0 * dt, 320.0 * dt)]);
    // one shared window covering all paths
    let obs = obs.unwrap();
    let lambda_t = 1.0 / CARRIER;
    for (est, truth) in obs.mu.iter().zip(&delays) {
        assert!((est - truth).abs() < 1e-3 * lambda_t, "{est} vs {truth}");
    }
}

#[test]
fn noise_only_input_mostly_peaks_on_the_window_edge() {
    let set = default_waveforms(3).unwrap();
    let dt = set.sample_period();
    let ns = set.num_samples();
    let window = [DelayWindow { start: 500.0 * dt, end: 502.0 * dt }];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut not_found = 0;
    for _ in 0..200 {
        let noise: Vec<Vec<Complex64>> = (0..3)
            .map(|_| (0..ns).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect())
            .collect();
        match matched_filter_delays(&noise, &set, &window) {
            Err(Error::PeakNotFound { .. }) => not_found += 1,
            Ok(_) => {}
            Err(e) => panic!("unexpected {e}"),
        }
    }
    assert!(not_found > 100, "{not_found} of 200");

    // the same window centred on a clean echo resolves; the envelope is too
    // flat across three samples for this to hold under noise
    let delays = vec![501.0 * dt; 9];
    let rx = synthesize_from_delays(&set, &delays, PathAmplitudes::Coherent(Complex64::new(1.0, 0.0)), 0.0, &mut rng).unwrap();
    let obs = matched_filter_delays(&rx, &set, &window).unwrap();
    assert!(obs.mu.iter().all(|m| (m - 501.0 * dt).abs() < dt / 16.0));
}

#[test]
fn matched_filter_rejects_bad_shapes() {
    let set = default_waveforms(3).unwrap();
    let rx = vec![vec![Complex64::default(); set.num_samples()]; 2];
    let w = DelayWindow { start: 1e-6, end: 2e-6 };
    assert!(matches!(matched_filter_delays(&rx, &set, &[w; 4]), Err(Error::DimensionMismatch { .. })));
    assert!(matched_filter_delays(&[], &set, &[w]).is_err());
    let short = vec![vec![Complex64::default(); 10]; 2];
    assert!(matches!(matched_filter_delays(&short, &set, &[w]), Err(Error::DimensionMismatch { .. })));
}

fn coherent_echo(set: &WaveformSet, layout: &SensorLayout, target: &Point2, sigma_w_sq: f64, seed: u64) -> Vec<Vec<Complex64>> {
    let tau = layout.path_delays(target, PropagationConstant::default());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synthesize_from_delays(set, &tau, PathAmplitudes::Coherent(Complex64::from_polar(1.0, 0.7)), sigma_w_sq, &mut rng).unwrap()
}

#[test]
fn mle_recovers_noiseless_target_on_a_node() {
    let set = default_waveforms(3).unwrap();
    let layout = three_by_three();
    let c = PropagationConstant::default();
    let lambda = c.value() / CARRIER;
    let coarse = lambda / 4.0;
    let target = Point2::new(12.0, -31.0);
    let region = Rect::new(target.x - 20.0 * coarse, target.x + 20.0 * coarse, target.y - 17.0 * coarse, target.y + 23.0 * coarse)
        .unwrap();
    let rx = coherent_echo(&set, &layout, &target, 0.0, 0);
    let fine = lambda / 400.0;
    let r = mle_grid_search(&rx, &set, &layout, &region, coarse, fine, c).unwrap();
    assert!(!r.fine_step_warning);
    assert!((r.x_hat - target.x).abs() <= fine && (r.y_hat - target.y).abs() <= fine, "({}, {})", r.x_hat, r.y_hat);
}

#[test]
fn mle_rmse_tracks_coherent_bound_at_30db() {
    let set = default_waveforms(3).unwrap();
    let layout = three_by_three();
    let c = PropagationConstant::default();
    let lambda = c.value() / CARRIER;
    let target = Point2::new(15.0, -20.0);
    let region = Rect::around(target, 150.0).unwrap();
    let sigma_w_sq = 1e-3;
    let trials = 200;
    let mut se = 0.0;
    for t in 0..trials {
        let rx = coherent_echo(&set, &layout, &target, sigma_w_sq, t);
        let r = mle_grid_search(&rx, &set, &layout, &region, lambda / 4.0, lambda / 400.0, c).unwrap();
        se += (r.x_hat - target.x).powi(2) + (r.y_hat - target.y).powi(2);
    }
    let ch = CoherentChannel { zeta: Complex64::new(1.0, 0.0), sigma_w_sq, carrier_frequency: CARRIER };
    let b = bearing_angles(&layout, &target).unwrap();
    let eta = crlb_coherent(&b, &ch, None, c).unwrap().eta;
    let rmse = (se / trials as f64).sqrt();
    assert!(rmse < 2.0 * (2.0 * eta / 9.0).sqrt(), "rmse {rmse}, bound {}", (2.0 * eta / 9.0).sqrt());
}

#[test]
fn mle_flags_coarse_fine_step_and_edge_peaks() {
    let set = default_waveforms(3).unwrap();
    let layout = three_by_three();
    let c = PropagationConstant::default();
    let lambda = c.value() / CARRIER;
    let target = Point2::new(5.0, 5.0);
    let rx = coherent_echo(&set, &layout, &target, 0.0, 0);

    let r = mle_grid_search(&rx, &set, &layout, &Rect::around(target, 200.0).unwrap(), 2.0 * lambda, 0.6 * lambda, c).unwrap();
    assert!(r.fine_step_warning);

    let away = Rect::new(10.0, 200.0, -100.0, 100.0).unwrap();
    assert!(matches!(
        mle_grid_search(&rx, &set, &layout, &away, lambda / 4.0, lambda / 100.0, c),
        Err(Error::BoundaryMaximum)
    ));
    assert!(mle_grid_search(&rx, &set, &layout, &away, lambda / 100.0, lambda / 4.0, c).is_err());
}

#[test]
fn noiseless_monte_carlo_has_zero_error() {
    let mut cfg = mc_config(McMode::AnalyticDelays);
    cfg.snr_db = f64::INFINITY;
    cfg.trials = 100;
    let r = monte_carlo(&cfg).unwrap();
    assert_eq!(r.failures, 0);
    assert!(r.empirical_mse < 1e-18, "{}", r.empirical_mse);

    cfg.mode = McMode::FullSignal { waveforms: default_waveforms(3).unwrap(), window_half_width: 0.5e-6 };
    let r = monte_carlo(&cfg).unwrap();
    assert!(r.empirical_mse < 1e-6, "{}", r.empirical_mse);
}

#[test]
fn monte_carlo_is_deterministic_across_schedules() {
    let cfg = mc_config(McMode::AnalyticDelays);
    let a = monte_carlo_with(&cfg, Exec::Parallel).unwrap();
    let b = monte_carlo_with(&cfg, Exec::Sequential).unwrap();
    assert_eq!(a, b);
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(monte_carlo(&other).unwrap().empirical_mse, a.empirical_mse);

    let mut full = mc_config(McMode::FullSignal { waveforms: default_waveforms(3).unwrap(), window_half_width: 0.5e-6 });
    full.trials = 100;
    assert_eq!(monte_carlo_with(&full, Exec::Parallel).unwrap(), monte_carlo_with(&full, Exec::Sequential).unwrap());
}

#[test]
fn blue_is_unbiased_and_tracks_its_covariance() {
    let mut cfg = mc_config(McMode::AnalyticDelays);
    cfg.trials = 4000;
    let r = monte_carlo(&cfg).unwrap();
    let sd = (r.theoretical_trace / 2.0 / r.trials as f64).sqrt();
    assert!(r.mean_error.0.abs() < 4.0 * sd && r.mean_error.1.abs() < 4.0 * sd, "{:?} vs {sd}", r.mean_error);
    assert!((0.9..1.1).contains(&r.ratio), "{}", r.ratio);
}

#[test]
fn linearizing_away_from_the_target_still_converges() {
    let mut cfg = mc_config(McMode::AnalyticDelays);
    cfg.snr_db = f64::INFINITY;
    cfg.trials = 100;
    cfg.expansion_point = Some(Point2::new(14.0, -19.0));
    let r = monte_carlo(&cfg).unwrap();
    // one linear step from 1.4 m away leaves only a second-order residual
    assert!(r.empirical_mse.sqrt() < 1e-2, "{}", r.empirical_mse);
}

#[test]
fn monte_carlo_validates_its_config() {
    let mut cfg = mc_config(McMode::AnalyticDelays);
    cfg.trials = 50;
    assert!(monte_carlo(&cfg).is_err());
    let mut cfg = mc_config(McMode::FullSignal { waveforms: default_waveforms(3).unwrap(), window_half_width: 0.5e-6 });
    cfg.carrier_frequency = 2.0 * CARRIER;
    assert!(monte_carlo(&cfg).is_err());
}
