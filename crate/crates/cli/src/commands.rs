use std::path::Path;

use mimoloc::crlb::{crlb_coherent, crlb_noncoherent, CoherentChannel, CrlbResult, NoncoherentChannel};
use mimoloc::estimators::{delay_error_covariance, localize_blue, monte_carlo, DelayObservations, McMode, MonteCarloConfig};
use mimoloc::gdop::{gdop_at, gdop_grid};
use mimoloc::geometry::bearing_angles;
use mimoloc::placement::{optimal_trace, optimality_residuals, optimize_placement, simo_trace};
use serde::Serialize;

use crate::config::{digest, LoadedConfig};
use crate::error::CliError;
use crate::report::{finite, gdop_csv, Report};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BoundMode {
    Coherent,
    Noncoherent,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    Analytic,
    Full,
}

#[derive(Debug, Serialize)]
pub struct BoundSummary {
    pub eta: f64,
    pub g_x: f64,
    pub g_y: f64,
    pub h: f64,
    pub sigma_x_sq: f64,
    pub sigma_y_sq: f64,
    pub trace: f64,
    /// `2η/(MN)`, the trace of an optimal constellation.
    pub optimal_trace: f64,
}

impl BoundSummary {
    fn new(r: &CrlbResult, paths: usize) -> Self {
        Self {
            eta: r.eta,
            g_x: r.g_x,
            g_y: r.g_y,
            h: r.h,
            sigma_x_sq: r.sigma_x_sq,
            sigma_y_sq: r.sigma_y_sq,
            trace: r.trace(),
            optimal_trace: 2.0 * r.eta / paths as f64,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CrlbOutput {
    pub target: [f64; 2],
    pub paths: usize,
    pub coherent: Option<BoundSummary>,
    pub noncoherent: Option<BoundSummary>,
    /// `√(trace_nc / trace_c)`.
    pub coherency_gain: Option<f64>,
}

pub fn run_crlb(loaded: &LoadedConfig, mode: BoundMode) -> Result<Report<CrlbOutput>, CliError> {
    let cfg = &loaded.config;
    let target = cfg.target()?;
    let layout = cfg.layout()?;
    let c = cfg.propagation()?;
    let bearings = bearing_angles(&layout, &target)?;
    let paths = layout.num_paths();
    let sigma_w_sq = cfg.sigma_w_sq();

    let coherent = if mode != BoundMode::Noncoherent {
        let ch = CoherentChannel { zeta: cfg.zeta.complex(), sigma_w_sq, carrier_frequency: cfg.carrier_frequency };
        let bands = if cfg.wideband_correction { Some(cfg.bandwidths()?) } else { None };
        Some(crlb_coherent(&bearings, &ch, bands.as_ref(), c)?)
    } else {
        None
    };
    let noncoherent = if mode != BoundMode::Coherent {
        let ch = NoncoherentChannel { alpha: cfg.alpha(paths)?, sigma_w_sq };
        Some(crlb_noncoherent(&bearings, &ch, &cfg.bandwidths()?, c)?)
    } else {
        None
    };
    let coherency_gain = match (&coherent, &noncoherent) {
        (Some(co), Some(nc)) => Some((nc.trace() / co.trace()).sqrt()),
        _ => None,
    };
    Ok(Report::new(
        "crlb",
        loaded.digest.clone(),
        CrlbOutput {
            target: [target.x, target.y],
            paths,
            coherent: coherent.as_ref().map(|r| BoundSummary::new(r, paths)),
            noncoherent: noncoherent.as_ref().map(|r| BoundSummary::new(r, paths)),
            coherency_gain,
        },
    ))
}

#[derive(Debug, Serialize)]
pub struct GdopOutput {
    pub out: String,
    pub nx: usize,
    pub ny: usize,
    pub degenerate_cells: usize,
    pub min_gdop: Option<f64>,
    pub min_cell: Option<[usize; 2]>,
    pub min_point: Option<[f64; 2]>,
}

pub fn run_gdop(loaded: &LoadedConfig, out: &Path) -> Result<Report<GdopOutput>, CliError> {
    let cfg = &loaded.config;
    let (extent, nx, ny) = cfg.region()?;
    let layout = cfg.layout()?;
    let grid = gdop_grid(&layout, &extent, nx, ny)?;
    std::fs::write(out, gdop_csv(&grid)).map_err(|source| CliError::Io { path: out.to_owned(), source })?;
    let min = grid.min();
    Ok(Report::new(
        "gdop",
        loaded.digest.clone(),
        GdopOutput {
            out: out.display().to_string(),
            nx,
            ny,
            degenerate_cells: grid.values.iter().filter(|v| !v.is_finite()).count(),
            min_gdop: min.map(|m| m.2),
            min_cell: min.map(|m| [m.0, m.1]),
            min_point: min.map(|m| {
                let p = grid.cell_center(m.0, m.1);
                [p.x, p.y]
            }),
        },
    ))
}

#[derive(Debug, Serialize)]
pub struct OptimizeArgs {
    pub transmitters: usize,
    pub receivers: usize,
    pub restarts: usize,
    pub seed: u64,
    pub eta: f64,
}

#[derive(Debug, Serialize)]
pub struct OptimizeOutput {
    pub transmitters: usize,
    pub receivers: usize,
    pub restarts: usize,
    pub seed: u64,
    pub eta: f64,
    pub tx_angles: Vec<f64>,
    pub rx_angles: Vec<f64>,
    pub trace: f64,
    pub bound: f64,
    pub simo_bound: f64,
    pub trace_over_bound: f64,
    pub residuals: [f64; 7],
    pub max_residual: f64,
    pub is_optimal: bool,
    pub reachable: bool,
    pub note: Option<&'static str>,
    pub best_restart: usize,
}

pub fn run_optimize(args: &OptimizeArgs) -> Result<Report<OptimizeOutput>, CliError> {
    let (m, n, eta) = (args.transmitters, args.receivers, args.eta);
    let r = optimize_placement(m, n, eta, args.restarts, args.seed)?;
    let rep = optimality_residuals(&r.constellation, eta);
    let bound = optimal_trace(m, n, eta);
    let canonical = serde_json::to_vec(args).expect("arguments serialize");
    Ok(Report::new(
        "optimize",
        digest(&canonical),
        OptimizeOutput {
            transmitters: m,
            receivers: n,
            restarts: args.restarts,
            seed: args.seed,
            eta,
            tx_angles: r.constellation.tx_angles.clone(),
            rx_angles: r.constellation.rx_angles.clone(),
            trace: r.trace,
            bound,
            simo_bound: simo_trace(m * n, eta),
            trace_over_bound: r.trace / bound,
            residuals: rep.residuals,
            max_residual: rep.max_residual(),
            is_optimal: rep.is_optimal,
            reachable: rep.reachable,
            note: (!rep.reachable).then_some("optimum unreachable"),
            best_restart: r.restart,
        },
    ))
}

#[derive(Debug, Serialize)]
pub struct BlueOutput {
    pub expansion_point: [f64; 2],
    pub x_hat: f64,
    pub y_hat: f64,
    /// Estimated common range offset `-cΔ`, meters.
    pub offset: f64,
    pub covariance: [[f64; 2]; 2],
    pub trace: f64,
    pub sigma_eps: f64,
    pub gdop: Option<f64>,
}

pub fn run_blue(loaded: &LoadedConfig) -> Result<Report<BlueOutput>, CliError> {
    let cfg = &loaded.config;
    let layout = cfg.layout()?;
    let c = cfg.propagation()?;
    let expansion = match (cfg.expansion_point(), cfg.target) {
        (Some(p), _) => p,
        (None, Some(_)) => cfg.target()?,
        (None, None) => return Err(CliError::Usage("config needs \"expansion_point\" or \"target\"".into())),
    };
    let mu = match (&cfg.delays, cfg.target) {
        (Some(d), _) => d.clone(),
        (None, Some(_)) => layout.path_delays(&cfg.target()?, c),
        (None, None) => return Err(CliError::Usage("config needs \"delays\" or \"target\"".into())),
    };
    let err = delay_error_covariance(cfg.carrier_frequency, cfg.zeta.magnitude.powi(2), cfg.sigma_w_sq())?;
    let r = localize_blue(&DelayObservations::new(mu)?, &layout, &expansion, &err, c)?;
    let p = r.position_covariance;
    Ok(Report::new(
        "blue",
        loaded.digest.clone(),
        BlueOutput {
            expansion_point: [expansion.x, expansion.y],
            x_hat: r.x_hat,
            y_hat: r.y_hat,
            offset: r.offset_hat,
            covariance: [[p[(0, 0)], p[(0, 1)]], [p[(1, 0)], p[(1, 1)]]],
            trace: p.trace(),
            sigma_eps: err.std_dev(),
            gdop: finite(gdop_at(&layout, &expansion)),
        },
    ))
}

#[derive(Debug, Serialize)]
pub struct SimulateOutput {
    pub mode: SimMode,
    pub trials: usize,
    pub seed: u64,
    pub snr_db: f64,
    pub sigma_w_sq: f64,
    pub failures: usize,
    pub empirical_mse: f64,
    pub theoretical_trace: f64,
    pub ratio: f64,
    pub mean_error: [f64; 2],
    pub delay_variance_ratio: Option<f64>,
    pub tolerance: [f64; 2],
    pub within_tolerance: bool,
}

pub fn run_simulate(
    loaded: &LoadedConfig,
    mode: SimMode,
    trials: usize,
    seed: Option<u64>,
) -> Result<Report<SimulateOutput>, CliError> {
    let cfg = &loaded.config;
    if trials < 100 {
        return Err(CliError::Usage(format!("--trials must be at least 100, got {trials}")));
    }
    let tolerance = cfg.tolerance.unwrap_or(match mode {
        SimMode::Analytic => [0.95, 1.05],
        SimMode::Full => [0.8, 1.3],
    });
    let mc_mode = match mode {
        SimMode::Analytic => McMode::AnalyticDelays,
        SimMode::Full => McMode::FullSignal { waveforms: cfg.waveforms()?, window_half_width: cfg.window_half_width },
    };
    let seed = seed.unwrap_or(cfg.seed);
    let mc = MonteCarloConfig {
        trials,
        seed,
        layout: cfg.layout()?,
        target: cfg.target()?,
        expansion_point: cfg.expansion_point(),
        snr_db: cfg.snr_db,
        zeta: cfg.zeta.complex(),
        carrier_frequency: cfg.carrier_frequency,
        c: cfg.propagation()?,
        mode: mc_mode,
    };
    let r = monte_carlo(&mc)?;
    Ok(Report::new(
        "simulate",
        loaded.digest.clone(),
        SimulateOutput {
            mode,
            trials,
            seed,
            snr_db: cfg.snr_db,
            sigma_w_sq: r.sigma_w_sq,
            failures: r.failures,
            empirical_mse: r.empirical_mse,
            theoretical_trace: r.theoretical_trace,
            ratio: r.ratio,
            mean_error: [r.mean_error.0, r.mean_error.1],
            delay_variance_ratio: r.delay_variance_ratio(),
            tolerance,
            within_tolerance: (tolerance[0]..=tolerance[1]).contains(&r.ratio),
        },
    ))
}
