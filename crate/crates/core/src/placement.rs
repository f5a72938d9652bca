//! Sensor placement on the bearing circle.
//!
//! Sensors are parametrized by bearing angle only: the coherent bound depends
//! on the angles alone, so the radius of each sensor is irrelevant here.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{Point2, SensorLayout};

/// Residual tolerance below which a constellation counts as optimal.
pub const OPTIMALITY_TOL: f64 = 1e-9;

/// Arithmetic means of `cos`, `sin`, `cos²`, `sin²`, `cos·sin`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TMoments {
    pub a: f64,
    pub b: f64,
    pub a2: f64,
    pub b2: f64,
    pub ab: f64,
}

pub fn t_moments(angles: &[f64]) -> TMoments {
    let n = angles.len().max(1) as f64;
    let mut t = TMoments { a: 0.0, b: 0.0, a2: 0.0, b2: 0.0, ab: 0.0 };
    for &x in angles {
        let (s, c) = x.sin_cos();
        t.a += c;
        t.b += s;
        t.a2 += c * c;
        t.b2 += s * s;
        t.ab += c * s;
    }
    t.a /= n;
    t.b /= n;
    t.a2 /= n;
    t.b2 /= n;
    t.ab /= n;
    t
}

fn wrap(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// `count` equally spaced angles starting at `rotation`, wrapped to `[0, 2π)`.
pub fn symmetric_constellation(count: usize, rotation: f64) -> Result<Vec<f64>> {
    if count < 3 {
        return Err(Error::TooFewSensors(count));
    }
    Ok((0..count).map(|i| wrap(rotation + TAU * i as f64 / count as f64)).collect())
}

/// Union of symmetric subsets given as `(count, rotation)` pairs.
pub fn superpose(subsets: &[(usize, f64)]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for &(count, rot) in subsets {
        out.extend(symmetric_constellation(count, rot)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleConstellation {
    pub tx_angles: Vec<f64>,
    pub rx_angles: Vec<f64>,
    /// Rotation of each symmetric subset the sets were built from, if known.
    pub tx_offsets: Vec<f64>,
    pub rx_offsets: Vec<f64>,
}

impl AngleConstellation {
    pub fn new(tx_angles: Vec<f64>, rx_angles: Vec<f64>) -> Self {
        Self {
            tx_angles: tx_angles.into_iter().map(wrap).collect(),
            rx_angles: rx_angles.into_iter().map(wrap).collect(),
            tx_offsets: Vec::new(),
            rx_offsets: Vec::new(),
        }
    }

    /// Superposition of symmetric subsets on each side.
    pub fn from_subsets(tx: &[(usize, f64)], rx: &[(usize, f64)]) -> Result<Self> {
        Ok(Self {
            tx_angles: superpose(tx)?,
            rx_angles: superpose(rx)?,
            tx_offsets: tx.iter().map(|s| wrap(s.1)).collect(),
            rx_offsets: rx.iter().map(|s| wrap(s.1)).collect(),
        })
    }

    pub fn num_tx(&self) -> usize {
        self.tx_angles.len()
    }

    pub fn num_rx(&self) -> usize {
        self.rx_angles.len()
    }

    /// Rigid rotation of every angle.
    pub fn rotated(&self, angle: f64) -> Self {
        let r = |v: &[f64]| v.iter().map(|x| wrap(x + angle)).collect::<Vec<_>>();
        Self {
            tx_angles: r(&self.tx_angles),
            rx_angles: r(&self.rx_angles),
            tx_offsets: r(&self.tx_offsets),
            rx_offsets: r(&self.rx_offsets),
        }
    }

    /// Physical layout realizing these bearings toward `center`: each sensor
    /// sits at distance `radius` opposite its bearing.
    pub fn to_layout(&self, center: Point2, radius: f64) -> Result<SensorLayout> {
        let opp = |v: &[f64]| v.iter().map(|a| a + std::f64::consts::PI).collect::<Vec<_>>();
        SensorLayout::on_circle(center, radius, &opp(&self.tx_angles), &opp(&self.rx_angles))
    }
}

/// Coherent trace in units of `η_c` (narrowband factors 1); `+∞` when singular.
pub fn unit_coherent_trace(tx: &[f64], rx: &[f64]) -> f64 {
    // rank of the deflated information is at most MN - 1
    if tx.len() * rx.len() < 3 {
        return f64::INFINITY;
    }
    let txs: Vec<(f64, f64)> = tx.iter().map(|x| x.sin_cos()).collect();
    let rxs: Vec<(f64, f64)> = rx.iter().map(|x| x.sin_cos()).collect();
    let (mut sa, mut sb, mut gx, mut gy, mut h) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(sr, cr) in &rxs {
        for &(st, ct) in &txs {
            let a = ct + cr;
            let b = st + sr;
            sa += a;
            sb += b;
            gx += b * b;
            gy += a * a;
            h -= a * b;
        }
    }
    let mn = (tx.len() * rx.len()) as f64;
    gx -= sb * sb / mn;
    gy -= sa * sa / mn;
    h += sa * sb / mn;
    let det = gx * gy - h * h;
    if det > crate::crlb::EPS_DET * (gx * gy).abs() && det.is_finite() {
        (gx + gy) / det
    } else {
        f64::INFINITY
    }
}

/// Whether the global floor `2η_c/(MN)` can be attained with `M` transmitters
/// and `N` receivers at all.
///
/// The floor needs zero-mean bearings on both sides whose second moments
/// complement each other. A single sensor on either side cannot have a zero
/// mean. With exactly two sensors on one side they must be antipodal, so the
/// other side's mean outer product must be a rank-one projector, which a
/// zero-mean set only achieves as antipodal pairs.
pub fn optimum_reachable(m: usize, n: usize) -> bool {
    m >= 2 && n >= 2 && (m != 2 || n.is_multiple_of(2)) && (n != 2 || m.is_multiple_of(2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityReport {
    /// `T(a_tx)`, `T(b_tx)`, `T(a_rx)`, `T(b_rx)`, `T(a_tx b_tx) + T(a_rx b_rx)`,
    /// `T(b²_tx) + T(b²_rx) - 1`, `T(a²_tx) + T(a²_rx) - 1`.
    pub residuals: [f64; 7],
    pub is_optimal: bool,
    /// False when no constellation of this size can attain the floor.
    pub reachable: bool,
    pub mu: f64,
    pub trace: f64,
}

impl OptimalityReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

pub fn optimality_residuals(constellation: &AngleConstellation, eta_c: f64) -> OptimalityReport {
    let t = t_moments(&constellation.tx_angles);
    let r = t_moments(&constellation.rx_angles);
    let residuals = [t.a, t.b, r.a, r.b, t.ab + r.ab, t.b2 + r.b2 - 1.0, t.a2 + r.a2 - 1.0];
    let max = residuals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    OptimalityReport {
        residuals,
        is_optimal: max < OPTIMALITY_TOL,
        reachable: optimum_reachable(constellation.num_tx(), constellation.num_rx()),
        mu: t.b2 + r.b2,
        trace: eta_c * unit_coherent_trace(&constellation.tx_angles, &constellation.rx_angles),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktSolution {
    pub mu_star: f64,
    pub t_star: f64,
    pub lambda_star: [f64; 4],
    /// Grid location of the minimum of `1/(2-μ) + 1/μ` over `(0.01, 1.99)`.
    pub scan_argmin: f64,
    pub scan_min: f64,
}

/// Reduced objective of the convex placement problem.
pub fn reduced_objective(mu: f64) -> f64 {
    1.0 / (2.0 - mu) + 1.0 / mu
}

/// Closed-form KKT point, confirmed by a brute-force scan with step 1e-4.
pub fn solve_kkt() -> KktSolution {
    let steps = ((1.99 - 0.01) / 1e-4_f64).round() as usize;
    let (mut best_mu, mut best) = (0.01, f64::INFINITY);
    for i in 0..=steps {
        let mu = 0.01 + i as f64 * 1e-4;
        let v = reduced_objective(mu);
        if v < best {
            best = v;
            best_mu = mu;
        }
    }
    KktSolution {
        mu_star: 1.0,
        t_star: 2.0,
        lambda_star: [1.0, 0.0, 0.0, 0.0],
        scan_argmin: best_mu,
        scan_min: best,
    }
}

pub fn optimal_trace(m: usize, n: usize, eta_c: f64) -> f64 {
    2.0 * eta_c / (m * n) as f64
}

pub fn simo_trace(mn: usize, eta_c: f64) -> f64 {
    4.0 * eta_c / mn as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementResult {
    pub constellation: AngleConstellation,
    pub trace: f64,
    pub restart: usize,
    pub iterations: usize,
}

/// Derivative-free simplex minimization of the coherent trace over the
/// `M + N` bearing angles, best of `restarts` random starts.
pub fn optimize_placement(m: usize, n: usize, eta_c: f64, restarts: usize, seed: u64) -> Result<PlacementResult> {
    optimize_placement_with(m, n, eta_c, restarts, seed, Exec::default())
}

pub fn optimize_placement_with(
    m: usize,
    n: usize,
    eta_c: f64,
    restarts: usize,
    seed: u64,
    exec: Exec,
) -> Result<PlacementResult> {
    if m == 0 || n == 0 || restarts == 0 {
        return Err(Error::InvalidParameter("need M, N and restarts all at least 1".into()));
    }
    if !(eta_c.is_finite() && eta_c > 0.0) {
        return Err(Error::InvalidParameter(format!("eta_c {eta_c}")));
    }
    let dim = m + n;
    let objective = |x: &[f64]| unit_coherent_trace(&x[..m], &x[m..]);
    let runs = exec.map_range(restarts, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let x0: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..TAU)).collect();
        let (x, f, it) = nelder_mead(&objective, &x0, 0.5, 200 * dim, 1e-12);
        (r, x, f, it)
    });
    let best = runs
        .into_iter()
        .filter(|r| r.2.is_finite())
        .min_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)))
        .ok_or(Error::DegenerateOptimum)?;
    let (restart, x, f, iterations) = best;
    log::debug!("placement {m}x{n}: best restart {restart}, {iterations} iterations, trace/eta {f}");
    Ok(PlacementResult {
        constellation: AngleConstellation::new(x[..m].to_vec(), x[m..].to_vec()),
        trace: eta_c * f,
        restart,
        iterations,
    })
}

/// Nelder-Mead with standard coefficients. The simplex is rebuilt around the
/// incumbent whenever it collapses, until a rebuild stops improving the
/// value or the iteration budget runs out. Returns `(x, f(x), iterations)`.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    step: f64,
    max_iter: usize,
    rel_tol: f64,
) -> (Vec<f64>, f64, usize) {
    let d = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut best_x = x0.to_vec();
    let mut best_f = eval(x0);
    let mut iters = 0;
    let mut scale = step;
    while iters < max_iter {
        let mut simplex: Vec<Vec<f64>> = vec![best_x.clone()];
        for i in 0..d {
            let mut v = best_x.clone();
            v[i] += scale;
            simplex.push(v);
        }
        let mut vals: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();
        let start_f = best_f;
        loop {
            let mut order: Vec<usize> = (0..=d).collect();
            order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            vals = order.iter().map(|&i| vals[i]).collect();
            let (lo, hi) = (vals[0], vals[d]);
            if iters >= max_iter || (lo.is_finite() && hi - lo <= rel_tol * lo.abs()) {
                break;
            }
            iters += 1;
            let centroid: Vec<f64> =
                (0..d).map(|j| simplex[..d].iter().map(|v| v[j]).sum::<f64>() / d as f64).collect();
            let along = |t: f64| -> Vec<f64> {
                centroid.iter().zip(&simplex[d]).map(|(c, w)| c + t * (w - c)).collect()
            };
            let xr = along(-1.0);
            let fr = eval(&xr);
            if fr < vals[0] {
                let xe = along(-2.0);
                let fe = eval(&xe);
                if fe < fr {
                    simplex[d] = xe;
                    vals[d] = fe;
                } else {
                    simplex[d] = xr;
                    vals[d] = fr;
                }
            } else if fr < vals[d - 1] {
                simplex[d] = xr;
                vals[d] = fr;
            } else {
                let (xc, fc) = if fr < vals[d] {
                    let x = along(-0.5);
                    let v = eval(&x);
                    (x, v)
                } else {
                    let x = along(0.5);
                    let v = eval(&x);
                    (x, v)
                };
                if fc < vals[d].min(fr) {
                    simplex[d] = xc;
                    vals[d] = fc;
                } else {
                    let (best, rest) = simplex.split_at_mut(1);
                    for (row, v) in rest.iter_mut().zip(vals[1..].iter_mut()) {
                        for (x, b) in row.iter_mut().zip(&best[0]) {
                            *x = b + 0.5 * (*x - b);
                        }
                        *v = eval(row);
                    }
                }
            }
        }
        let improved = vals[0] < start_f && (start_f - vals[0]) > rel_tol * vals[0].abs();
        if vals[0] < best_f {
            best_f = vals[0];
            best_x = simplex[0].clone();
        }
        if !improved && best_f.is_finite() {
            break;
        }
        scale = (scale * 0.5).max(1e-6);
    }
    (best_x.into_iter().map(wrap).collect(), best_f, iters)
}
