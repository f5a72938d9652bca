//! Planar sensor/target geometry.
//!
//! Paths are indexed receiver-major throughout the crate: the path from
//! transmitter `k` to receiver `l` has index `l * M + k` (zero based).

use nalgebra::{Matrix2xX, MatrixXx3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Sensors closer than this to a reference point have no defined bearing.
pub const COINCIDENCE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Point at `radius` from `self` in direction `angle`.
    pub fn offset_polar(&self, radius: f64, angle: f64) -> Point2 {
        Point2::new(self.x + radius * angle.cos(), self.y + radius * angle.sin())
    }

    /// Rotate about `center` by `angle` radians.
    pub fn rotate_about(&self, center: &Point2, angle: f64) -> Point2 {
        let (s, c) = angle.sin_cos();
        let dx = self.x - center.x;
        let dy = self.y - center.y;
        Point2::new(center.x + c * dx - s * dy, center.y + s * dx + c * dy)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(p: [f64; 2]) -> Self {
        Point2::new(p[0], p[1])
    }
}

/// Axis-aligned rectangle, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let r = Self { x_min, x_max, y_min, y_max };
        r.validate()?;
        Ok(r)
    }

    /// Square of half-width `half` around `center`.
    pub fn around(center: Point2, half: f64) -> Result<Self> {
        Self::new(center.x - half, center.x + half, center.y - half, center.y + half)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.x_min, self.x_max, self.y_min, self.y_max];
        if !all.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteInput("rectangle bounds"));
        }
        if !(self.x_max > self.x_min && self.y_max > self.y_min) {
            return Err(Error::InvalidParameter(format!("empty rectangle {self:?}")));
        }
        Ok(())
    }

    pub fn center(&self) -> Point2 {
        Point2::new(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }
}

/// Propagation speed, strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationConstant(f64);

impl PropagationConstant {
    pub fn new(c: f64) -> Result<Self> {
        if c.is_finite() && c > 0.0 {
            Ok(Self(c))
        } else {
            Err(Error::InvalidParameter(format!(
                "propagation speed must be positive and finite, got {c}"
            )))
        }
    }

    /// Dimensionless `c = 1`, handy for unit-free checks.
    pub const fn unit() -> Self {
        Self(1.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for PropagationConstant {
    fn default() -> Self {
        Self(SPEED_OF_LIGHT)
    }
}

/// Positions of `M` transmitters and `N` receivers, meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorLayout {
    tx: Vec<Point2>,
    rx: Vec<Point2>,
}

impl SensorLayout {
    pub fn new(tx: Vec<Point2>, rx: Vec<Point2>) -> Result<Self> {
        if tx.is_empty() || rx.is_empty() {
            return Err(Error::InvalidParameter(
                "layout needs at least one transmitter and one receiver".into(),
            ));
        }
        if !tx.iter().chain(rx.iter()).all(Point2::is_finite) {
            return Err(Error::NonFiniteInput("sensor coordinates"));
        }
        Ok(Self { tx, rx })
    }

    /// Sensors on a circle of `radius` about `center`, placed at the given
    /// angles (the bearing of each sensor *toward* the center is its angle + π).
    pub fn on_circle(
        center: Point2,
        radius: f64,
        tx_angles: &[f64],
        rx_angles: &[f64],
    ) -> Result<Self> {
        let tx = tx_angles.iter().map(|&a| center.offset_polar(radius, a)).collect();
        let rx = rx_angles.iter().map(|&a| center.offset_polar(radius, a)).collect();
        Self::new(tx, rx)
    }

    pub fn tx(&self) -> &[Point2] {
        &self.tx
    }

    pub fn rx(&self) -> &[Point2] {
        &self.rx
    }

    pub fn num_tx(&self) -> usize {
        self.tx.len()
    }

    pub fn num_rx(&self) -> usize {
        self.rx.len()
    }

    pub fn num_paths(&self) -> usize {
        self.tx.len() * self.rx.len()
    }

    /// Rigid rotation of every sensor about `center`.
    pub fn rotated(&self, center: &Point2, angle: f64) -> Self {
        Self {
            tx: self.tx.iter().map(|p| p.rotate_about(center, angle)).collect(),
            rx: self.rx.iter().map(|p| p.rotate_about(center, angle)).collect(),
        }
    }

    /// Uniform scaling of all positions about `center`.
    pub fn scaled(&self, center: &Point2, factor: f64) -> Self {
        let s = |p: &Point2| {
            Point2::new(center.x + factor * (p.x - center.x), center.y + factor * (p.y - center.y))
        };
        Self {
            tx: self.tx.iter().map(s).collect(),
            rx: self.rx.iter().map(s).collect(),
        }
    }

    /// Round-trip delay of every path for a scatterer at `point`, path-indexed.
    pub fn path_delays(&self, point: &Point2, c: PropagationConstant) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_paths());
        for r in &self.rx {
            for t in &self.tx {
                out.push(propagation_delay(t, r, point, c));
            }
        }
        out
    }
}

/// Bearing angles of every sensor to a reference point, with their
/// cosines (`a`) and sines (`b`).
#[derive(Debug, Clone, PartialEq)]
pub struct BearingSet {
    pub phi: Vec<f64>,
    pub varphi: Vec<f64>,
    pub a_tx: Vec<f64>,
    pub b_tx: Vec<f64>,
    pub a_rx: Vec<f64>,
    pub b_rx: Vec<f64>,
    pub reference_point: Point2,
}

impl BearingSet {
    /// Build directly from bearing angles (radians).
    pub fn from_angles(tx: &[f64], rx: &[f64]) -> Self {
        Self::from_angles_at(tx, rx, Point2::default())
    }

    pub fn from_angles_at(tx: &[f64], rx: &[f64], reference_point: Point2) -> Self {
        Self {
            phi: tx.to_vec(),
            varphi: rx.to_vec(),
            a_tx: tx.iter().map(|a| a.cos()).collect(),
            b_tx: tx.iter().map(|a| a.sin()).collect(),
            a_rx: rx.iter().map(|a| a.cos()).collect(),
            b_rx: rx.iter().map(|a| a.sin()).collect(),
            reference_point,
        }
    }

    pub fn num_tx(&self) -> usize {
        self.phi.len()
    }

    pub fn num_rx(&self) -> usize {
        self.varphi.len()
    }

    pub fn num_paths(&self) -> usize {
        self.phi.len() * self.varphi.len()
    }

    /// Per-path bearing sums `(a_tx[k] + a_rx[l], b_tx[k] + b_rx[l])`,
    /// path-indexed.
    pub fn path_sums(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.num_paths());
        for l in 0..self.num_rx() {
            for k in 0..self.num_tx() {
                out.push((self.a_tx[k] + self.a_rx[l], self.b_tx[k] + self.b_rx[l]));
            }
        }
        out
    }

    /// Bearings measured from the reference point toward each sensor, i.e.
    /// every angle advanced by π. This is the orientation under which the
    /// linearized delay model `τ - τ0 = D·[dx, dy, offset]` holds.
    pub fn reversed(&self) -> Self {
        let flip = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
        let turn = |v: &[f64]| {
            v.iter()
                .map(|a| (a + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU))
                .collect::<Vec<_>>()
        };
        Self {
            phi: turn(&self.phi),
            varphi: turn(&self.varphi),
            a_tx: flip(&self.a_tx),
            b_tx: flip(&self.b_tx),
            a_rx: flip(&self.a_rx),
            b_rx: flip(&self.b_rx),
            reference_point: self.reference_point,
        }
    }
}

fn bearing_of(sensor: &Point2, point: &Point2, role: &'static str, index: usize) -> Result<f64> {
    let dx = point.x - sensor.x;
    let dy = point.y - sensor.y;
    if dx.hypot(dy) < COINCIDENCE_EPS {
        return Err(Error::DegenerateGeometry { role, index });
    }
    Ok(dy.atan2(dx))
}

/// Full-quadrant bearing of the ray from each sensor to `point`.
pub fn bearing_angles(layout: &SensorLayout, point: &Point2) -> Result<BearingSet> {
    if !point.is_finite() {
        return Err(Error::NonFiniteInput("reference point"));
    }
    let phi = layout
        .tx
        .iter()
        .enumerate()
        .map(|(k, t)| bearing_of(t, point, "transmitter", k))
        .collect::<Result<Vec<_>>>()?;
    let varphi = layout
        .rx
        .iter()
        .enumerate()
        .map(|(l, r)| bearing_of(r, point, "receiver", l))
        .collect::<Result<Vec<_>>>()?;
    Ok(BearingSet::from_angles_at(&phi, &varphi, *point))
}

/// Transmitter → point → receiver travel time.
pub fn propagation_delay(tx: &Point2, rx: &Point2, point: &Point2, c: PropagationConstant) -> f64 {
    (tx.distance(point) + rx.distance(point)) / c.value()
}

/// The 2×(MN) matrix whose columns are the per-path bearing sums.
pub fn h_matrix(bearings: &BearingSet) -> Matrix2xX<f64> {
    let sums = bearings.path_sums();
    Matrix2xX::from_fn(sums.len(), |r, i| if r == 0 { sums[i].0 } else { sums[i].1 })
}

/// The (MN)×3 linearized delay design matrix, rows `-(1/c)[A, B, 1]`.
pub fn d_matrix(bearings: &BearingSet, c: PropagationConstant) -> MatrixXx3<f64> {
    let sums = bearings.path_sums();
    let s = -1.0 / c.value();
    MatrixXx3::from_fn(sums.len(), |i, col| match col {
        0 => s * sums[i].0,
        1 => s * sums[i].1,
        _ => s,
    })
}
