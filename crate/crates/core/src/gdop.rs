//! Geometric dilution of precision and rasters of it.

use crate::error::{Error, Result};
use crate::estimators::blue_coefficients;
use crate::exec::Exec;
use crate::geometry::{bearing_angles, Point2, PropagationConstant, Rect, SensorLayout};

/// GDOP at `point`, from the bearings at that point. Degenerate geometry
/// (a sensor on the point, or collinear bearings) yields `+∞`.
pub fn gdop_at(layout: &SensorLayout, point: &Point2) -> f64 {
    let Ok(bearings) = bearing_angles(layout, point) else {
        return f64::INFINITY;
    };
    let k = blue_coefficients(&bearings);
    let det = k.det();
    if !(det > crate::crlb::EPS_DET * (k.g1b * k.g2b).abs()) {
        return f64::INFINITY;
    }
    ((k.g1b + k.g2b) / det).sqrt()
}

/// Position error standard deviation `GDOP · c · σ_ε`, meters.
pub fn localization_error_from_gdop(gdop: f64, sigma_eps: f64, c: PropagationConstant) -> f64 {
    gdop * c.value() * sigma_eps
}

/// Row-major (`y` outer) raster of GDOP at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct GdopGrid {
    pub extent: Rect,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl GdopGrid {
    pub fn cell_center(&self, ix: usize, iy: usize) -> Point2 {
        cell_center(&self.extent, self.nx, self.ny, ix, iy)
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    /// Smallest finite value and its cell `(ix, iy, value)`.
    pub fn min(&self) -> Option<(usize, usize, f64)> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, v)| (i % self.nx, i / self.nx, *v))
    }
}

fn cell_center(extent: &Rect, nx: usize, ny: usize, ix: usize, iy: usize) -> Point2 {
    let dx = (extent.x_max - extent.x_min) / nx as f64;
    let dy = (extent.y_max - extent.y_min) / ny as f64;
    Point2::new(extent.x_min + (ix as f64 + 0.5) * dx, extent.y_min + (iy as f64 + 0.5) * dy)
}

pub fn gdop_grid(layout: &SensorLayout, extent: &Rect, nx: usize, ny: usize) -> Result<GdopGrid> {
    gdop_grid_with(layout, extent, nx, ny, Exec::default())
}

/// Evaluate [`gdop_at`] at every cell center. Cells whose footprint holds a
/// sensor get `+∞`.
pub fn gdop_grid_with(layout: &SensorLayout, extent: &Rect, nx: usize, ny: usize, exec: Exec) -> Result<GdopGrid> {
    extent.validate()?;
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidParameter(format!("raster needs nx, ny >= 2, got {nx}x{ny}")));
    }
    let dx = (extent.x_max - extent.x_min) / nx as f64;
    let dy = (extent.y_max - extent.y_min) / ny as f64;
    let sensors: Vec<Point2> = layout.tx().iter().chain(layout.rx()).copied().collect();
    let rows = exec.map_range(ny, |iy| {
        (0..nx)
            .map(|ix| {
                let p = cell_center(extent, nx, ny, ix, iy);
                let occupied = sensors
                    .iter()
                    .any(|s| (s.x - p.x).abs() <= 0.5 * dx && (s.y - p.y).abs() <= 0.5 * dy);
                if occupied {
                    f64::INFINITY
                } else {
                    gdop_at(layout, &p)
                }
            })
            .collect::<Vec<f64>>()
    });
    Ok(GdopGrid { extent: *extent, nx, ny, values: rows.concat() })
}
