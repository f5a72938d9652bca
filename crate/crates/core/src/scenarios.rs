//! Reference layouts and waveform settings used by the tests, benchmarks
//! and CLI defaults.

use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::Result;
use crate::geometry::{Point2, SensorLayout};
use crate::placement::{superpose, symmetric_constellation};
use crate::waveforms::WaveformSet;

/// Sample rate of the default waveform family, Hz.
pub const SAMPLE_RATE: f64 = 40.0e6;
/// Carrier of the default waveform family, Hz.
pub const CARRIER: f64 = 10.0e6;
/// Per-waveform band of the default family, Hz.
pub const BAND_WIDTH: f64 = 0.6e6;
pub const NUM_SAMPLES: usize = 2048;

/// `M` transmitters and `N` receivers, each set equally spaced on a circle
/// of `radius` about `center` and rotated by its own offset.
pub fn symmetric_layout(m: usize, tx_rotation: f64, n: usize, rx_rotation: f64, radius: f64, center: Point2) -> Result<SensorLayout> {
    SensorLayout::on_circle(
        center,
        radius,
        &symmetric_constellation(m, tx_rotation)?,
        &symmetric_constellation(n, rx_rotation)?,
    )
}

/// Three transmitters at `2π(i-1)/3`, four receivers at `π/4 + 2π(i-1)/4`.
pub fn three_by_four(radius: f64) -> SensorLayout {
    symmetric_layout(3, 0.0, 4, FRAC_PI_4, radius, Point2::default()).expect("static layout")
}

/// Transmitters: three at `π/18 + 2π(i-1)/3` and four at
/// `π/4 + 2π(i-1)/4`; seven equally spaced receivers.
pub fn seven_by_seven(radius: f64) -> SensorLayout {
    let tx = superpose(&[(3, PI / 18.0), (4, FRAC_PI_4)]).expect("static layout");
    let rx = symmetric_constellation(7, 0.0).expect("static layout");
    SensorLayout::on_circle(Point2::default(), radius, &tx, &rx).expect("static layout")
}

/// Disjoint-band family at the default settings (`f_c/β` roughly 6 to 30
/// depending on `count`).
pub fn default_waveforms(count: usize) -> Result<WaveformSet> {
    WaveformSet::frequency_division(count, SAMPLE_RATE, NUM_SAMPLES, BAND_WIDTH, CARRIER)
}
