//! Localization accuracy bounds for widely distributed MIMO radar.
//!
//! * [`geometry`]: bearings, propagation delays, the `H` and `D` matrices.
//! * [`waveforms`]: sampled waveforms, effective bandwidths, correlation,
//!   received-signal synthesis.
//! * [`crlb`]: closed-form coherent and non-coherent bounds and a numeric
//!   Fisher-information oracle.
//! * [`placement`]: optimality conditions for bearing constellations and a
//!   simplex optimizer.
//! * [`estimators`]: BLUE, matched filter, grid MLE and the Monte Carlo
//!   harness.
//! * [`gdop`]: GDOP at a point and over a raster.
//!
//! The `parallel` feature (on by default) lets [`Exec::Parallel`] fan raster
//! rows, optimizer restarts and Monte Carlo trials out over rayon; results
//! are identical either way.
//!
//! Vectors over propagation paths are ordered receiver-major: the path from
//! transmitter `k` to receiver `l` sits at index `l * M + k`.

// `!(x > tol)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod geometry;
pub mod waveforms;
pub mod crlb;
pub mod placement;
pub mod estimators;
pub mod gdop;
pub mod scenarios;

pub use error::{Error, Result};
pub use exec::Exec;
