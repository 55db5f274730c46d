//! Rediscovering the Equation of the Centre from ephemerides.
//!
//! The crate is organised along the data path:
//!
//! - [`ingest`] reads Horizons-style observer tables and plain CSV into
//!   validated [`ingest::EphemerisRecord`]s, and can fetch raw tables over HTTP.
//! - [`frames`] converts between equatorial, ecliptic and cartesian
//!   coordinates, fits the principal plane of an orbit and re-centres series.
//! - [`kepler`] holds the analytic references: Bessel functions, the Bessel
//!   series for `v - M`, its first-order coefficient and a Kepler solver.
//! - [`cycles`] finds apsides, cuts anomalistic cycles and produces the
//!   circular-motion residuals used as the regression target.
//! - [`pipeline`] wires `frames` and `cycles` into one preprocessing pass.
//! - [`sregress`] is a brute-force symbolic regression engine with
//!   restricted operator vocabularies and a (fit, parsimony) Pareto frontier.
//! - [`framesearch`] runs the whole pipeline across candidate reference
//!   frames and merges the results into one frame-tagged frontier.
//! - [`synth`] generates Keplerian two-body datasets with known ground truth.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cycles;
pub mod error;
pub mod frames;
pub mod framesearch;
pub mod ingest;
pub mod kepler;
pub mod pipeline;
pub mod sregress;
pub mod synth;

pub use error::{Error, Result};

/// Crate version, embedded in output file headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
