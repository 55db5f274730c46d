//! Preprocessing: records or cartesian series to the residual dataset.
//!
//! The steps are: choose a coordinate system, build cartesian positions,
//! fit the orbital plane, project, locate apsides, cut cycles and compute
//! `v - M` per sample.

use crate::cycles::{self, AnomalySample, ApsisEvent, ApsisSource, CycleSegment, PlanarTrack, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::frames::{self, Axes, FrameSeries, FrameSpec, Origin, PlaneBasis, Vec3, J2000_OBLIQUITY};
use crate::ingest::EphemerisRecord;
use crate::kepler::Eccentricity;

/// Coordinate system in which ingested angles are turned into positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoordinateSystem {
    Equatorial,
    #[default]
    Ecliptic,
}

impl std::str::FromStr for CoordinateSystem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "equatorial" => Ok(CoordinateSystem::Equatorial),
            "ecliptic" => Ok(CoordinateSystem::Ecliptic),
            other => Err(Error::Config(format!("unknown coordinate system {other:?}"))),
        }
    }
}

/// How the plane used for the true anomaly is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlaneChoice {
    /// Principal component fit of the positions.
    #[default]
    Principal,
    /// The xy-plane of the series' own axes.
    AxisAligned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub coordinates: CoordinateSystem,
    pub apsis_source: ApsisSource,
    pub window: usize,
    pub obliquity: f64,
    pub plane: PlaneChoice,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            coordinates: CoordinateSystem::Ecliptic,
            apsis_source: ApsisSource::Radius,
            window: DEFAULT_WINDOW,
            obliquity: J2000_OBLIQUITY,
            plane: PlaneChoice::Principal,
        }
    }
}

/// Summary numbers reported alongside the residual dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessDiagnostics {
    pub record_count: usize,
    pub cycle_count: usize,
    /// Apogee-to-apogee duration of each cycle, seconds.
    pub cycle_durations: Vec<f64>,
    /// Records assigned to each cycle.
    pub cycle_records: Vec<usize>,
    /// RMS out-of-plane distance over RMS in-plane radius about the centroid.
    pub reconstruction_ratio: f64,
    /// `(r_apogee - r_perigee) / (r_apogee + r_perigee)` from the detected apsides.
    pub apsis_eccentricity: Option<f64>,
    /// Largest gap between the geometric true anomaly and the Kepler-solve
    /// true anomaly at the apsis eccentricity.
    pub kepler_route_max_gap: Option<f64>,
}

impl PreprocessDiagnostics {
    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("records = {}", self.record_count),
            format!("cycles = {}", self.cycle_count),
            format!("reconstruction_ratio = {:.6e}", self.reconstruction_ratio),
        ];
        if let Some(e) = self.apsis_eccentricity {
            out.push(format!("apsis_eccentricity = {e:.9}"));
        }
        if let Some(g) = self.kepler_route_max_gap {
            out.push(format!("kepler_route_max_gap_rad = {g:.6e}"));
        }
        for (k, (d, n)) in self.cycle_durations.iter().zip(&self.cycle_records).enumerate() {
            out.push(format!("cycle {} duration_days = {:.6} records = {}", k + 1, d / 86400.0, n));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessOutput {
    pub basis: PlaneBasis,
    pub apsides: Vec<ApsisEvent>,
    pub segments: Vec<CycleSegment>,
    pub samples: Vec<AnomalySample>,
    pub diagnostics: PreprocessDiagnostics,
}

/// Cartesian positions of geocentric records in the chosen system.
pub fn records_to_series(
    records: &[EphemerisRecord],
    coordinates: CoordinateSystem,
    obliquity: f64,
) -> Result<FrameSeries> {
    let axes = match coordinates {
        CoordinateSystem::Equatorial => Axes::Equatorial,
        CoordinateSystem::Ecliptic => Axes::Ecliptic,
    };
    let positions = records
        .iter()
        .map(|r| match coordinates {
            CoordinateSystem::Equatorial => frames::spherical_to_cartesian(r.ra, r.dec, r.delta),
            CoordinateSystem::Ecliptic => {
                let (lon, lat) = frames::equatorial_to_ecliptic(r.ra, r.dec, obliquity);
                frames::spherical_to_cartesian(lon, lat, r.delta)
            }
        })
        .collect();
    FrameSeries::new(
        FrameSpec::new(Origin::Body("observer".into()), axes)?,
        records.iter().map(|r| r.epoch).collect(),
        positions,
    )
}

fn reconstruction_ratio(points: &[Vec3], basis: &PlaneBasis) -> f64 {
    let (mut out_sq, mut in_sq) = (0.0, 0.0);
    for p in points {
        out_sq += basis.out_of_plane(p).powi(2);
        in_sq += basis.project(p).norm_squared();
    }
    if in_sq == 0.0 {
        f64::INFINITY
    } else {
        (out_sq / in_sq).sqrt()
    }
}

/// Runs plane fitting, apsis detection, segmentation and residuals on a
/// cartesian series whose origin is the assumed focus.
pub fn preprocess_series(series: &FrameSeries, cfg: &PreprocessConfig) -> Result<PreprocessOutput> {
    let points = series.positions();
    let basis = match cfg.plane {
        PlaneChoice::Principal => frames::fit_principal_plane(points)?,
        PlaneChoice::AxisAligned => PlaneBasis::axis_aligned(points)?,
    };
    let track = PlanarTrack::new(series, &basis);
    let apsides = match cfg.apsis_source {
        ApsisSource::Radius => cycles::detect_apsides(&track.epochs, &series.radii(), cfg.window)?,
        ApsisSource::Planar => cycles::detect_apsides_planar(&track.epochs, &track.points, &track.focus)?,
    };
    let segments = cycles::segment_anomalistic_cycles(&track.epochs, &apsides)?;
    let samples = cycles::residual_series(&segments, &track)?;

    let apsis_eccentricity = cycles::eccentricity_from_apsides(&apsides);
    let kepler_route_max_gap = apsis_eccentricity
        .and_then(|e| Eccentricity::new(e).ok())
        .and_then(|e| cycles::true_anomaly_kepler(&samples, e).ok())
        .map(|vk| {
            samples.iter().zip(vk).map(|(s, v)| crate::kepler::wrap_pi(s.true_anomaly - v).abs()).fold(0.0, f64::max)
        });

    let diagnostics = PreprocessDiagnostics {
        record_count: series.len(),
        cycle_count: segments.len(),
        cycle_durations: segments.iter().map(|s| s.duration()).collect(),
        cycle_records: segments.iter().map(|s| s.records.len()).collect(),
        reconstruction_ratio: reconstruction_ratio(points, &basis),
        apsis_eccentricity,
        kepler_route_max_gap,
    };
    Ok(PreprocessOutput { basis, apsides, segments, samples, diagnostics })
}

/// [`preprocess_series`] on ingested records.
pub fn preprocess_records(records: &[EphemerisRecord], cfg: &PreprocessConfig) -> Result<PreprocessOutput> {
    let series = records_to_series(records, cfg.coordinates, cfg.obliquity)?;
    preprocess_series(&series, cfg)
}
