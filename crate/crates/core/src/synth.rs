//! Keplerian two-body ground truth.
//!
//! Orbits are propagated analytically from their elements, optionally seen
//! from a displaced observer, and turned into ephemeris records. Noise is
//! drawn from a ChaCha8 stream seeded by the caller, so a seed fully
//! determines a dataset.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::io::Write;

use chrono::NaiveDate;
use nalgebra::Matrix3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::frames::{self, Axes, FrameSeries, FrameSpec, Origin, Vec3};
use crate::ingest::{EphemerisRecord, Epoch};
use crate::kepler::{self, Eccentricity, DEFAULT_TOLERANCE};

/// Seconds in a day.
pub const DAY: f64 = 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitalElements {
    /// Semi-major axis, AU.
    pub semi_major_axis: f64,
    pub eccentricity: Eccentricity,
    pub inclination: f64,
    /// Longitude of the ascending node.
    pub node: f64,
    /// Argument of perigee.
    pub perigee_argument: f64,
    /// Mean anomaly at `epoch`.
    pub mean_anomaly_at_epoch: f64,
    /// Anomalistic period, seconds.
    pub period: f64,
    pub epoch: Epoch,
}

impl OrbitalElements {
    pub fn new(
        semi_major_axis: f64,
        eccentricity: Eccentricity,
        angles: [f64; 4],
        period: f64,
        epoch: Epoch,
    ) -> Result<Self> {
        if !(semi_major_axis > 0.0 && semi_major_axis.is_finite()) {
            return Err(Error::validation("semi-major axis", format!("{semi_major_axis} must be positive")));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::validation("period", format!("{period} must be positive")));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::validation("orbital angles", "must be finite"));
        }
        let [inclination, node, perigee_argument, mean_anomaly_at_epoch] = angles;
        Ok(OrbitalElements {
            semi_major_axis,
            eccentricity,
            inclination,
            node,
            perigee_argument,
            mean_anomaly_at_epoch,
            period,
            epoch,
        })
    }

    /// A Moon-like orbit: e = 0.0549, T = 27.55 days, mean distance
    /// 384 400 km, epoch 2024-01-01T00:00Z.
    pub fn lunar_like() -> Self {
        OrbitalElements {
            semi_major_axis: 384_400.0 / 149_597_870.7,
            eccentricity: Eccentricity::new(0.0549).expect("valid"),
            inclination: 0.5,
            node: 0.3,
            perigee_argument: 1.0,
            mean_anomaly_at_epoch: 2.8,
            period: 27.55 * DAY,
            epoch: calendar_epoch(2024, 1, 1),
        }
    }

    pub fn with_eccentricity(mut self, e: Eccentricity) -> Self {
        self.eccentricity = e;
        self
    }

    /// Mean motion, rad/s.
    pub fn mean_motion(&self) -> f64 {
        TAU / self.period
    }

    /// Unreduced mean anomaly at `t`.
    pub fn mean_anomaly_at(&self, t: Epoch) -> f64 {
        self.mean_anomaly_at_epoch + self.mean_motion() * (t.as_f64() - self.epoch.as_f64())
    }

    /// `R_z(node) R_x(inclination) R_z(perigee_argument)`.
    pub fn rotation(&self) -> Matrix3<f64> {
        let rz = |a: f64| {
            let (s, c) = a.sin_cos();
            Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
        };
        let (s, c) = self.inclination.sin_cos();
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c);
        rz(self.node) * rx * rz(self.perigee_argument)
    }

    /// Position relative to the focus at eccentric anomaly `ecc`.
    pub fn position_at_eccentric(&self, ecc: f64) -> Vec3 {
        let e = self.eccentricity.value();
        let a = self.semi_major_axis;
        let planar = Vec3::new(a * (ecc.cos() - e), a * (1.0 - e * e).sqrt() * ecc.sin(), 0.0);
        self.rotation() * planar
    }

    /// Epochs of perigee (`M = 0 mod 2pi`) or apogee (`M = pi mod 2pi`)
    /// passages within `[start, stop]`, in seconds.
    pub fn apsis_epochs(&self, start: Epoch, stop: Epoch, apogee: bool) -> Vec<f64> {
        let n = self.mean_motion();
        let phase = if apogee { std::f64::consts::PI } else { 0.0 };
        let m_start = self.mean_anomaly_at(start);
        let mut k = ((m_start - phase) / TAU).ceil();
        let mut out = Vec::new();
        loop {
            let t = self.epoch.as_f64() + (phase + k * TAU - self.mean_anomaly_at_epoch) / n;
            if t > stop.as_f64() {
                break;
            }
            if t >= start.as_f64() {
                out.push(t);
            }
            k += 1.0;
        }
        out
    }
}

/// Midnight UTC of a calendar date.
pub fn calendar_epoch(year: i32, month: u32, day: u32) -> Epoch {
    let date = NaiveDate::from_ymd_opt(year, month, day).expect("valid calendar date");
    Epoch::from_datetime(date.and_hms_opt(0, 0, 0).expect("midnight"))
}

/// `start, start + step, ...` up to and including `stop`.
pub fn epoch_grid(start: Epoch, stop: Epoch, step_seconds: i64) -> Result<Vec<Epoch>> {
    if step_seconds <= 0 {
        return Err(Error::validation("step", "must be positive"));
    }
    if stop < start {
        return Err(Error::validation("epoch range", "stop precedes start"));
    }
    Ok((start.0..=stop.0).step_by(step_seconds as usize).map(Epoch).collect())
}

/// Focus-centred positions at every epoch.
pub fn propagate_kepler(elements: &OrbitalElements, epochs: &[Epoch]) -> Result<FrameSeries> {
    let positions = epochs
        .iter()
        .map(|&t| {
            let ecc = kepler::solve_kepler(elements.mean_anomaly_at(t), elements.eccentricity, DEFAULT_TOLERANCE)?;
            Ok(elements.position_at_eccentric(ecc))
        })
        .collect::<Result<Vec<_>>>()?;
    FrameSeries::new(FrameSpec::new(Origin::Body("primary".into()), Axes::Equatorial)?, epochs.to_vec(), positions)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub elements: OrbitalElements,
    pub epochs: Vec<Epoch>,
    /// Standard deviation of the noise added to right ascension and declination, radians.
    pub sigma_angle: f64,
    /// Standard deviation of the noise added to distance, AU.
    pub sigma_distance: f64,
    pub seed: u64,
    /// Observer position relative to the focus.
    pub observer_offset: Vec3,
}

impl SynthSpec {
    /// Noise-free, focus-centred, hourly over 2024.
    pub fn new(elements: OrbitalElements) -> Self {
        SynthSpec {
            elements,
            epochs: epoch_grid(calendar_epoch(2024, 1, 1), calendar_epoch(2025, 1, 1), 3600).expect("valid grid"),
            sigma_angle: 0.0,
            sigma_distance: 0.0,
            seed: 0,
            observer_offset: Vec3::zeros(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_angle >= 0.0 && self.sigma_angle.is_finite()) {
            return Err(Error::validation("angle noise", "must be finite and non-negative"));
        }
        if !(self.sigma_distance >= 0.0 && self.sigma_distance.is_finite()) {
            return Err(Error::validation("distance noise", "must be finite and non-negative"));
        }
        if self.epochs.is_empty() || self.epochs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("epochs", "must be non-empty and strictly increasing"));
        }
        Ok(())
    }
}

/// Ephemeris records of the orbiting body as seen from the observer.
pub fn synth_dataset(spec: &SynthSpec) -> Result<Vec<EphemerisRecord>> {
    spec.validate()?;
    let series = propagate_kepler(&spec.elements, &spec.epochs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let angle_noise =
        Normal::new(0.0, spec.sigma_angle).map_err(|e| Error::validation("angle noise", e.to_string()))?;
    let distance_noise =
        Normal::new(0.0, spec.sigma_distance).map_err(|e| Error::validation("distance noise", e.to_string()))?;
    series
        .epochs()
        .iter()
        .zip(series.positions())
        .map(|(&t, p)| {
            let seen = p - spec.observer_offset;
            if seen.norm() == 0.0 {
                return Err(Error::Degeneracy(format!("observer coincides with the body at {t}")));
            }
            let (ra, dec, delta) = frames::cartesian_to_spherical(&seen);
            let ra = kepler::wrap_two_pi(ra + angle_noise.sample(&mut rng));
            let dec = (dec + angle_noise.sample(&mut rng)).clamp(-FRAC_PI_2, FRAC_PI_2);
            let delta = delta + distance_noise.sample(&mut rng);
            if !(delta > 0.0) {
                return Err(Error::Degeneracy(format!("non-positive distance at {t}")));
            }
            EphemerisRecord::new(t, if ra >= TAU { 0.0 } else { ra }, dec, delta)
        })
        .collect()
}

/// Positions of a two-body system in the frames centred on either body and
/// on their barycentre.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBodyFrames {
    /// Secondary relative to the primary.
    pub primary_centred: FrameSeries,
    /// Primary relative to the secondary.
    pub secondary_centred: FrameSeries,
    /// Primary relative to the barycentre.
    pub barycentric_primary: FrameSeries,
    /// Secondary relative to the barycentre.
    pub barycentric_secondary: FrameSeries,
}

/// Splits the relative orbit between the bodies; `mass_ratio` is the
/// secondary's share of the total mass.
pub fn two_body_frames(spec: &SynthSpec, mass_ratio: f64) -> Result<TwoBodyFrames> {
    if !(mass_ratio > 0.0 && mass_ratio < 1.0) {
        return Err(Error::validation("mass ratio", format!("{mass_ratio} is outside (0, 1)")));
    }
    let rel = propagate_kepler(&spec.elements, &spec.epochs)?;
    let epochs = rel.epochs().to_vec();
    let make = |origin: Origin, scale: f64| {
        FrameSeries::new(
            FrameSpec::new(origin, Axes::Equatorial)?,
            epochs.clone(),
            rel.positions().iter().map(|p| p * scale).collect(),
        )
    };
    let both = || Origin::Barycentre(vec!["primary".into(), "secondary".into()]);
    Ok(TwoBodyFrames {
        primary_centred: rel.clone(),
        secondary_centred: make(Origin::Body("secondary".into()), -1.0)?,
        barycentric_primary: make(both(), -mass_ratio)?,
        barycentric_secondary: make(both(), 1.0 - mass_ratio)?,
    })
}

/// Exact anomalies at one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthRow {
    pub epoch: Epoch,
    /// Mean anomaly reduced to `[0, 2pi)`.
    pub mean: f64,
    pub eccentric: f64,
    /// True anomaly on the same branch as `mean`.
    pub true_anomaly: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub elements: OrbitalElements,
    pub seed: u64,
    pub perigees: Vec<f64>,
    pub apogees: Vec<f64>,
    pub rows: Vec<TruthRow>,
}

pub fn ground_truth(spec: &SynthSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let el = &spec.elements;
    let rows = spec
        .epochs
        .iter()
        .map(|&t| {
            let mean = kepler::wrap_two_pi(el.mean_anomaly_at(t));
            let eccentric = kepler::solve_kepler(mean, el.eccentricity, DEFAULT_TOLERANCE)?;
            let true_anomaly = kepler::true_anomaly_from_eccentric(eccentric, el.eccentricity);
            Ok(TruthRow { epoch: t, mean, eccentric, true_anomaly })
        })
        .collect::<Result<Vec<_>>>()?;
    let (start, stop) = (spec.epochs[0], *spec.epochs.last().expect("non-empty"));
    Ok(GroundTruth {
        elements: *el,
        seed: spec.seed,
        perigees: el.apsis_epochs(start, stop, false),
        apogees: el.apsis_epochs(start, stop, true),
        rows,
    })
}

/// Header of the ground-truth table.
pub const TRUTH_CSV_HEADER: &str = "epoch_s,M_rad,E_rad,v_rad";

/// Writes the sidecar: `# key=value` lines, then the per-epoch table.
pub fn write_ground_truth<W: Write>(mut out: W, truth: &GroundTruth, comments: &[String]) -> std::io::Result<()> {
    let el = &truth.elements;
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
    writeln!(out, "# a_au={:?}", el.semi_major_axis)?;
    writeln!(out, "# e={:?}", el.eccentricity.value())?;
    writeln!(out, "# i_rad={:?}", el.inclination)?;
    writeln!(out, "# node_rad={:?}", el.node)?;
    writeln!(out, "# perigee_arg_rad={:?}", el.perigee_argument)?;
    writeln!(out, "# m0_rad={:?}", el.mean_anomaly_at_epoch)?;
    writeln!(out, "# period_s={:?}", el.period)?;
    writeln!(out, "# epoch0_s={}", el.epoch.0)?;
    writeln!(out, "# seed={}", truth.seed)?;
    writeln!(out, "# perigee_epochs_s={}", join(&truth.perigees))?;
    writeln!(out, "# apogee_epochs_s={}", join(&truth.apogees))?;
    writeln!(out, "{TRUTH_CSV_HEADER}")?;
    for r in &truth.rows {
        writeln!(out, "{},{:?},{:?},{:?}", r.epoch.0, r.mean, r.eccentric, r.true_anomaly)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn elements(e: f64) -> OrbitalElements {
        OrbitalElements::lunar_like().with_eccentricity(Eccentricity::new(e).unwrap())
    }

    #[test]
    fn circle_has_constant_radius() {
        let el = elements(0.0);
        let epochs = epoch_grid(Epoch(0), Epoch(10 * 86_400), 3_600).unwrap();
        let s = propagate_kepler(&el, &epochs).unwrap();
        for r in s.radii() {
            assert!((r - el.semi_major_axis).abs() <= 1e-15 * el.semi_major_axis);
        }
    }

    #[test]
    fn apsis_radii() {
        let el = elements(0.1);
        let a = el.semi_major_axis;
        let peri = el.position_at_eccentric(kepler::solve_kepler(0.0, el.eccentricity, 1e-15).unwrap());
        let apo = el.position_at_eccentric(kepler::solve_kepler(std::f64::consts::PI, el.eccentricity, 1e-15).unwrap());
        assert!((peri.norm() - a * 0.9).abs() < 1e-12 * a);
        assert!((apo.norm() - a * 1.1).abs() < 1e-12 * a);
        let ecc = kepler::solve_kepler(1.0, el.eccentricity, 1e-15).unwrap();
        let r = el.position_at_eccentric(ecc).norm();
        assert!((r - a * (1.0 - 0.1 * ecc.cos())).abs() < 1e-12 * a);
    }

    #[test]
    fn hourly_year_grid() {
        let spec = SynthSpec::new(OrbitalElements::lunar_like());
        assert_eq!(spec.epochs.len(), 366 * 24 + 1);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let mut spec = SynthSpec::new(OrbitalElements::lunar_like());
        spec.epochs.truncate(50);
        spec.sigma_angle = 1e-4;
        spec.seed = 7;
        assert_eq!(synth_dataset(&spec).unwrap(), synth_dataset(&spec).unwrap());
        let clean = SynthSpec { sigma_angle: 0.0, ..spec.clone() };
        assert_ne!(synth_dataset(&spec).unwrap(), synth_dataset(&clean).unwrap());
    }

    #[test]
    fn observer_on_body_is_degenerate() {
        let mut spec = SynthSpec::new(OrbitalElements::lunar_like());
        spec.epochs.truncate(3);
        let first = propagate_kepler(&spec.elements, &spec.epochs).unwrap().positions()[0];
        spec.observer_offset = first;
        assert!(matches!(synth_dataset(&spec), Err(Error::Degeneracy(_))));
    }

    #[test]
    fn barycentre_split() {
        let mut spec = SynthSpec::new(OrbitalElements::lunar_like());
        spec.epochs.truncate(30);
        for mu in [0.5, 0.0123] {
            let f = two_body_frames(&spec, mu).unwrap();
            for k in 0..30 {
                let p = f.barycentric_primary.positions()[k];
                let s = f.barycentric_secondary.positions()[k];
                let rel = f.primary_centred.positions()[k];
                assert!((s - p - rel).norm() <= 1e-12 * rel.norm());
                assert!((p.norm() - mu * rel.norm()).abs() <= 1e-12 * rel.norm());
                if mu == 0.5 {
                    assert!((p + s).norm() <= 1e-15);
                }
            }
        }
        assert!(two_body_frames(&spec, 1.0).is_err());
    }

    #[test]
    fn apsis_epochs_match_mean_anomaly() {
        let el = OrbitalElements::lunar_like();
        let (start, stop) = (calendar_epoch(2024, 1, 1), calendar_epoch(2025, 1, 1));
        let apogees = el.apsis_epochs(start, stop, true);
        assert_eq!(apogees.len(), 14);
        for t in apogees {
            let m = el.mean_anomaly_at(Epoch(0)) + el.mean_motion() * t;
            assert!((kepler::wrap_two_pi(m) - std::f64::consts::PI).abs() < 1e-6);
        }
    }
}
