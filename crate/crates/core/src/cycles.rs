//! Apsis detection, anomalistic cycle segmentation and anomaly residuals.
//!
//! A cycle runs from one apogee to the next. Within it the mean anomaly is
//! the time since perigee scaled by the cycle duration, and the true anomaly
//! is the polar angle of the planar position about the focus measured from
//! the perigee direction. Their difference is the regression target.

use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::frames::{FrameSeries, PlaneBasis, Vec2, Vec3};
use crate::ingest::Epoch;
use crate::kepler::{self, Eccentricity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ApsisKind {
    Perigee,
    Apogee,
}

/// A refined apsis passage. `epoch` is in seconds and may fall between
/// samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApsisEvent {
    pub epoch: f64,
    pub kind: ApsisKind,
    pub radius: f64,
}

/// Which signal locates the apsides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ApsisSource {
    /// Extrema of the distance from the focus.
    #[default]
    Radius,
    /// Passages of the planar position through the first principal axis,
    /// i.e. the extrema of the first planar coordinate about the focus.
    Planar,
}

impl std::str::FromStr for ApsisSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "radius" => Ok(ApsisSource::Radius),
            "planar" => Ok(ApsisSource::Planar),
            other => Err(Error::Config(format!("unknown apsis source {other:?}"))),
        }
    }
}

/// Default smoothing window, about half a day at hourly cadence.
pub const DEFAULT_WINDOW: usize = 13;

fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let mut out = vec![f64::NAN; values.len()];
    for i in half..values.len() - half {
        out[i] = values[i - half..=i + half].iter().sum::<f64>() / window as f64;
    }
    out
}

/// Vertex offset of the parabola through `(-1, a), (0, b), (1, c)`.
fn parabola_offset(a: f64, b: f64, c: f64) -> f64 {
    let denom = a - 2.0 * b + c;
    if denom == 0.0 {
        0.0
    } else {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    }
}

fn parabola_value(a: f64, b: f64, c: f64, x: f64) -> f64 {
    b + 0.5 * x * (c - a) + 0.5 * x * x * (a - 2.0 * b + c)
}

/// Drops the weaker of any two consecutive events of the same kind until
/// the sequence alternates.
fn enforce_alternation(mut events: Vec<ApsisEvent>) -> Vec<ApsisEvent> {
    loop {
        let clash = events.windows(2).position(|w| w[0].kind == w[1].kind);
        let Some(i) = clash else { return events };
        let (a, b) = (events[i], events[i + 1]);
        let drop_first = match a.kind {
            ApsisKind::Apogee => a.radius < b.radius,
            ApsisKind::Perigee => a.radius > b.radius,
        };
        events.remove(if drop_first { i } else { i + 1 });
    }
}

/// Finds apsides as strict local extrema of the smoothed radius.
///
/// Radii are smoothed by a centred moving average of width `window`; an
/// index is an apogee (perigee) when its smoothed value is the strict
/// maximum (minimum) of the surrounding window. The epoch is refined by a
/// parabola through the three neighbouring smoothed values.
pub fn detect_apsides(epochs: &[f64], radii: &[f64], window: usize) -> Result<Vec<ApsisEvent>> {
    if epochs.len() != radii.len() {
        return Err(Error::validation("apsis detection", "epochs and radii differ in length"));
    }
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::validation("smoothing window", format!("{window} must be odd and at least 3")));
    }
    if radii.len() < window {
        return Err(Error::Segmentation(format!(
            "{} samples are fewer than the smoothing window {window}",
            radii.len()
        )));
    }
    let half = window / 2;
    let smooth = moving_average(radii, window);
    let mut events = Vec::new();
    for i in 2 * half..radii.len().saturating_sub(2 * half) {
        let centre = smooth[i];
        let neighbours = (i - half..=i + half).filter(|&j| j != i).map(|j| smooth[j]);
        let kind = if neighbours.clone().all(|v| v < centre) {
            ApsisKind::Apogee
        } else if neighbours.into_iter().all(|v| v > centre) {
            ApsisKind::Perigee
        } else {
            continue;
        };
        let dx = parabola_offset(smooth[i - 1], centre, smooth[i + 1]);
        let epoch = epochs[i] + dx * 0.5 * (epochs[i + 1] - epochs[i - 1]);
        let radius = parabola_value(radii[i - 1], radii[i], radii[i + 1], dx);
        events.push(ApsisEvent { epoch, kind, radius });
    }
    let events = enforce_alternation(events);
    if events.len() < 2 {
        return Err(Error::Segmentation(format!("found {} apsides, need at least 2", events.len())));
    }
    Ok(events)
}

/// Unwrapped polar angles of planar points about `focus`.
fn unwrapped_angles(points: &[Vec2], focus: &Vec2) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.len());
    let mut prev: Option<f64> = None;
    for p in points {
        let d = p - focus;
        let raw = d.y.atan2(d.x);
        let angle = match prev {
            None => raw,
            Some(last) => last + kepler::wrap_pi(raw - last),
        };
        out.push(angle);
        prev = Some(angle);
    }
    out
}

/// Finds apsides where the planar position crosses the first principal axis
/// through the focus, the points where the first planar coordinate peaks.
///
/// Crossing epochs are found by linear interpolation of the unwrapped polar
/// angle. The side with the larger mean focal distance is the apogee side.
pub fn detect_apsides_planar(epochs: &[f64], planar: &[Vec2], focus: &Vec2) -> Result<Vec<ApsisEvent>> {
    if epochs.len() != planar.len() {
        return Err(Error::validation("apsis detection", "epochs and points differ in length"));
    }
    if planar.len() < 2 {
        return Err(Error::Segmentation("too few samples".into()));
    }
    let angles = unwrapped_angles(planar, focus);
    let sweep = angles[angles.len() - 1] - angles[0];
    if sweep == 0.0 {
        return Err(Error::Segmentation("no angular motion about the focus".into()));
    }
    let dir = sweep.signum();
    let radius = |p: &Vec2| (p - focus).norm();

    // (half-turn index, epoch, focal distance)
    let mut crossings: Vec<(i64, f64, f64)> = Vec::new();
    let mut reached = (dir * angles[0] / PI).floor() as i64;
    for i in 0..angles.len() - 1 {
        let (a0, a1) = (dir * angles[i], dir * angles[i + 1]);
        // Only first passages count; a backward step and re-crossing of an
        // already reached half-turn adds nothing.
        while (reached + 1) as f64 * PI <= a1 {
            let k = reached + 1;
            let target = k as f64 * PI;
            let frac = (target - a0) / (a1 - a0);
            let t = epochs[i] + frac * (epochs[i + 1] - epochs[i]);
            let r = radius(&planar[i]) + frac * (radius(&planar[i + 1]) - radius(&planar[i]));
            crossings.push((k, t, r));
            reached = k;
        }
    }
    let mean_radius = |parity: i64| {
        let sel: Vec<f64> = crossings.iter().filter(|c| c.0.rem_euclid(2) == parity).map(|c| c.2).collect();
        if sel.is_empty() {
            f64::NAN
        } else {
            sel.iter().sum::<f64>() / sel.len() as f64
        }
    };
    let (even, odd) = (mean_radius(0), mean_radius(1));
    let even_is_apogee = !(odd > even);
    let events: Vec<ApsisEvent> = crossings
        .into_iter()
        .map(|(k, epoch, radius)| {
            let even = k.rem_euclid(2) == 0;
            let kind = if even == even_is_apogee { ApsisKind::Apogee } else { ApsisKind::Perigee };
            ApsisEvent { epoch, kind, radius }
        })
        .collect();
    if events.len() < 2 {
        return Err(Error::Segmentation(format!("found {} apsides, need at least 2", events.len())));
    }
    Ok(events)
}

/// One apogee-to-apogee slice of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleSegment {
    /// 1-based cycle number.
    pub index: usize,
    /// Sample indices inside `[start, end)`.
    pub records: Range<usize>,
    pub start: f64,
    pub end: f64,
    pub perigee: f64,
}

impl CycleSegment {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Cuts the samples into apogee-to-apogee cycles.
///
/// Samples before the first or at/after the last apogee are dropped.
pub fn segment_anomalistic_cycles(epochs: &[f64], apsides: &[ApsisEvent]) -> Result<Vec<CycleSegment>> {
    let apogees: Vec<f64> = apsides.iter().filter(|a| a.kind == ApsisKind::Apogee).map(|a| a.epoch).collect();
    if apogees.len() < 2 {
        return Err(Error::Segmentation(format!("need at least 2 apogees, found {}", apogees.len())));
    }
    let mut segments = Vec::with_capacity(apogees.len() - 1);
    for (k, pair) in apogees.windows(2).enumerate() {
        let (start, end) = (pair[0], pair[1]);
        let perigee = apsides
            .iter()
            .find(|a| a.kind == ApsisKind::Perigee && a.epoch > start && a.epoch < end)
            .map(|a| a.epoch)
            .ok_or_else(|| Error::Segmentation(format!("cycle {} contains no perigee", k + 1)))?;
        let first = epochs.partition_point(|&t| t < start);
        let last = epochs.partition_point(|&t| t < end);
        segments.push(CycleSegment { index: k + 1, records: first..last, start, end, perigee });
    }
    Ok(segments)
}

/// `M(t) = 2pi ((t - t_perigee) mod D) / D` for each sample of the segment.
pub fn mean_anomaly(segment: &CycleSegment, epochs: &[f64]) -> Vec<(f64, f64)> {
    let duration = segment.duration();
    epochs[segment.records.clone()]
        .iter()
        .map(|&t| {
            let phase = (t - segment.perigee).rem_euclid(duration) / duration;
            (t, kepler::wrap_two_pi(TAU * phase))
        })
        .collect()
}

/// Planar positions of a series together with the projected focus.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarTrack {
    pub epochs: Vec<f64>,
    pub points: Vec<Vec2>,
    /// The frame origin projected into the plane.
    pub focus: Vec2,
}

impl PlanarTrack {
    pub fn new(series: &FrameSeries, basis: &PlaneBasis) -> Self {
        PlanarTrack {
            epochs: series.epochs().iter().map(|e| e.as_f64()).collect(),
            points: series.positions().iter().map(|p| basis.project(p)).collect(),
            focus: basis.project(&Vec3::zeros()),
        }
    }
}

fn interpolate(epochs: &[f64], values: &[f64], t: f64) -> f64 {
    let n = epochs.len();
    if n == 1 {
        return values[0];
    }
    let j = epochs.partition_point(|&e| e <= t).clamp(1, n - 1) - 1;
    let frac = (t - epochs[j]) / (epochs[j + 1] - epochs[j]);
    values[j] + frac * (values[j + 1] - values[j])
}

/// Polar angle about the focus measured from the perigee direction.
///
/// Angles are unwrapped and oriented so they increase along the motion; the
/// perigee direction is interpolated to the refined perigee epoch.
pub fn true_anomaly_geometric(segment: &CycleSegment, track: &PlanarTrack) -> Result<Vec<(f64, f64)>> {
    let range = segment.records.clone();
    if range.len() < 2 {
        return Err(Error::Segmentation(format!("cycle {} holds fewer than 2 samples", segment.index)));
    }
    let epochs = &track.epochs[range.clone()];
    let points = &track.points[range];
    let angles = unwrapped_angles(points, &track.focus);

    let xs: Vec<f64> = points.iter().map(|p| p.x - track.focus.x).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.y - track.focus.y).collect();
    let perigee_vec = Vec2::new(interpolate(epochs, &xs, segment.perigee), interpolate(epochs, &ys, segment.perigee));
    let scale = points.iter().map(|p| (p - track.focus).norm()).fold(0.0, f64::max);
    if perigee_vec.norm() <= 1e-12 * scale || scale == 0.0 {
        return Err(Error::Degeneracy(format!("cycle {}: perigee vector has zero length", segment.index)));
    }
    let perigee_angle = interpolate(epochs, &angles, segment.perigee);
    let sweep = angles[angles.len() - 1] - angles[0];
    if sweep.abs() < PI {
        return Err(Error::Degeneracy(format!(
            "cycle {}: polar angle sweeps only {:.3} rad about the focus",
            segment.index,
            sweep.abs()
        )));
    }
    let dir = sweep.signum();
    Ok(epochs.iter().zip(&angles).map(|(&t, &a)| (t, dir * (a - perigee_angle))).collect())
}

/// One row of the regression dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnomalySample {
    pub cycle: usize,
    pub epoch: Epoch,
    /// Mean anomaly in `[0, 2pi)`.
    pub mean_anomaly: f64,
    /// True anomaly on the same `2pi` branch as the mean anomaly.
    pub true_anomaly: f64,
    /// `true_anomaly - mean_anomaly`.
    pub residual: f64,
}

/// Mean anomaly, true anomaly and their difference for every sample in
/// every segment.
pub fn residual_series(segments: &[CycleSegment], track: &PlanarTrack) -> Result<Vec<AnomalySample>> {
    let mut out = Vec::new();
    for seg in segments {
        let means = mean_anomaly(seg, &track.epochs);
        let trues = true_anomaly_geometric(seg, track)?;
        for ((t, m), (_, v)) in means.into_iter().zip(trues) {
            let turns = ((v - m) / TAU).round();
            let v = v - turns * TAU;
            out.push(AnomalySample {
                cycle: seg.index,
                epoch: Epoch(t.round() as i64),
                mean_anomaly: m,
                true_anomaly: v,
                residual: v - m,
            });
        }
    }
    Ok(out)
}

/// True anomaly by solving Kepler's equation at each mean anomaly, the
/// comparison route for [`true_anomaly_geometric`].
pub fn true_anomaly_kepler(samples: &[AnomalySample], e: Eccentricity) -> Result<Vec<f64>> {
    samples.iter().map(|s| Ok(s.mean_anomaly + kepler::centre_exact(s.mean_anomaly, e)?)).collect()
}

/// Eccentricity implied by perigee and apogee distances.
pub fn eccentricity_from_apsides(events: &[ApsisEvent]) -> Option<f64> {
    let mean = |kind| {
        let sel: Vec<f64> = events.iter().filter(|e| e.kind == kind).map(|e| e.radius).collect();
        (!sel.is_empty()).then(|| sel.iter().sum::<f64>() / sel.len() as f64)
    };
    let (rp, ra) = (mean(ApsisKind::Perigee)?, mean(ApsisKind::Apogee)?);
    Some((ra - rp) / (ra + rp))
}

/// Header of the residual dataset CSV.
pub const RESIDUAL_CSV_HEADER: &str = "cycle,epoch_s,M_rad,v_rad,residual_rad";

pub fn write_residual_csv<W: Write>(mut out: W, samples: &[AnomalySample], comments: &[String]) -> std::io::Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "{RESIDUAL_CSV_HEADER}")?;
    for s in samples {
        writeln!(out, "{},{},{:?},{:?},{:?}", s.cycle, s.epoch.0, s.mean_anomaly, s.true_anomaly, s.residual)?;
    }
    Ok(())
}

pub fn parse_residual_csv(text: &str) -> Result<Vec<AnomalySample>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::format(None, e.to_string()))?;
    let expected: Vec<&str> = RESIDUAL_CSV_HEADER.split(',').collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::format(Some(1), format!("expected header {RESIDUAL_CSV_HEADER:?}")));
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::format(Some(i + 2), e.to_string()))?;
        let num = |k: usize| -> Result<f64> {
            row[k].parse::<f64>().map_err(|_| Error::format(Some(i + 2), format!("bad number {:?}", &row[k])))
        };
        out.push(AnomalySample {
            cycle: num(0)? as usize,
            epoch: Epoch(num(1)? as i64),
            mean_anomaly: num(2)?,
            true_anomaly: num(3)?,
            residual: num(4)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HOUR: f64 = 3600.0;
    const PERIOD: f64 = 27.55 * 86400.0;

    fn sinusoid_radii(days: f64) -> (Vec<f64>, Vec<f64>) {
        let n = (days * 24.0) as usize + 1;
        let epochs: Vec<f64> = (0..n).map(|k| k as f64 * HOUR).collect();
        let radii = epochs.iter().map(|t| 1.0 - 0.05 * (TAU * t / PERIOD).cos()).collect();
        (epochs, radii)
    }

    #[test]
    fn sinusoid_apogees_at_odd_half_periods() {
        let (epochs, radii) = sinusoid_radii(365.0);
        let events = detect_apsides(&epochs, &radii, DEFAULT_WINDOW).unwrap();
        let apogees: Vec<f64> = events.iter().filter(|e| e.kind == ApsisKind::Apogee).map(|e| e.epoch).collect();
        // odd multiples of T/2 inside 365 days: 1, 3, ..., 25
        assert_eq!(apogees.len(), 13);
        for (k, t) in apogees.iter().enumerate() {
            let expected = (2 * k + 1) as f64 * PERIOD / 2.0;
            assert!((t - expected).abs() < HOUR, "apogee {k}: {t} vs {expected}");
        }
        assert!(events.windows(2).all(|w| w[0].kind != w[1].kind));
    }

    #[test]
    fn monotone_and_constant_radii_fail() {
        let epochs: Vec<f64> = (0..200).map(|k| k as f64).collect();
        let rising: Vec<f64> = epochs.iter().map(|t| 1.0 + t).collect();
        assert!(matches!(detect_apsides(&epochs, &rising, 13), Err(Error::Segmentation(_))));
        let flat = vec![1.0; 200];
        assert!(matches!(detect_apsides(&epochs, &flat, 13), Err(Error::Segmentation(_))));
        assert!(detect_apsides(&epochs, &flat, 4).is_err());
    }

    fn event(epoch: f64, kind: ApsisKind) -> ApsisEvent {
        ApsisEvent { epoch, kind, radius: 1.0 }
    }

    #[test]
    fn segmentation_rules() {
        use ApsisKind::*;
        let epochs: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let apsides = vec![event(10.5, Apogee), event(30.0, Perigee), event(50.5, Apogee)];
        let segs = segment_anomalistic_cycles(&epochs, &apsides).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].records, 11..51);
        assert_eq!(segs[0].index, 1);

        let many: Vec<ApsisEvent> = (0..15)
            .flat_map(|k| {
                let t = 2.0 + 6.0 * k as f64;
                [event(t, Apogee), event(t + 3.0, Perigee)]
            })
            .collect();
        let segs = segment_anomalistic_cycles(&epochs, &many).unwrap();
        assert_eq!(segs.len(), 14);
        let total: usize = segs.iter().map(|s| s.records.len()).sum();
        let inside = epochs.iter().filter(|&&t| t >= 2.0 && t < 2.0 + 6.0 * 14.0).count();
        assert_eq!(total, inside);

        let no_perigee = vec![event(10.0, Apogee), event(20.0, Apogee)];
        assert!(matches!(segment_anomalistic_cycles(&epochs, &no_perigee), Err(Error::Segmentation(_))));
        assert!(segment_anomalistic_cycles(&epochs, &apsides[..2]).is_err());
    }

    #[test]
    fn mean_anomaly_examples() {
        let epochs: Vec<f64> = (0..=100).map(|k| k as f64).collect();
        let seg = CycleSegment { index: 1, records: 0..101, start: 0.0, end: 100.0, perigee: 50.0 };
        let m = mean_anomaly(&seg, &epochs);
        assert_eq!(m[50].1, 0.0);
        assert!((m[0].1 - PI).abs() < 1e-15);
        assert!((m[51].1 - TAU / 100.0).abs() < 1e-15);
    }

    #[test]
    fn hourly_mean_anomaly_step() {
        let n = (27.55 * 24.0) as usize;
        let epochs: Vec<f64> = (0..n).map(|k| k as f64 * HOUR).collect();
        let seg = CycleSegment { index: 1, records: 0..n, start: 0.0, end: PERIOD, perigee: PERIOD / 2.0 };
        let m = mean_anomaly(&seg, &epochs);
        let step = m[10].1 - m[9].1;
        assert!((step - TAU / 661.2).abs() < 1e-12);
    }

    #[test]
    fn apsis_alternation() {
        use ApsisKind::*;
        let events = vec![
            ApsisEvent { epoch: 1.0, kind: Apogee, radius: 2.0 },
            ApsisEvent { epoch: 2.0, kind: Apogee, radius: 3.0 },
            ApsisEvent { epoch: 3.0, kind: Perigee, radius: 1.0 },
            ApsisEvent { epoch: 4.0, kind: Perigee, radius: 0.5 },
        ];
        let out = enforce_alternation(events);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].radius, 3.0);
        assert_eq!(out[1].radius, 0.5);
    }

    #[test]
    fn residual_csv_round_trip() {
        let samples = vec![AnomalySample {
            cycle: 1,
            epoch: Epoch(3600),
            mean_anomaly: 0.1,
            true_anomaly: 0.11,
            residual: 0.11 - 0.1,
        }];
        let mut buf = Vec::new();
        write_residual_csv(&mut buf, &samples, &[]).unwrap();
        assert_eq!(parse_residual_csv(std::str::from_utf8(&buf).unwrap()).unwrap(), samples);
        assert!(parse_residual_csv("a,b\n1,2\n").is_err());
    }
}
