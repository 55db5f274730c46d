//! Coordinate frames.
//!
//! Angles are converted from the equatorial to the ecliptic system by a
//! single rotation about the equinox axis through the mean obliquity of
//! J2000; nutation and precession are ignored. Cartesian positions feed a
//! principal component fit whose first two components span the orbital
//! plane.

use std::f64::consts::TAU;
use std::fmt;
use std::io::Write;

use nalgebra::{Matrix3, SymmetricEigen, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::ingest::Epoch;

pub type Vec3 = Vector3<f64>;
pub type Vec2 = Vector2<f64>;

/// Mean obliquity of the ecliptic at J2000, 23.439279444 degrees.
pub const J2000_OBLIQUITY: f64 = 23.439_279_444 * std::f64::consts::PI / 180.0;

/// Where a frame puts its origin.
#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    /// Centre of a named body.
    Body(String),
    /// Mass-weighted centre of the named bodies.
    Barycentre(Vec<String>),
    /// A fixed displacement from the raw series origin.
    Fixed(Vec3),
    /// A tabulated, epoch-aligned displacement series.
    Tabulated { label: String, epochs: Vec<Epoch>, positions: Vec<Vec3> },
}

/// Orientation of a frame's axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axes {
    Equatorial,
    Ecliptic,
    PrincipalPlane,
}

impl Axes {
    pub const ALL: [Axes; 3] = [Axes::Equatorial, Axes::Ecliptic, Axes::PrincipalPlane];

    pub fn name(self) -> &'static str {
        match self {
            Axes::Equatorial => "equatorial",
            Axes::Ecliptic => "ecliptic",
            Axes::PrincipalPlane => "principal-plane",
        }
    }
}

impl std::str::FromStr for Axes {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "equatorial" => Ok(Axes::Equatorial),
            "ecliptic" => Ok(Axes::Ecliptic),
            "principal-plane" | "principal_plane" | "pca" => Ok(Axes::PrincipalPlane),
            other => Err(Error::Config(format!("unknown axes option {other:?}"))),
        }
    }
}

/// Origin plus axes.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSpec {
    pub origin: Origin,
    pub axes: Axes,
}

impl FrameSpec {
    pub fn new(origin: Origin, axes: Axes) -> Result<Self> {
        match &origin {
            Origin::Barycentre(members) if members.is_empty() => {
                return Err(Error::validation("frame", "barycentre needs at least one member"))
            }
            Origin::Tabulated { epochs, positions, .. } if epochs.len() != positions.len() => {
                return Err(Error::validation("frame", "tabulated offset epochs and positions differ in length"))
            }
            _ => {}
        }
        Ok(FrameSpec { origin, axes })
    }

    /// Short text identifier used in output files, e.g.
    /// `body(Earth)@principal-plane` or `barycentre(Earth+Moon)@ecliptic`.
    pub fn tag(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for FrameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.origin {
            Origin::Body(name) => write!(f, "body({name})")?,
            Origin::Barycentre(members) => write!(f, "barycentre({})", members.join("+"))?,
            Origin::Fixed(v) => write!(f, "offset({:?} {:?} {:?})", v.x, v.y, v.z)?,
            Origin::Tabulated { label, .. } => write!(f, "offset({label})")?,
        }
        write!(f, "@{}", self.axes.name())
    }
}

/// Time-ordered cartesian positions in one frame, in AU.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSeries {
    frame: FrameSpec,
    epochs: Vec<Epoch>,
    positions: Vec<Vec3>,
}

impl FrameSeries {
    pub fn new(frame: FrameSpec, epochs: Vec<Epoch>, positions: Vec<Vec3>) -> Result<Self> {
        if epochs.len() != positions.len() {
            return Err(Error::validation(
                "frame series",
                format!("{} epochs but {} positions", epochs.len(), positions.len()),
            ));
        }
        if let Some(w) = epochs.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::validation("frame series", format!("epochs not strictly increasing at {}", w[1])));
        }
        Ok(FrameSeries { frame, epochs, positions })
    }

    pub fn frame(&self) -> &FrameSpec {
        &self.frame
    }

    pub fn epochs(&self) -> &[Epoch] {
        &self.epochs
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// Distance of each position from the frame origin.
    pub fn radii(&self) -> Vec<f64> {
        self.positions.iter().map(|p| p.norm()).collect()
    }

    pub fn with_frame(self, frame: FrameSpec) -> Self {
        FrameSeries { frame, ..self }
    }

    /// Applies a rotation to every position.
    pub fn rotated(&self, rotation: &Matrix3<f64>, frame: FrameSpec) -> Self {
        FrameSeries {
            frame,
            epochs: self.epochs.clone(),
            positions: self.positions.iter().map(|p| rotation * p).collect(),
        }
    }
}

/// Rotation taking equatorial cartesian vectors to ecliptic ones.
pub fn equatorial_to_ecliptic_matrix(obliquity: f64) -> Matrix3<f64> {
    let (s, c) = obliquity.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, s, 0.0, -s, c)
}

/// Equatorial `(ra, dec)` to ecliptic `(lon, lat)`, longitude in `[0, 2pi)`.
pub fn equatorial_to_ecliptic(ra: f64, dec: f64, obliquity: f64) -> (f64, f64) {
    let (se, ce) = obliquity.sin_cos();
    let (sd, cd) = dec.sin_cos();
    let (sa, ca) = ra.sin_cos();
    let lat = (sd * ce - cd * se * sa).clamp(-1.0, 1.0).asin();
    // atan2(sin a cos e + tan d sin e, cos a), scaled by cos d to stay finite at the poles
    let lon = (sa * cd * ce + sd * se).atan2(ca * cd);
    (lon.rem_euclid(TAU) % TAU, lat)
}

/// Inverse of [`equatorial_to_ecliptic`].
pub fn ecliptic_to_equatorial(lon: f64, lat: f64, obliquity: f64) -> (f64, f64) {
    equatorial_to_ecliptic(lon, lat, -obliquity)
}

/// `(lon, lat, r)` to `(r cos lat cos lon, r cos lat sin lon, r sin lat)`.
pub fn spherical_to_cartesian(lon: f64, lat: f64, r: f64) -> Vec3 {
    let (sl, cl) = lon.sin_cos();
    let (sb, cb) = lat.sin_cos();
    Vec3::new(r * cb * cl, r * cb * sl, r * sb)
}

/// Cartesian to `(lon in [0, 2pi), lat, r)`.
pub fn cartesian_to_spherical(v: &Vec3) -> (f64, f64, f64) {
    let r = v.norm();
    let lon = v.y.atan2(v.x).rem_euclid(TAU) % TAU;
    let lat = if r > 0.0 { (v.z / r).clamp(-1.0, 1.0).asin() } else { 0.0 };
    (lon, lat, r)
}

/// Principal axes of a point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneBasis {
    pub centroid: Vec3,
    /// Orthonormal, ordered by descending explained variance.
    pub components: [Vec3; 3],
    pub eigenvalues: [f64; 3],
}

const DEGENERATE_EIGENVALUE: f64 = 1e-15;
/// Flips `v` so that its largest-magnitude entry is positive.
fn orient(v: Vec3) -> Vec3 {
    let idx = v.iamax();
    if v[idx] < 0.0 {
        -v
    } else {
        v
    }
}

/// Principal component fit of 3-D points.
///
/// Components come from the eigen-decomposition of the covariance of the
/// centred points (normalised by `n`). Each component's largest-magnitude
/// entry is positive so that serialised bases are reproducible. The third
/// component is re-derived as `c1 x c2` oriented by the same rule, which
/// keeps the basis orthonormal to rounding.
pub fn fit_principal_plane(points: &[Vec3]) -> Result<PlaneBasis> {
    if points.len() < 3 {
        return Err(Error::Degeneracy(format!("principal plane needs at least 3 points, got {}", points.len())));
    }
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= n;
    let eigen = SymmetricEigen::new(cov);
    let (values, vectors) = (eigen.eigenvalues, eigen.eigenvectors);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let eigenvalues = order.map(|i| values[i].max(0.0));
    if eigenvalues[1] < DEGENERATE_EIGENVALUE {
        return Err(Error::Degeneracy(format!("points are collinear (second eigenvalue {:e})", eigenvalues[1])));
    }
    let c1 = orient(vectors.column(order[0]).normalize());
    let mut c2 = vectors.column(order[1]).into_owned();
    c2 -= c1 * c1.dot(&c2);
    let c2 = orient(c2.normalize());
    let c3 = orient(c1.cross(&c2).normalize());
    Ok(PlaneBasis { centroid, components: [c1, c2, c3], eigenvalues })
}

impl PlaneBasis {
    /// The fixed coordinate axes of the current frame, centred on the
    /// points' mean. The "eigenvalues" are the variances along x, y, z and
    /// need not be sorted.
    pub fn axis_aligned(points: &[Vec3]) -> Result<PlaneBasis> {
        if points.is_empty() {
            return Err(Error::Degeneracy("no points".into()));
        }
        let n = points.len() as f64;
        let centroid = points.iter().sum::<Vec3>() / n;
        let mut var = [0.0; 3];
        for p in points {
            let d = p - centroid;
            for (k, v) in var.iter_mut().enumerate() {
                *v += d[k] * d[k] / n;
            }
        }
        Ok(PlaneBasis { centroid, components: [Vec3::x(), Vec3::y(), Vec3::z()], eigenvalues: var })
    }

    /// Planar coordinates of one point.
    pub fn project(&self, p: &Vec3) -> Vec2 {
        let d = p - self.centroid;
        Vec2::new(d.dot(&self.components[0]), d.dot(&self.components[1]))
    }

    /// Component of `p - centroid` along the plane normal.
    pub fn out_of_plane(&self, p: &Vec3) -> f64 {
        (p - self.centroid).dot(&self.components[2])
    }

    /// Re-embeds planar coordinates into 3-D.
    pub fn embed(&self, q: &Vec2) -> Vec3 {
        self.centroid + self.components[0] * q.x + self.components[1] * q.y
    }

    /// Writes the basis as a small CSV block.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "row,x,y,z")?;
        let c = &self.centroid;
        writeln!(out, "centroid,{:?},{:?},{:?}", c.x, c.y, c.z)?;
        for (k, v) in self.components.iter().enumerate() {
            writeln!(out, "c{},{:?},{:?},{:?}", k + 1, v.x, v.y, v.z)?;
        }
        let e = &self.eigenvalues;
        writeln!(out, "eigenvalues,{:?},{:?},{:?}", e[0], e[1], e[2])
    }

    /// Reads a block written by [`PlaneBasis::write_csv`]; `#` lines are skipped.
    pub fn parse_csv(text: &str) -> Result<PlaneBasis> {
        let mut rows = std::collections::HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("row,") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::format(Some(i + 1), "expected 4 fields"));
            }
            let mut v = [0.0; 3];
            for k in 0..3 {
                v[k] = fields[k + 1]
                    .trim()
                    .parse()
                    .map_err(|_| Error::format(Some(i + 1), format!("bad number {:?}", fields[k + 1])))?;
            }
            rows.insert(fields[0].trim().to_string(), v);
        }
        let get =
            |k: &str| rows.get(k).copied().ok_or_else(|| Error::format(None, format!("basis block lacks row {k:?}")));
        let vec = |a: [f64; 3]| Vec3::new(a[0], a[1], a[2]);
        Ok(PlaneBasis {
            centroid: vec(get("centroid")?),
            components: [vec(get("c1")?), vec(get("c2")?), vec(get("c3")?)],
            eigenvalues: get("eigenvalues")?,
        })
    }
}

/// Planar coordinates of each point.
pub fn project_to_plane(points: &[Vec3], basis: &PlaneBasis) -> Vec<Vec2> {
    points.iter().map(|p| basis.project(p)).collect()
}

/// Subtracts an epoch-aligned offset series and retags the result.
///
/// Every epoch of `series` must appear exactly in `offset_epochs`; no
/// interpolation is done.
pub fn translate_origin(
    series: &FrameSeries,
    offset_epochs: &[Epoch],
    offset_positions: &[Vec3],
    frame: FrameSpec,
) -> Result<FrameSeries> {
    if offset_epochs.len() != offset_positions.len() {
        return Err(Error::Alignment("offset epochs and positions differ in length".into()));
    }
    let mut positions = Vec::with_capacity(series.len());
    let mut cursor = 0;
    for (epoch, p) in series.epochs.iter().zip(&series.positions) {
        // both sequences are sorted, so a forward scan suffices
        while cursor < offset_epochs.len() && offset_epochs[cursor] < *epoch {
            cursor += 1;
        }
        if cursor == offset_epochs.len() || offset_epochs[cursor] != *epoch {
            return Err(Error::Alignment(format!("offset series has no entry at {epoch}")));
        }
        positions.push(p - offset_positions[cursor]);
    }
    FrameSeries::new(frame, series.epochs.clone(), positions)
}

/// Subtracts a constant vector and retags the result.
pub fn translate_fixed(series: &FrameSeries, offset: &Vec3, frame: FrameSpec) -> FrameSeries {
    FrameSeries {
        frame,
        epochs: series.epochs.clone(),
        positions: series.positions.iter().map(|p| p - offset).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn circle(n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|k| {
                let t = TAU * k as f64 / n as f64;
                Vec3::new(t.cos(), t.sin(), 0.0)
            })
            .collect()
    }

    #[test]
    fn ecliptic_examples() {
        let eps = J2000_OBLIQUITY;
        assert!((eps - 0.409_092_600_592_825_85).abs() < 1e-15);
        let (lon, lat) = equatorial_to_ecliptic(0.0, 0.0, eps);
        assert!(lon.abs() < 1e-15 && lat.abs() < 1e-15);
        let (lon, lat) = equatorial_to_ecliptic(FRAC_PI_2, 0.0, eps);
        assert!((lon - FRAC_PI_2).abs() < 1e-14);
        assert!((lat + eps).abs() < 1e-14);
        // independent R_x(eps) evaluation at 30 digits
        let (lon, lat) = equatorial_to_ecliptic(1.580690, 0.49, 0.409093);
        assert!((lon - 1.579_554_470_661_360_8).abs() < 1e-12);
        assert!((lat - 0.080_924_233_653_700_69).abs() < 1e-12);
    }

    #[test]
    fn ecliptic_matches_matrix_route() {
        let m = equatorial_to_ecliptic_matrix(J2000_OBLIQUITY);
        for (ra, dec) in [(0.3, 0.2), (4.0, -1.1), (6.0, 1.5)] {
            let v = m * spherical_to_cartesian(ra, dec, 1.0);
            let (lon, lat, r) = cartesian_to_spherical(&v);
            let (lon2, lat2) = equatorial_to_ecliptic(ra, dec, J2000_OBLIQUITY);
            assert!((r - 1.0).abs() < 1e-12);
            assert!((lon - lon2).abs() < 1e-12 && (lat - lat2).abs() < 1e-12);
            let (ra2, dec2) = ecliptic_to_equatorial(lon, lat, J2000_OBLIQUITY);
            assert!((ra2 - ra).abs() < 1e-10 && (dec2 - dec).abs() < 1e-10);
        }
    }

    #[test]
    fn spherical_examples() {
        assert!((spherical_to_cartesian(0.0, 0.0, 1.0) - Vec3::x()).norm() < 1e-15);
        assert!((spherical_to_cartesian(FRAC_PI_2, 0.0, 2.0) - Vec3::new(0.0, 2.0, 0.0)).norm() < 1e-15);
        let v = spherical_to_cartesian(1.0, 0.3, 0.00257);
        assert!((v.norm() - 0.00257).abs() < 1e-12 * 0.00257);
    }

    #[test]
    fn unit_circle_pca() {
        let pts = circle(1000);
        let b = fit_principal_plane(&pts).unwrap();
        assert!((b.eigenvalues[0] - 0.5).abs() < 1e-12);
        assert!((b.eigenvalues[1] - 0.5).abs() < 1e-12);
        assert!(b.eigenvalues[2].abs() < 1e-15);
        assert!((b.components[2] - Vec3::z()).norm() < 1e-12);
        for q in project_to_plane(&pts, &b) {
            assert!((q.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rotated_circle_pca() {
        let rot = nalgebra::Rotation3::from_euler_angles(0.4, -0.7, 1.9);
        let pts: Vec<Vec3> = circle(1000).iter().map(|p| rot * p).collect();
        let b = fit_principal_plane(&pts).unwrap();
        let normal = orient(rot * Vec3::z());
        assert!((b.components[2] - normal).norm() < 1e-9);
    }

    #[test]
    fn collinear_is_degenerate() {
        let pts = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 1.0), Vec3::new(2.0, 2.0, 2.0)];
        assert!(matches!(fit_principal_plane(&pts), Err(Error::Degeneracy(_))));
        assert!(fit_principal_plane(&pts[..2]).is_err());
    }

    #[test]
    fn in_plane_points_reconstruct() {
        let pts = circle(17);
        let b = fit_principal_plane(&pts).unwrap();
        for p in &pts {
            let q = b.project(p);
            assert!((b.embed(&q) - p).norm() < 1e-12);
        }
    }

    #[test]
    fn basis_csv_round_trip() {
        let b = fit_principal_plane(&circle(10)).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let back = PlaneBasis::parse_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn translation() {
        let frame = FrameSpec::new(Origin::Body("A".into()), Axes::Equatorial).unwrap();
        let epochs: Vec<Epoch> = (0..4).map(Epoch).collect();
        let pos: Vec<Vec3> = (0..4).map(|k| Vec3::new(k as f64, 1.0, PI)).collect();
        let s = FrameSeries::new(frame.clone(), epochs.clone(), pos.clone()).unwrap();
        let new_frame = FrameSpec::new(Origin::Body("B".into()), Axes::Equatorial).unwrap();

        let zero = vec![Vec3::zeros(); 4];
        let same = translate_origin(&s, &epochs, &zero, new_frame.clone()).unwrap();
        assert_eq!(same.positions(), s.positions());
        assert_eq!(same.frame(), &new_frame);

        let nil = translate_origin(&s, &epochs, &pos, new_frame.clone()).unwrap();
        assert!(nil.positions().iter().all(|p| p.norm() == 0.0));

        let shifted: Vec<Epoch> = (1..5).map(Epoch).collect();
        assert!(matches!(translate_origin(&s, &shifted, &zero, new_frame.clone()), Err(Error::Alignment(_))));
        // a wider offset table is fine
        let wide: Vec<Epoch> = (-2..6).map(Epoch).collect();
        let wide_pos = vec![Vec3::x(); 8];
        let t = translate_origin(&s, &wide, &wide_pos, new_frame).unwrap();
        assert_eq!(t.positions()[2], pos[2] - Vec3::x());
    }

    #[test]
    fn frame_tags() {
        let f = FrameSpec::new(Origin::Barycentre(vec!["Earth".into(), "Moon".into()]), Axes::Ecliptic).unwrap();
        assert_eq!(f.tag(), "barycentre(Earth+Moon)@ecliptic");
        assert!(FrameSpec::new(Origin::Barycentre(vec![]), Axes::Ecliptic).is_err());
        let series = FrameSeries::new(f, vec![Epoch(1), Epoch(1)], vec![Vec3::x(); 2]);
        assert!(series.is_err());
    }
}
