//! Search over reference frames.
//!
//! Each frame in a catalog re-centres and re-orients the raw positions of
//! the target body, runs preprocessing and discovery, and tags what it
//! finds. The tagged candidates of all frames are merged into one frontier.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frames::{self, Axes, FrameSeries, FrameSpec, Origin, Vec3};
use crate::ingest::Epoch;
use crate::pipeline::{self, PlaneChoice, PreprocessConfig};
use crate::sregress::{self, Dataset, Experiment, FrameTag, ScoredCandidate, SearchConfig};

/// Epoch-aligned positions of one body in the raw frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyTable {
    pub epochs: Vec<Epoch>,
    pub positions: Vec<Vec3>,
}

impl BodyTable {
    pub fn new(epochs: Vec<Epoch>, positions: Vec<Vec3>) -> Result<Self> {
        if epochs.len() != positions.len() {
            return Err(Error::Alignment("body table epochs and positions differ in length".into()));
        }
        Ok(BodyTable { epochs, positions })
    }

    pub fn from_series(series: &FrameSeries) -> Self {
        BodyTable { epochs: series.epochs().to_vec(), positions: series.positions().to_vec() }
    }

    /// Reads the layout written by [`BodyTable::write_csv`]. Lines starting
    /// with `#` are comments.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut reader =
            csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| Error::format(None, e.to_string()))?.clone();
        if header.iter().collect::<Vec<_>>() != BODY_CSV_HEADER {
            return Err(Error::format(Some(1), format!("expected header {}", BODY_CSV_HEADER.join(","))));
        }
        let (mut epochs, mut positions) = (Vec::new(), Vec::new());
        for row in reader.records() {
            let row = row.map_err(|e| Error::format(None, e.to_string()))?;
            let line = row.position().map(|p| p.line() as usize);
            let number = |i: usize| -> Result<f64> {
                row[i].parse::<f64>().map_err(|_| Error::format(line, format!("bad number {:?}", &row[i])))
            };
            let t = number(0)?;
            if t.fract() != 0.0 {
                return Err(Error::format(line, format!("epoch {t} is not whole seconds")));
            }
            epochs.push(Epoch(t as i64));
            positions.push(Vec3::new(number(1)?, number(2)?, number(3)?));
        }
        if epochs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("body table", "epochs must be strictly increasing"));
        }
        BodyTable::new(epochs, positions)
    }

    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[String]) -> std::io::Result<()> {
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "{}", BODY_CSV_HEADER.join(","))?;
        for (t, p) in self.epochs.iter().zip(&self.positions) {
            writeln!(out, "{},{:e},{:e},{:e}", t.seconds(), p.x, p.y, p.z)?;
        }
        Ok(())
    }
}

/// Header of a body position table.
pub const BODY_CSV_HEADER: [&str; 4] = ["epoch_s", "x_au", "y_au", "z_au"];

#[derive(Debug, Clone, PartialEq)]
pub struct FrameCatalog {
    pub frames: Vec<FrameSpec>,
    pub bodies: BTreeMap<String, BodyTable>,
    pub masses: BTreeMap<String, f64>,
}

impl FrameCatalog {
    /// Appends a frame, checking that it resolves against the tables.
    pub fn push(&mut self, frame: FrameSpec) -> Result<()> {
        self.check(&frame)?;
        self.frames.push(frame);
        Ok(())
    }

    fn check(&self, frame: &FrameSpec) -> Result<()> {
        match &frame.origin {
            Origin::Body(name) => {
                self.table(name)?;
            }
            Origin::Barycentre(names) => {
                for name in names {
                    self.table(name)?;
                    self.mass(name)?;
                }
            }
            Origin::Fixed(_) | Origin::Tabulated { .. } => {}
        }
        Ok(())
    }

    fn table(&self, name: &str) -> Result<&BodyTable> {
        self.bodies.get(name).ok_or_else(|| Error::Config(format!("no position table for body {name:?}")))
    }

    fn mass(&self, name: &str) -> Result<f64> {
        match self.masses.get(name) {
            Some(&m) if m > 0.0 && m.is_finite() => Ok(m),
            Some(&m) => Err(Error::Config(format!("mass of {name:?} must be positive, got {m}"))),
            None => Err(Error::Config(format!("no mass for body {name:?}"))),
        }
    }

    /// Mass-weighted mean position of the named bodies at every epoch of
    /// the first body's table.
    pub fn barycentre(&self, names: &[String]) -> Result<BodyTable> {
        let first = self.table(names.first().ok_or_else(|| Error::Config("empty barycentre".into()))?)?;
        let mut weighted = vec![Vec3::zeros(); first.epochs.len()];
        let mut total = 0.0;
        for name in names {
            let (table, m) = (self.table(name)?, self.mass(name)?);
            if table.epochs != first.epochs {
                return Err(Error::Alignment(format!("table of {name:?} is not aligned with {:?}", names[0])));
            }
            for (w, p) in weighted.iter_mut().zip(&table.positions) {
                *w += p * m;
            }
            total += m;
        }
        Ok(BodyTable { epochs: first.epochs.clone(), positions: weighted.into_iter().map(|w| w / total).collect() })
    }
}

/// Body-centred frames for every body, then barycentric frames for the
/// requested subsets, each crossed with every axes option.
pub fn enumerate_frames(
    bodies: BTreeMap<String, BodyTable>,
    order: &[String],
    masses: BTreeMap<String, f64>,
    barycentres: &[Vec<String>],
    axes: &[Axes],
) -> Result<FrameCatalog> {
    if order.is_empty() {
        return Err(Error::Config("frame search needs at least one body".into()));
    }
    if axes.is_empty() {
        return Err(Error::Config("frame search needs at least one axes option".into()));
    }
    let mut catalog = FrameCatalog { frames: Vec::new(), bodies, masses };
    for name in order {
        for &ax in axes {
            catalog.push(FrameSpec::new(Origin::Body(name.clone()), ax)?)?;
        }
    }
    for subset in barycentres {
        if subset.len() < 2 {
            return Err(Error::Config("a barycentre needs at least two bodies".into()));
        }
        for &ax in axes {
            catalog.push(FrameSpec::new(Origin::Barycentre(subset.clone()), ax)?)?;
        }
    }
    Ok(catalog)
}

/// What each frame runs.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameJob {
    pub preprocess: PreprocessConfig,
    /// Preset whose derived input columns are added to each frame's dataset.
    pub experiment: Option<Experiment>,
    pub search: SearchConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameDiagnostic {
    pub index: usize,
    pub tag: String,
    pub records: usize,
    pub cycles: Option<usize>,
    pub candidates: usize,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRun {
    pub candidates: Vec<ScoredCandidate>,
    pub diagnostic: FrameDiagnostic,
}

/// The target's positions expressed in `frame`.
pub fn resolve_frame(
    frame: &FrameSpec,
    catalog: &FrameCatalog,
    raw: &FrameSeries,
    obliquity: f64,
) -> Result<FrameSeries> {
    let centred = match &frame.origin {
        Origin::Body(name) => {
            let t = catalog.table(name)?;
            frames::translate_origin(raw, &t.epochs, &t.positions, frame.clone())?
        }
        Origin::Barycentre(names) => {
            let t = catalog.barycentre(names)?;
            frames::translate_origin(raw, &t.epochs, &t.positions, frame.clone())?
        }
        Origin::Fixed(offset) => frames::translate_fixed(raw, offset, frame.clone()),
        Origin::Tabulated { epochs, positions, .. } => frames::translate_origin(raw, epochs, positions, frame.clone())?,
    };
    Ok(match frame.axes {
        Axes::Ecliptic => centred.rotated(&frames::equatorial_to_ecliptic_matrix(obliquity), frame.clone()),
        Axes::Equatorial | Axes::PrincipalPlane => centred,
    })
}

/// Preprocesses and searches one frame. Failures end up in the diagnostic.
pub fn run_frame(index: usize, catalog: &FrameCatalog, raw: &FrameSeries, job: &FrameJob) -> FrameRun {
    let frame = &catalog.frames[index];
    let tag = frame.tag();
    let mut diagnostic =
        FrameDiagnostic { index, tag: tag.clone(), records: raw.len(), cycles: None, candidates: 0, failure: None };
    let outcome = (|| {
        let series = resolve_frame(frame, catalog, raw, job.preprocess.obliquity)?;
        let mut pre = job.preprocess.clone();
        pre.plane = match frame.axes {
            Axes::PrincipalPlane => PlaneChoice::Principal,
            Axes::Equatorial | Axes::Ecliptic => PlaneChoice::AxisAligned,
        };
        let out = pipeline::preprocess_series(&series, &pre)?;
        diagnostic.cycles = Some(out.segments.len());
        let mut data = Dataset::from_samples(&out.samples);
        if let Some(exp) = job.experiment {
            data = exp.prepare(&data)?;
        }
        sregress::discover(&data, &job.search)
    })();
    match outcome {
        Ok(front) => {
            diagnostic.candidates = front.len();
            let label = FrameTag { index, label: tag };
            FrameRun { candidates: front.into_iter().map(|c| c.with_frame(label.clone())).collect(), diagnostic }
        }
        Err(e) => {
            diagnostic.failure = Some(e.to_string());
            FrameRun { candidates: Vec::new(), diagnostic }
        }
    }
}

/// Pareto frontier over the candidates of every frame.
pub fn unified_frontier(runs: &[FrameRun]) -> Result<Vec<ScoredCandidate>> {
    let all: Vec<ScoredCandidate> = runs.iter().flat_map(|r| r.candidates.iter().cloned()).collect();
    if all.is_empty() {
        let reasons: Vec<String> = runs
            .iter()
            .map(|r| format!("{}: {}", r.diagnostic.tag, r.diagnostic.failure.as_deref().unwrap_or("no candidates")))
            .collect();
        return Err(Error::Search(format!("no frame produced candidates ({})", reasons.join("; "))));
    }
    Ok(sregress::pareto_front(&all))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSearchOutcome {
    pub runs: Vec<FrameRun>,
    pub frontier: Vec<ScoredCandidate>,
}

/// Runs every frame of the catalog and merges the results.
pub fn search_frames(catalog: &FrameCatalog, raw: &FrameSeries, job: &FrameJob) -> Result<FrameSearchOutcome> {
    if catalog.frames.is_empty() {
        return Err(Error::Config("frame catalog is empty".into()));
    }
    let mut inner = job.clone();
    inner.search.workers = None;
    let work = || -> Vec<FrameRun> {
        (0..catalog.frames.len()).into_par_iter().map(|i| run_frame(i, catalog, raw, &inner)).collect()
    };
    let runs = match job.search.workers {
        None => work(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?
            .install(work),
    };
    let frontier = unified_frontier(&runs)?;
    Ok(FrameSearchOutcome { runs, frontier })
}

/// Among frontier members whose fit is within `bits` of the best fit, the
/// one with the lowest parsimony (frontier order breaks ties).
pub fn parsimonious_winner(frontier: &[ScoredCandidate], bits: f64) -> Option<&ScoredCandidate> {
    let best = frontier.iter().map(|c| c.fit).fold(f64::INFINITY, f64::min);
    frontier.iter().find(|c| c.fit <= best + bits)
}

/// Header of the per-frame diagnostics CSV.
pub const FRAME_DIAGNOSTICS_HEADER: [&str; 6] =
    ["frame_index", "frame_tag", "records", "cycles", "candidates", "failure"];

pub fn write_frame_diagnostics<W: Write>(out: W, runs: &[FrameRun], comments: &[String]) -> Result<()> {
    let mut out = out;
    for c in comments {
        writeln!(out, "# {c}").map_err(|e| Error::io("frame diagnostics", e))?;
    }
    let mut w = csv::Writer::from_writer(out);
    let fail = |e: csv::Error| Error::Format { line: None, reason: e.to_string() };
    w.write_record(FRAME_DIAGNOSTICS_HEADER).map_err(fail)?;
    for r in runs {
        let d = &r.diagnostic;
        w.write_record([
            d.index.to_string(),
            d.tag.clone(),
            d.records.to_string(),
            d.cycles.map(|c| c.to_string()).unwrap_or_default(),
            d.candidates.to_string(),
            d.failure.clone().unwrap_or_default(),
        ])
        .map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io("frame diagnostics", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(points: &[[f64; 3]]) -> BodyTable {
        BodyTable::new(
            (0..points.len() as i64).map(Epoch).collect(),
            points.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect(),
        )
        .unwrap()
    }

    fn earth_moon() -> (BTreeMap<String, BodyTable>, BTreeMap<String, f64>) {
        let bodies = BTreeMap::from([
            ("Earth".to_string(), table(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])),
            ("Moon".to_string(), table(&[[1.0, 0.0, 0.0], [1.0, 2.0, 0.0]])),
        ]);
        let masses = BTreeMap::from([("Earth".to_string(), 81.3), ("Moon".to_string(), 1.0)]);
        (bodies, masses)
    }

    #[test]
    fn frame_counts() {
        let (bodies, masses) = earth_moon();
        let names = vec!["Earth".to_string(), "Moon".to_string()];
        let cat = enumerate_frames(bodies.clone(), &names, masses.clone(), &[names.clone()], &[Axes::PrincipalPlane])
            .unwrap();
        assert_eq!(cat.frames.len(), 3);
        let single = enumerate_frames(bodies.clone(), &names[..1], masses, &[], &Axes::ALL).unwrap();
        assert_eq!(single.frames.len(), 3);
        let err = enumerate_frames(bodies, &names, BTreeMap::new(), &[names.clone()], &[Axes::Ecliptic]);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn barycentre_is_weighted_mean() {
        let (bodies, masses) = earth_moon();
        let cat = FrameCatalog { frames: Vec::new(), bodies, masses };
        let b = cat.barycentre(&["Earth".into(), "Moon".into()]).unwrap();
        let mu = 1.0 / 82.3;
        assert!((b.positions[0] - Vec3::new(mu, 0.0, 0.0)).norm() < 1e-15);
        let expected = Vec3::new(1.0, 2.0 * mu, 0.0);
        assert!((b.positions[1] - expected).norm() < 1e-15);
    }

    #[test]
    fn body_table_round_trip() {
        let t = table(&[[0.1, -2.5e-3, 1.0 / 3.0], [4.0, 5.0, 6.0]]);
        let mut out = Vec::new();
        t.write_csv(&mut out, &["note".into()]).unwrap();
        assert_eq!(BodyTable::parse_csv(std::str::from_utf8(&out).unwrap()).unwrap(), t);
        assert!(BodyTable::parse_csv("epoch_s,x_au,y_au,z_au\n1,0,0,0\n0,0,0,0\n").is_err());
    }

    #[test]
    fn winner_within_budget() {
        let c = |n: &str, f: f64, p: f64| ScoredCandidate::new(crate::sregress::Expr::var(n), f, p);
        let front = vec![c("a", 30.0, 1.0), c("b", 20.5, 5.0), c("c", 20.0, 9.0)];
        assert_eq!(parsimonious_winner(&front, 1.0).unwrap().canonical, "(var b)");
        assert!(parsimonious_winner(&[], 1.0).is_none());
    }
}
