//! One function per subcommand. Each reads its inputs, calls into the
//! library and writes its outputs under `output_dir`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use eqcentre::cycles::{self, ApsisSource};
use eqcentre::frames::{Axes, FrameSpec, Origin, Vec3};
use eqcentre::framesearch::{self, BodyTable, FrameCatalog, FrameJob};
use eqcentre::ingest::{self, AngleFormat, CsvMapping, EphemerisRecord, Epoch, EpochFormat, HorizonsQuery};
use eqcentre::kepler::{self, Eccentricity, SeriesTruncation};
use eqcentre::pipeline::{self, CoordinateSystem, PlaneChoice, PreprocessConfig};
use eqcentre::sregress::{self, Dataset, Experiment, OperatorVocabulary, SearchConfig};
use eqcentre::synth::{self, OrbitalElements, SynthSpec};
use sha2::{Digest, Sha256};

use crate::config::{hex, RunConfig};
use crate::CliError;

/// Writes files under the output directory, each prefixed by the version
/// and config hash.
struct Outputs {
    dir: PathBuf,
    header: Vec<String>,
}

impl Outputs {
    fn new(cfg: &RunConfig, command: &str) -> Result<Self, CliError> {
        fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::io(&cfg.output_dir, e))?;
        Ok(Outputs {
            dir: cfg.output_dir.clone(),
            header: vec![
                format!("eqcentre {} config_hash={}", eqcentre::VERSION, cfg.hash()),
                format!("command={command}"),
            ],
        })
    }

    fn write(
        &self,
        name: &str,
        body: impl FnOnce(&mut Vec<u8>, &[String]) -> Result<(), CliError>,
    ) -> Result<PathBuf, CliError> {
        let mut buf = Vec::new();
        body(&mut buf, &self.header)?;
        let path = self.dir.join(name);
        fs::write(&path, buf).map_err(|e| CliError::io(&path, e))?;
        println!("wrote {}", path.display());
        Ok(path)
    }
}

fn io_into(path: &str) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::io(Path::new(path), e)
}

fn comment_lines(out: &mut Vec<u8>, lines: &[String]) {
    for l in lines {
        out.extend_from_slice(format!("# {l}\n").as_bytes());
    }
}

fn parse<T: std::str::FromStr<Err = eqcentre::Error>>(text: &str) -> Result<T, CliError> {
    Ok(text.parse::<T>()?)
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn csv_mapping(cfg: &RunConfig) -> Result<CsvMapping, CliError> {
    let angles = match cfg.csv_angles.as_str() {
        "radians" => AngleFormat::Radians,
        "sexagesimal" => AngleFormat::Sexagesimal,
        other => return Err(CliError::Usage(format!("csv_angles must be radians or sexagesimal, got {other:?}"))),
    };
    let epochs = match cfg.csv_epochs.as_str() {
        "seconds" => EpochFormat::Seconds,
        "calendar" => EpochFormat::Calendar,
        other => return Err(CliError::Usage(format!("csv_epochs must be seconds or calendar, got {other:?}"))),
    };
    Ok(CsvMapping {
        epoch: cfg.csv_epoch.clone(),
        ra: cfg.csv_ra.clone(),
        dec: cfg.csv_dec.clone(),
        delta: cfg.csv_delta.clone(),
        angles,
        epochs,
    })
}

/// Records from the single configured source.
fn load_records(cfg: &RunConfig) -> Result<Vec<EphemerisRecord>, CliError> {
    match (&cfg.input, &cfg.fetch_endpoint) {
        (Some(_), Some(_)) => Err(CliError::Usage("set either input or fetch_endpoint, not both".into())),
        (None, None) => Err(CliError::Usage("no input: set input or fetch_endpoint".into())),
        (None, Some(endpoint)) => {
            let query = HorizonsQuery::new(
                cfg.fetch_target.clone(),
                cfg.fetch_center.clone(),
                Epoch::parse_calendar(&cfg.fetch_start)?.to_datetime(),
                Epoch::parse_calendar(&cfg.fetch_stop)?.to_datetime(),
                cfg.fetch_step_minutes,
                cfg.fetch_quantities.clone(),
            )?;
            let body = ingest::fetch_horizons(&query, endpoint)?;
            Ok(ingest::parse_horizons_text(&body)?)
        }
        (Some(path), None) => {
            let text = read_text(path)?;
            let horizons = match cfg.input_format.as_str() {
                "auto" => text.contains("$$SOE"),
                "horizons" => true,
                "csv" => false,
                other => {
                    return Err(CliError::Usage(format!("input_format must be auto, horizons or csv, got {other:?}")))
                }
            };
            let records = if horizons {
                ingest::parse_horizons_text(&text)
            } else {
                ingest::parse_csv(&text, &csv_mapping(cfg)?)
            };
            records.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
        }
    }
}

fn preprocess_config(cfg: &RunConfig) -> Result<PreprocessConfig, CliError> {
    Ok(PreprocessConfig {
        coordinates: parse::<CoordinateSystem>(&cfg.coordinates)?,
        apsis_source: parse::<ApsisSource>(&cfg.apsis_source)?,
        window: cfg.window,
        obliquity: cfg.obliquity_rad,
        plane: PlaneChoice::Principal,
    })
}

/// The preset, with any explicitly configured field replacing its value.
fn search_config(cfg: &RunConfig) -> Result<(Experiment, SearchConfig), CliError> {
    let experiment = Experiment::from_number(cfg.experiment)?;
    let mut search = SearchConfig::preset(experiment);
    if let Some(v) = &cfg.vocabulary {
        search.vocabulary = OperatorVocabulary::by_name(v)?;
    }
    if let Some(n) = cfg.max_nodes {
        search.max_nodes = n;
    }
    if let Some(inputs) = &cfg.inputs {
        search.inputs = inputs.clone();
    }
    if let Some(t) = &cfg.target {
        search.target = t.clone();
    }
    if let Some(n) = cfg.max_constants {
        search.max_constants = n;
    }
    if let Some(n) = cfg.search_rows {
        search.search_rows = n;
    }
    if let Some(n) = cfg.refit_layers {
        search.refit_layers = n;
    }
    if let Some(x) = cfg.fit_epsilon {
        search.fit_epsilon = x;
    }
    if let Some(x) = cfg.constant_grain {
        search.constant_grain = x;
    }
    search.workers = cfg.workers;
    search.validate()?;
    Ok((experiment, search))
}

pub fn ingest(cfg: &RunConfig) -> Result<(), CliError> {
    let records = load_records(cfg)?;
    let out = Outputs::new(cfg, "ingest")?;
    out.write("records.csv", |buf, header| ingest::write_csv(buf, &records, header).map_err(io_into("records.csv")))?;
    println!("records {}", records.len());
    if let (Some(first), Some(last)) = (records.first(), records.last()) {
        let days = (last.epoch.as_f64() - first.epoch.as_f64()) / synth::DAY;
        println!("span {} .. {} ({days:.4} days)", first.epoch, last.epoch);
    }
    Ok(())
}

pub fn preprocess(cfg: &RunConfig) -> Result<(), CliError> {
    let records = load_records(cfg)?;
    let result = pipeline::preprocess_records(&records, &preprocess_config(cfg)?)?;
    let out = Outputs::new(cfg, "preprocess")?;
    out.write("residuals.csv", |buf, header| {
        cycles::write_residual_csv(buf, &result.samples, header).map_err(io_into("residuals.csv"))
    })?;
    out.write("basis.csv", |buf, header| {
        comment_lines(buf, header);
        result.basis.write_csv(buf).map_err(io_into("basis.csv"))
    })?;
    let lines = result.diagnostics.lines();
    out.write("diagnostics.txt", |buf, header| {
        comment_lines(buf, header);
        for l in &lines {
            buf.extend_from_slice(format!("{l}\n").as_bytes());
        }
        Ok(())
    })?;
    println!("cycles {}", result.diagnostics.cycle_count);
    println!("samples {}", result.samples.len());
    Ok(())
}

pub fn discover(cfg: &RunConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let path = cfg.residuals.clone().unwrap_or_else(|| cfg.output_dir.join("residuals.csv"));
    let text = read_text(&path)?;
    let samples = cycles::parse_residual_csv(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let (experiment, search) = search_config(cfg)?;
    let data = experiment.prepare(&Dataset::from_samples(&samples))?;
    let frontier = sregress::discover(&data, &search)?;
    let coefficient = sregress::first_harmonic_coefficient(&frontier);
    let eccentricity = coefficient.and_then(|c| kepler::invert_c1(c).ok());

    let out = Outputs::new(cfg, "discover")?;
    out.write("frontier.csv", |buf, header| Ok(sregress::write_frontier_csv(buf, &frontier, header)?))?;
    out.write("report.txt", |buf, header| {
        comment_lines(buf, header);
        let mut lines = vec![
            format!("dataset = {}", path.display()),
            format!("dataset_sha256 = {}", hex(&Sha256::digest(text.as_bytes()))),
            format!("rows = {}", data.rows()),
            format!("experiment = {}", experiment.number()),
            format!("frontier_size = {}", frontier.len()),
        ];
        for (k, c) in frontier.iter().enumerate() {
            lines.push(format!(
                "frontier {} fit_bits={:.6} parsimony_bits={:.6} {}",
                k + 1,
                c.fit,
                c.parsimony,
                c.expression
            ));
        }
        match (coefficient, eccentricity) {
            (Some(c), Some(e)) => {
                lines.push(format!("first_harmonic_coefficient = {c:.9}"));
                lines.push(format!("eccentricity = {:.9}", e.value()));
            }
            _ => lines.push("first_harmonic_coefficient = none".into()),
        }
        lines.push(String::new());
        lines.push("[config]".into());
        for l in &lines {
            buf.extend_from_slice(format!("{l}\n").as_bytes());
        }
        buf.extend_from_slice(cfg.to_toml().as_bytes());
        Ok(())
    })?;
    for c in frontier.iter().take(5) {
        println!("{:>12.6} {:>10.6}  {}", c.fit, c.parsimony, c.expression);
    }
    if let Some(e) = eccentricity {
        println!("eccentricity {:.9}", e.value());
    }
    println!("runtime {:.3} s", start.elapsed().as_secs_f64());
    Ok(())
}

fn split_pair<'a>(entry: &'a str, key: &str) -> Result<(&'a str, &'a str), CliError> {
    entry
        .split_once('=')
        .map(|(a, b)| (a.trim(), b.trim()))
        .filter(|(a, b)| !a.is_empty() && !b.is_empty())
        .ok_or_else(|| CliError::Usage(format!("{key} entry {entry:?} is not name=value")))
}

fn frame_catalog(cfg: &RunConfig) -> Result<FrameCatalog, CliError> {
    let mut bodies = BTreeMap::new();
    let mut order = Vec::new();
    for entry in &cfg.frame_bodies {
        let (name, path) = split_pair(entry, "frame_bodies")?;
        let path = Path::new(path);
        let table =
            BodyTable::parse_csv(&read_text(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        bodies.insert(name.to_string(), table);
        order.push(name.to_string());
    }
    let mut masses = BTreeMap::new();
    for entry in &cfg.frame_masses {
        let (name, value) = split_pair(entry, "frame_masses")?;
        let mass = value.parse::<f64>().map_err(|_| CliError::Usage(format!("bad mass {value:?} for {name}")))?;
        masses.insert(name.to_string(), mass);
    }
    let barycentres: Vec<Vec<String>> =
        cfg.frame_barycentres.iter().map(|b| b.split('+').map(|s| s.trim().to_string()).collect()).collect();
    let axes = cfg.frame_axes.iter().map(|a| parse::<Axes>(a)).collect::<Result<Vec<_>, _>>()?;
    let mut catalog = if order.is_empty() {
        if !barycentres.is_empty() {
            return Err(CliError::Usage("frame_barycentres needs frame_bodies".into()));
        }
        FrameCatalog { frames: Vec::new(), bodies, masses }
    } else {
        framesearch::enumerate_frames(bodies, &order, masses, &barycentres, &axes)?
    };
    for entry in &cfg.frame_offsets {
        let parts = entry.split(',').map(|s| s.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>();
        let v = match parts.as_deref() {
            Ok([x, y, z]) => Vec3::new(*x, *y, *z),
            _ => return Err(CliError::Usage(format!("frame_offsets entry {entry:?} is not x,y,z"))),
        };
        for &ax in &axes {
            catalog.push(FrameSpec::new(Origin::Fixed(v), ax)?)?;
        }
    }
    if catalog.frames.is_empty() {
        return Err(CliError::Usage("frame catalog is empty: set frame_bodies or frame_offsets".into()));
    }
    Ok(catalog)
}

pub fn frames(cfg: &RunConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let catalog = frame_catalog(cfg)?;
    let records = load_records(cfg)?;
    // body tables are equatorial, so the target is kept equatorial too and
    // each frame applies its own axes
    let raw = pipeline::records_to_series(&records, CoordinateSystem::Equatorial, cfg.obliquity_rad)?;
    let (experiment, search) = search_config(cfg)?;
    let job = FrameJob { preprocess: preprocess_config(cfg)?, experiment: Some(experiment), search };
    let outcome = framesearch::search_frames(&catalog, &raw, &job)?;
    let winner = framesearch::parsimonious_winner(&outcome.frontier, cfg.frame_winner_bits);

    let out = Outputs::new(cfg, "frames")?;
    out.write("frames_frontier.csv", |buf, header| Ok(sregress::write_frontier_csv(buf, &outcome.frontier, header)?))?;
    out.write("frames_diagnostics.csv", |buf, header| {
        Ok(framesearch::write_frame_diagnostics(buf, &outcome.runs, header)?)
    })?;
    let mut lines = Vec::new();
    for run in &outcome.runs {
        let d = &run.diagnostic;
        match &d.failure {
            None => lines.push(format!("frame {} {}: {} candidates", d.index, d.tag, d.candidates)),
            Some(f) => lines.push(format!("frame {} {}: failed: {f}", d.index, d.tag)),
        }
    }
    if let Some(w) = winner {
        let tag = w.frame.as_ref().map(|f| f.label.as_str()).unwrap_or("");
        lines.push(format!("winner {} in {tag} fit_bits={:.6} parsimony_bits={:.6}", w.expression, w.fit, w.parsimony));
    }
    out.write("frames_report.txt", |buf, header| {
        comment_lines(buf, header);
        for l in &lines {
            buf.extend_from_slice(format!("{l}\n").as_bytes());
        }
        Ok(())
    })?;
    for l in &lines {
        println!("{l}");
    }
    println!("runtime {:.3} s", start.elapsed().as_secs_f64());
    Ok(())
}

pub fn oracle(cfg: &RunConfig) -> Result<(), CliError> {
    let e = Eccentricity::new(cfg.oracle_e)?;
    if !(cfg.oracle_step > 0.0 && cfg.oracle_step.is_finite()) {
        return Err(CliError::Usage("oracle_step must be positive".into()));
    }
    let trunc = SeriesTruncation::new(cfg.oracle_outer, cfg.oracle_inner)?;
    let c1 = kepler::centre_coefficient_c1(e);
    let steps = (TAU / cfg.oracle_step).floor() as usize;
    let mut rows = Vec::with_capacity(steps + 1);
    let (mut series_gap, mut first_gap) = (0.0f64, 0.0f64);
    for k in 0..=steps {
        let m = k as f64 * cfg.oracle_step;
        let exact = kepler::centre_exact(m, e)?;
        let series = kepler::centre_bessel_series(e, m, trunc);
        let first = c1 * m.sin();
        series_gap = series_gap.max((series - exact).abs());
        first_gap = first_gap.max((first - exact).abs());
        rows.push([m, exact, series, first, series - exact, first - exact]);
    }
    let out = Outputs::new(cfg, "oracle")?;
    out.write("oracle.csv", |buf, header| {
        comment_lines(buf, header);
        comment_lines(
            buf,
            &[
                format!("e={:?} c1={c1:?}", e.value()),
                format!("max_series_gap={series_gap:e} max_first_order_gap={first_gap:e}"),
            ],
        );
        buf.extend_from_slice(
            b"M_rad,exact_rad,series_rad,first_order_rad,series_minus_exact,first_order_minus_exact\n",
        );
        for r in &rows {
            let cells: Vec<String> = r.iter().map(|x| format!("{x:e}")).collect();
            buf.extend_from_slice(cells.join(",").as_bytes());
            buf.push(b'\n');
        }
        Ok(())
    })?;
    println!("max_series_gap {series_gap:e}");
    println!("max_first_order_gap {first_gap:e}");
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    let start = Epoch::parse_calendar(&cfg.synth_start)?;
    let stop = Epoch::parse_calendar(&cfg.synth_stop)?;
    let elements = OrbitalElements::new(
        cfg.synth_a_au,
        Eccentricity::new(cfg.synth_e)?,
        [cfg.synth_inclination_rad, cfg.synth_node_rad, cfg.synth_perigee_arg_rad, cfg.synth_m0_rad],
        cfg.synth_period_days * synth::DAY,
        start,
    )?;
    let [ox, oy, oz] = cfg.synth_observer_offset;
    let spec = SynthSpec {
        elements,
        epochs: synth::epoch_grid(start, stop, i64::from(cfg.synth_step_minutes) * 60)?,
        sigma_angle: cfg.synth_sigma_angle,
        sigma_distance: cfg.synth_sigma_distance,
        seed: cfg.seed,
        observer_offset: Vec3::new(ox, oy, oz),
    };
    let records = synth::synth_dataset(&spec)?;
    let truth = synth::ground_truth(&spec)?;
    let out = Outputs::new(cfg, "synth")?;
    out.write("records.csv", |buf, header| ingest::write_csv(buf, &records, header).map_err(io_into("records.csv")))?;
    out.write("truth.csv", |buf, header| synth::write_ground_truth(buf, &truth, header).map_err(io_into("truth.csv")))?;
    if let Some(mu) = cfg.synth_mass_ratio {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(CliError::Usage(format!("synth_mass_ratio must lie in (0, 1), got {mu}")));
        }
        // both bodies as seen from the observer, noise free
        let orbit = synth::propagate_kepler(&spec.elements, &spec.epochs)?;
        let secondary =
            BodyTable::new(spec.epochs.clone(), orbit.positions().iter().map(|p| p - spec.observer_offset).collect())?;
        let primary = BodyTable::new(spec.epochs.clone(), vec![-spec.observer_offset; spec.epochs.len()])?;
        let mut header = out.header.clone();
        header.push(format!("masses primary={:?} secondary={mu:?}", 1.0 - mu));
        for (name, table) in [("body_primary.csv", &primary), ("body_secondary.csv", &secondary)] {
            out.write(name, |buf, _| table.write_csv(buf, &header).map_err(io_into(name)))?;
        }
    }
    println!("records {}", records.len());
    Ok(())
}
