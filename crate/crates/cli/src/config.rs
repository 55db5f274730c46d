//! The run configuration: one flat TOML table.
//!
//! Values come from three layers. Defaults are baked in, a config file
//! replaces them key by key, and command-line overrides replace the file.
//! The resolved table is hashed so every output file can name the exact
//! configuration that produced it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Every key a config file may contain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Observation table for `ingest`, `preprocess` and `frames`.
    pub input: Option<PathBuf>,
    /// `auto`, `horizons` or `csv`.
    pub input_format: String,
    pub csv_epoch: String,
    pub csv_ra: String,
    pub csv_dec: String,
    pub csv_delta: String,
    /// `radians` or `sexagesimal`.
    pub csv_angles: String,
    /// `seconds` or `calendar`.
    pub csv_epochs: String,

    /// Setting this makes the Horizons API the input source instead of `input`.
    pub fetch_endpoint: Option<String>,
    pub fetch_target: String,
    pub fetch_center: String,
    pub fetch_start: String,
    pub fetch_stop: String,
    pub fetch_step_minutes: u32,
    pub fetch_quantities: Vec<String>,

    /// `ecliptic` or `equatorial`.
    pub coordinates: String,
    /// `radius` or `planar`.
    pub apsis_source: String,
    pub window: usize,
    pub obliquity_rad: f64,

    /// Residual table read by `discover`. Defaults to the one `preprocess`
    /// writes into `output_dir`.
    pub residuals: Option<PathBuf>,
    /// Preset 1, 2 or 3; the search keys below override single fields.
    pub experiment: u32,
    pub vocabulary: Option<String>,
    pub max_nodes: Option<usize>,
    pub inputs: Option<Vec<String>>,
    pub target: Option<String>,
    pub max_constants: Option<usize>,
    pub search_rows: Option<usize>,
    pub refit_layers: Option<usize>,
    pub fit_epsilon: Option<f64>,
    pub constant_grain: Option<f64>,
    pub workers: Option<usize>,

    /// Entries `name=path` naming body position tables.
    pub frame_bodies: Vec<String>,
    /// Entries `name=mass`.
    pub frame_masses: Vec<String>,
    /// Entries `a+b` listing barycentre members.
    pub frame_barycentres: Vec<String>,
    /// Entries `x,y,z` in AU, fixed equatorial origins.
    pub frame_offsets: Vec<String>,
    pub frame_axes: Vec<String>,
    /// Fit tolerance, in bits, when picking the parsimonious winner.
    pub frame_winner_bits: f64,

    pub oracle_e: f64,
    pub oracle_step: f64,
    pub oracle_outer: u32,
    pub oracle_inner: u32,

    pub synth_e: f64,
    pub synth_a_au: f64,
    pub synth_period_days: f64,
    pub synth_inclination_rad: f64,
    pub synth_node_rad: f64,
    pub synth_perigee_arg_rad: f64,
    pub synth_m0_rad: f64,
    pub synth_start: String,
    pub synth_stop: String,
    pub synth_step_minutes: u32,
    pub synth_sigma_angle: f64,
    pub synth_sigma_distance: f64,
    pub synth_observer_offset: [f64; 3],
    /// When set, `synth` also writes body tables for a frame search.
    pub synth_mass_ratio: Option<f64>,

    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let lunar = eqcentre::synth::OrbitalElements::lunar_like();
        RunConfig {
            input: None,
            input_format: "auto".into(),
            csv_epoch: "epoch_s".into(),
            csv_ra: "ra_rad".into(),
            csv_dec: "dec_rad".into(),
            csv_delta: "delta_au".into(),
            csv_angles: "radians".into(),
            csv_epochs: "seconds".into(),
            fetch_endpoint: None,
            fetch_target: "301".into(),
            fetch_center: "500@399".into(),
            fetch_start: "2024-01-01 00:00".into(),
            fetch_stop: "2025-01-01 00:00".into(),
            fetch_step_minutes: 60,
            fetch_quantities: vec!["1".into(), "20".into()],
            coordinates: "ecliptic".into(),
            apsis_source: "radius".into(),
            window: eqcentre::cycles::DEFAULT_WINDOW,
            obliquity_rad: eqcentre::frames::J2000_OBLIQUITY,
            residuals: None,
            experiment: 3,
            vocabulary: None,
            max_nodes: None,
            inputs: None,
            target: None,
            max_constants: None,
            search_rows: None,
            refit_layers: None,
            fit_epsilon: None,
            constant_grain: None,
            workers: None,
            frame_bodies: Vec::new(),
            frame_masses: Vec::new(),
            frame_barycentres: Vec::new(),
            frame_offsets: Vec::new(),
            frame_axes: vec!["principal-plane".into()],
            frame_winner_bits: 1.0,
            oracle_e: 0.0549,
            oracle_step: 0.01,
            oracle_outer: 12,
            oracle_inner: 12,
            synth_e: lunar.eccentricity.value(),
            synth_a_au: lunar.semi_major_axis,
            synth_period_days: lunar.period / eqcentre::synth::DAY,
            synth_inclination_rad: lunar.inclination,
            synth_node_rad: lunar.node,
            synth_perigee_arg_rad: lunar.perigee_argument,
            synth_m0_rad: lunar.mean_anomaly_at_epoch,
            synth_start: "2024-01-01 00:00".into(),
            synth_stop: "2025-01-01 00:00".into(),
            synth_step_minutes: 60,
            synth_sigma_angle: 0.0,
            synth_sigma_distance: 0.0,
            synth_observer_offset: [0.0; 3],
            synth_mass_ratio: None,
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

/// Parses the right-hand side of `--set key=value`. Anything that is not a
/// TOML value is taken as a bare string, so `--set coordinates=equatorial`
/// works without quotes.
pub fn parse_override(text: &str) -> Result<(String, toml::Value), CliError> {
    let (key, raw) =
        text.split_once('=').ok_or_else(|| CliError::Usage(format!("override {text:?} is not key=value")))?;
    let key = key.trim().to_string();
    if key.is_empty() {
        return Err(CliError::Usage(format!("override {text:?} has an empty key")));
    }
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    Ok((key, value))
}

impl RunConfig {
    /// Defaults, then `file`, then `overrides` in order.
    pub fn resolve(file: Option<&Path>, overrides: Vec<(String, toml::Value)>) -> Result<Self, CliError> {
        let mut table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                text.parse::<toml::Table>().map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            }
            None => toml::Table::new(),
        };
        for (key, value) in overrides {
            table.insert(key, value);
        }
        let cfg: RunConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    /// The resolved configuration as TOML, every key spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of [`RunConfig::to_toml`], lowercase hex.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_toml().as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
