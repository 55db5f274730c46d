//! Ephemeris ingestion.
//!
//! Two input routes produce the same [`EphemerisRecord`] sequences:
//!
//! - [`parse_horizons_text`] reads a JPL Horizons observer table exported
//!   with `CSV_FORMAT=YES` (data between `$$SOE` and `$$EOE`).
//! - [`load_csv`] reads any CSV given a [`CsvMapping`], including the
//!   toolkit's own `epoch_s,ra_rad,dec_rad,delta_au` format written by
//!   [`write_csv`].
//!
//! [`fetch_horizons`] is the only function here that touches the network.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};

use crate::error::{Error, Result};

/// Seconds since 2000-01-01T12:00:00 UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Epoch(pub i64);

fn j2000() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2000, 1, 1).and_then(|d| d.and_hms_opt(12, 0, 0)).expect("valid reference date")
}

impl Epoch {
    pub fn from_datetime(dt: NaiveDateTime) -> Self {
        Epoch((dt - j2000()).num_seconds())
    }

    pub fn to_datetime(self) -> NaiveDateTime {
        j2000() + chrono::Duration::seconds(self.0)
    }

    pub fn seconds(self) -> i64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    /// Parses `2024-Jan-01 00:00`, `2024-01-01 00:00`, optionally with
    /// seconds, fractional seconds or a `T` separator. Fractions are dropped.
    pub fn parse_calendar(text: &str) -> Result<Self> {
        let text = text.trim().trim_start_matches("A.D.").trim();
        const FORMATS: [&str; 6] = [
            "%Y-%b-%d %H:%M:%S%.f",
            "%Y-%b-%d %H:%M",
            "%Y-%m-%d %H:%M:%S%.f",
            "%Y-%m-%d %H:%M",
            "%Y-%m-%dT%H:%M:%S%.f",
            "%Y-%m-%dT%H:%M",
        ];
        for fmt in FORMATS {
            if let Ok(dt) = NaiveDateTime::parse_from_str(text, fmt) {
                return Ok(Epoch::from_datetime(dt.with_nanosecond_zero()));
            }
        }
        if let Ok(d) = NaiveDate::parse_from_str(text, "%Y-%m-%d") {
            return Ok(Epoch::from_datetime(d.and_hms_opt(0, 0, 0).expect("midnight")));
        }
        Err(Error::validation("epoch", format!("cannot parse calendar date {text:?}")))
    }
}

trait DropNanos {
    fn with_nanosecond_zero(self) -> Self;
}

impl DropNanos for NaiveDateTime {
    fn with_nanosecond_zero(self) -> Self {
        use chrono::Timelike;
        self.with_nanosecond(0).unwrap_or(self)
    }
}

impl fmt::Display for Epoch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let utc: DateTime<Utc> = DateTime::from_naive_utc_and_offset(self.to_datetime(), Utc);
        write!(f, "{}", utc.format("%Y-%m-%dT%H:%M:%SZ"))
    }
}

/// One geocentric observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EphemerisRecord {
    pub epoch: Epoch,
    /// Right ascension, radians in `[0, 2pi)`.
    pub ra: f64,
    /// Declination, radians in `[-pi/2, pi/2]`.
    pub dec: f64,
    /// Observer distance in AU.
    pub delta: f64,
}

impl EphemerisRecord {
    pub fn new(epoch: Epoch, ra: f64, dec: f64, delta: f64) -> Result<Self> {
        if !(0.0..TAU).contains(&ra) {
            return Err(Error::validation("right ascension", format!("{ra} rad is outside [0, 2pi)")));
        }
        if !(-FRAC_PI_2..=FRAC_PI_2).contains(&dec) {
            return Err(Error::validation("declination", format!("{dec} rad is outside [-pi/2, pi/2]")));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::validation("delta", format!("{delta} AU must be positive")));
        }
        Ok(EphemerisRecord { epoch, ra, dec, delta })
    }
}

/// Checks strict epoch monotonicity.
pub fn validate_sequence(records: &[EphemerisRecord]) -> Result<()> {
    for pair in records.windows(2) {
        if pair[1].epoch <= pair[0].epoch {
            let reason = if pair[1].epoch == pair[0].epoch {
                format!("duplicate epoch {}", pair[1].epoch)
            } else {
                format!("epoch {} follows {}", pair[1].epoch, pair[0].epoch)
            };
            return Err(Error::validation("record sequence", reason));
        }
    }
    Ok(())
}

/// Sorts by epoch and rejects duplicates.
fn sort_and_validate(mut records: Vec<EphemerisRecord>) -> Result<Vec<EphemerisRecord>> {
    records.sort_by_key(|r| r.epoch);
    validate_sequence(&records)?;
    Ok(records)
}

fn check_component(name: &str, value: f64, upper: f64) -> Result<()> {
    if !(0.0..upper).contains(&value) {
        return Err(Error::validation(name, format!("{value} is outside [0, {upper})")));
    }
    Ok(())
}

/// Hours, minutes, seconds of time to radians in `[0, 2pi)`.
pub fn hms_to_radians(h: i32, m: i32, s: f64) -> Result<f64> {
    check_component("hours", f64::from(h), 24.0)?;
    check_component("minutes", f64::from(m), 60.0)?;
    check_component("seconds", s, 60.0)?;
    let hours = f64::from(h) + f64::from(m) / 60.0 + s / 3600.0;
    let rad = (hours * 15.0).to_radians();
    Ok(if rad >= TAU { rad - TAU } else { rad })
}

/// Signed degrees, arcminutes, arcseconds to radians.
pub fn dms_to_radians(negative: bool, d: i32, m: i32, s: f64) -> Result<f64> {
    check_component("degrees", f64::from(d), 91.0)?;
    check_component("arcminutes", f64::from(m), 60.0)?;
    check_component("arcseconds", s, 60.0)?;
    let degrees = f64::from(d) + f64::from(m) / 60.0 + s / 3600.0;
    if degrees > 90.0 {
        return Err(Error::validation("declination", format!("{degrees} deg exceeds 90")));
    }
    let rad = degrees.to_radians();
    Ok(if negative { -rad } else { rad })
}

fn split_sexagesimal(text: &str) -> Option<(bool, i32, i32, f64)> {
    let text = text.trim();
    let (negative, body) = match text.as_bytes().first()? {
        b'-' => (true, &text[1..]),
        b'+' => (false, &text[1..]),
        _ => (false, text),
    };
    let parts: Vec<&str> = body.split(|c: char| c == ':' || c.is_whitespace()).filter(|p| !p.is_empty()).collect();
    if parts.len() != 3 {
        return None;
    }
    let whole = parts[0].parse::<i32>().ok()?;
    let minutes = parts[1].parse::<i32>().ok()?;
    let seconds = parts[2].parse::<f64>().ok()?;
    if whole < 0 {
        return None;
    }
    Some((negative, whole, minutes, seconds))
}

/// Parses `06 02 16.18` or `06:02:16.18` as hours of right ascension.
pub fn parse_hms(text: &str) -> Result<f64> {
    match split_sexagesimal(text) {
        Some((false, h, m, s)) => hms_to_radians(h, m, s),
        _ => Err(Error::validation("right ascension", format!("cannot parse {text:?}"))),
    }
}

/// Parses `+23 26 21.4` or `-05:10:00` as degrees of declination.
pub fn parse_dms(text: &str) -> Result<f64> {
    match split_sexagesimal(text) {
        Some((negative, d, m, s)) => dms_to_radians(negative, d, m, s),
        None => Err(Error::validation("declination", format!("cannot parse {text:?}"))),
    }
}

/// Formats a right ascension as `HH MM SS.sssssssss`.
pub fn format_hms(ra: f64) -> String {
    let total = ra.rem_euclid(TAU).to_degrees() / 15.0 * 3600.0;
    let mut h = (total / 3600.0).floor();
    let mut m = ((total - h * 3600.0) / 60.0).floor();
    let mut s = total - h * 3600.0 - m * 60.0;
    // Keep the printed seconds field below 60 after rounding.
    if s >= 60.0 - 5e-10 {
        s = 0.0;
        m += 1.0;
        if m >= 60.0 {
            m = 0.0;
            h += 1.0;
        }
    }
    if h >= 24.0 {
        h -= 24.0;
    }
    format!("{:02} {:02} {:012.9}", h as i32, m as i32, s)
}

/// Formats a declination as `sDD MM SS.ssssssss`.
pub fn format_dms(dec: f64) -> String {
    let sign = if dec < 0.0 { '-' } else { '+' };
    let total = dec.abs().to_degrees() * 3600.0;
    let mut d = (total / 3600.0).floor();
    let mut m = ((total - d * 3600.0) / 60.0).floor();
    let mut s = total - d * 3600.0 - m * 60.0;
    if s >= 60.0 - 5e-9 {
        s = 0.0;
        m += 1.0;
        if m >= 60.0 {
            m = 0.0;
            d += 1.0;
        }
    }
    format!("{sign}{:02} {:02} {:011.8}", d as i32, m as i32, s)
}

/// Column positions of the quantities we need inside a Horizons data line.
#[derive(Debug, Clone, Copy)]
struct HorizonsColumns {
    date: usize,
    ra: usize,
    dec: usize,
    delta: usize,
}

fn header_columns(header: &str) -> Option<HorizonsColumns> {
    let fields: Vec<String> = header.split(',').map(|f| f.trim().to_ascii_lowercase()).collect();
    let find = |pred: &dyn Fn(&str) -> bool| fields.iter().position(|f| pred(f));
    Some(HorizonsColumns {
        date: find(&|f| f.starts_with("date"))?,
        ra: find(&|f| f.starts_with("r.a."))?,
        dec: find(&|f| f.trim_matches('_').starts_with("dec"))?,
        delta: find(&|f| f == "delta")?,
    })
}

/// Infers the columns from a data line: date first, then the first two
/// sexagesimal fields, then the first plain number.
fn infer_columns(fields: &[&str]) -> Option<HorizonsColumns> {
    let mut sexagesimal =
        fields.iter().enumerate().skip(1).filter(|(_, f)| split_sexagesimal(f).is_some()).map(|(i, _)| i);
    let ra = sexagesimal.next()?;
    let dec = sexagesimal.next()?;
    let delta =
        fields.iter().enumerate().skip(dec + 1).find(|(_, f)| f.trim().parse::<f64>().is_ok()).map(|(i, _)| i)?;
    Some(HorizonsColumns { date: 0, ra, dec, delta })
}

/// Parses a Horizons observer table.
///
/// The column layout is read from the header line preceding `$$SOE` when it
/// names the date, R.A., DEC and delta columns; otherwise it is inferred from
/// the first data line. Other columns are ignored.
pub fn parse_horizons_text(raw: &str) -> Result<Vec<EphemerisRecord>> {
    let lines: Vec<&str> = raw.lines().collect();
    let start =
        lines.iter().position(|l| l.trim() == "$$SOE").ok_or_else(|| Error::format(None, "missing $$SOE sentinel"))?;
    let end = lines[start + 1..]
        .iter()
        .position(|l| l.trim() == "$$EOE")
        .map(|i| i + start + 1)
        .ok_or_else(|| Error::format(None, "missing $$EOE sentinel"))?;

    let mut columns = lines[..start].iter().rev().filter(|l| l.contains(',')).find_map(|l| header_columns(l));

    let mut records = Vec::with_capacity(end - start - 1);
    for (offset, line) in lines[start + 1..end].iter().enumerate() {
        let line_no = start + offset + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let cols = match columns {
            Some(c) => c,
            None => {
                let c = infer_columns(&fields)
                    .ok_or_else(|| Error::format(Some(line_no), "cannot locate RA/DEC/delta columns"))?;
                columns = Some(c);
                c
            }
        };
        let field = |i: usize| {
            fields
                .get(i)
                .map(|f| f.trim())
                .ok_or_else(|| Error::format(Some(line_no), format!("missing column {}", i + 1)))
        };
        let at_line = |e: Error| Error::format(Some(line_no), e.to_string());
        let epoch = Epoch::parse_calendar(field(cols.date)?).map_err(at_line)?;
        let ra = parse_hms(field(cols.ra)?).map_err(at_line)?;
        let dec = parse_dms(field(cols.dec)?).map_err(at_line)?;
        let delta_text = field(cols.delta)?;
        let delta =
            delta_text.parse::<f64>().map_err(|_| Error::format(Some(line_no), format!("bad delta {delta_text:?}")))?;
        records.push(EphemerisRecord::new(epoch, ra, dec, delta).map_err(at_line)?);
    }
    sort_and_validate(records)
}

/// How angle columns are encoded in a CSV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AngleFormat {
    #[default]
    Radians,
    /// `HH MM SS.s` for right ascension and `sDD MM SS.s` for declination.
    Sexagesimal,
}

/// How the epoch column is encoded in a CSV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EpochFormat {
    /// Integer (or integral) seconds since the J2000 reference instant.
    #[default]
    Seconds,
    /// Calendar text such as `2024-Jan-01 00:00` or `2024-01-01T00:00:00`.
    Calendar,
}

/// Column names and encodings for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvMapping {
    pub epoch: String,
    pub ra: String,
    pub dec: String,
    pub delta: String,
    pub angles: AngleFormat,
    pub epochs: EpochFormat,
}

impl Default for CsvMapping {
    /// The toolkit's own layout.
    fn default() -> Self {
        CsvMapping {
            epoch: "epoch_s".into(),
            ra: "ra_rad".into(),
            dec: "dec_rad".into(),
            delta: "delta_au".into(),
            angles: AngleFormat::Radians,
            epochs: EpochFormat::Seconds,
        }
    }
}

/// Header of the toolkit CSV format.
pub const TOOLKIT_CSV_HEADER: &str = "epoch_s,ra_rad,dec_rad,delta_au";

/// Reads records from a CSV file. Lines starting with `#` are comments.
pub fn load_csv(path: impl AsRef<Path>, mapping: &CsvMapping) -> Result<Vec<EphemerisRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, mapping)
}

/// [`load_csv`] on in-memory text.
pub fn parse_csv(text: &str, mapping: &CsvMapping) -> Result<Vec<EphemerisRecord>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::format(None, e.to_string()))?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let column = |name: &str| index.get(name).copied().ok_or_else(|| Error::Config(format!("unknown column {name:?}")));
    let (ie, ir, id, il) =
        (column(&mapping.epoch)?, column(&mapping.ra)?, column(&mapping.dec)?, column(&mapping.delta)?);

    let mut records = Vec::new();
    for (row_no, row) in reader.records().enumerate() {
        let row_no = row_no + 1;
        let row = row.map_err(|e| Error::format(Some(row_no), e.to_string()))?;
        let cell = |i: usize, name: &str| -> Result<&str> {
            row.get(i).ok_or_else(|| Error::format(Some(row_no), format!("row {row_no} is missing column {name:?}")))
        };
        let bad = |name: &str, text: &str| {
            Error::format(Some(row_no), format!("row {row_no}, column {name:?}: cannot parse {text:?}"))
        };
        let number = |i: usize, name: &str| -> Result<f64> {
            let text = cell(i, name)?;
            text.parse::<f64>().map_err(|_| bad(name, text))
        };

        let epoch = match mapping.epochs {
            EpochFormat::Seconds => {
                let secs = number(ie, &mapping.epoch)?;
                if secs.fract() != 0.0 {
                    return Err(bad(&mapping.epoch, cell(ie, &mapping.epoch)?));
                }
                Epoch(secs as i64)
            }
            EpochFormat::Calendar => {
                let text = cell(ie, &mapping.epoch)?;
                Epoch::parse_calendar(text).map_err(|_| bad(&mapping.epoch, text))?
            }
        };
        let (ra, dec) = match mapping.angles {
            AngleFormat::Radians => (number(ir, &mapping.ra)?, number(id, &mapping.dec)?),
            AngleFormat::Sexagesimal => {
                let ra_text = cell(ir, &mapping.ra)?;
                let dec_text = cell(id, &mapping.dec)?;
                (
                    parse_hms(ra_text).map_err(|_| bad(&mapping.ra, ra_text))?,
                    parse_dms(dec_text).map_err(|_| bad(&mapping.dec, dec_text))?,
                )
            }
        };
        let delta = number(il, &mapping.delta)?;
        records.push(EphemerisRecord::new(epoch, ra, dec, delta)?);
    }
    sort_and_validate(records)
}

/// Writes records in the toolkit CSV format, preceded by optional
/// `#`-prefixed header comment lines.
///
/// Reals use the shortest representation that parses back to the same
/// `f64`, which is at least as precise as 12 significant digits.
pub fn write_csv<W: Write>(mut out: W, records: &[EphemerisRecord], comments: &[String]) -> std::io::Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "{TOOLKIT_CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{},{:?},{:?},{:?}", r.epoch.0, r.ra, r.dec, r.delta)?;
    }
    Ok(())
}

/// Parameters of a Horizons observer-table request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HorizonsQuery {
    pub target: String,
    pub center: String,
    pub start: NaiveDateTime,
    pub stop: NaiveDateTime,
    pub step_minutes: u32,
    pub quantities: Vec<String>,
}

impl HorizonsQuery {
    pub fn new(
        target: impl Into<String>,
        center: impl Into<String>,
        start: NaiveDateTime,
        stop: NaiveDateTime,
        step_minutes: u32,
        quantities: Vec<String>,
    ) -> Result<Self> {
        if start >= stop {
            return Err(Error::validation("Horizons query", "start must precede stop"));
        }
        if step_minutes < 1 {
            return Err(Error::validation("Horizons query", "step must be at least one minute"));
        }
        Ok(HorizonsQuery { target: target.into(), center: center.into(), start, stop, step_minutes, quantities })
    }

    /// Geocentric Moon, RA/DEC and delta, one year from 2024-01-01 at 60 min.
    pub fn lunar_2024() -> Self {
        let day = |y, m, d| NaiveDate::from_ymd_opt(y, m, d).and_then(|d| d.and_hms_opt(0, 0, 0)).expect("valid date");
        HorizonsQuery {
            target: "301".into(),
            center: "500@399".into(),
            start: day(2024, 1, 1),
            stop: day(2025, 1, 1),
            step_minutes: 60,
            quantities: vec!["1".into(), "20".into()],
        }
    }

    /// Query-string parameters of the Horizons API.
    pub fn parameters(&self) -> Vec<(&'static str, String)> {
        let quote = |s: &str| format!("'{s}'");
        vec![
            ("format", "text".into()),
            ("COMMAND", quote(&self.target)),
            ("OBJ_DATA", "NO".into()),
            ("MAKE_EPHEM", "YES".into()),
            ("EPHEM_TYPE", "OBSERVER".into()),
            ("CENTER", quote(&self.center)),
            ("START_TIME", quote(&self.start.format("%Y-%m-%d %H:%M").to_string())),
            ("STOP_TIME", quote(&self.stop.format("%Y-%m-%d %H:%M").to_string())),
            ("STEP_SIZE", quote(&format!("{} m", self.step_minutes))),
            ("QUANTITIES", quote(&self.quantities.join(","))),
            ("ANG_FORMAT", "HMS".into()),
            ("CSV_FORMAT", "YES".into()),
        ]
    }
}

/// Requests an observer table and returns the response body unchanged.
pub fn fetch_horizons(query: &HorizonsQuery, endpoint: &str) -> Result<String> {
    let mut request = ureq::get(endpoint);
    for (key, value) in query.parameters() {
        request = request.query(key, value);
    }
    let mut response = request.call().map_err(|e| Error::Transport(format!("{endpoint}: {e}")))?;
    let body = response
        .body_mut()
        .with_config()
        .limit(64 * 1024 * 1024)
        .read_to_string()
        .map_err(|e| Error::Transport(format!("{endpoint}: {e}")))?;
    if body.trim().is_empty() {
        return Err(Error::Transport(format!("{endpoint}: empty response body")));
    }
    Ok(body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const SAMPLE: &str = "\
*******************************************************************************
 Date__(UT)__HR:MN, , ,R.A._____(ICRF),____DEC_____, delta, deldot,
*******************************************************************************
$$SOE
 2024-Jan-01 02:00, , ,12 37 28.41,+00 11 09.7, 0.00270311023012,  -0.0917838,
 2024-Jan-01 00:00, , ,12 33 39.55,+00 51 08.9, 0.00270578174102,  -0.0735449,
 2024-Jan-01 01:00,*, ,12 35 34.01,+00 31 09.9, 0.00270447155103,  -0.0827111,
$$EOE
*******************************************************************************
";

    #[test]
    fn hms_examples() {
        assert_eq!(hms_to_radians(0, 0, 0.0).unwrap(), 0.0);
        assert!((hms_to_radians(12, 0, 0.0).unwrap() - PI).abs() < 1e-15);
        assert!((hms_to_radians(6, 2, 16.18).unwrap() - 1.580_699_615_858_921).abs() < 1e-12);
        let err = hms_to_radians(24, 0, 0.0).unwrap_err().to_string();
        assert!(err.contains("hours"), "{err}");
        assert!(hms_to_radians(1, 60, 0.0).unwrap_err().to_string().contains("minutes"));
        assert!(hms_to_radians(1, 0, 60.0).unwrap_err().to_string().contains("seconds"));
    }

    #[test]
    fn dms_examples() {
        assert_eq!(dms_to_radians(false, 0, 0, 0.0).unwrap(), 0.0);
        assert!((dms_to_radians(true, 90, 0, 0.0).unwrap() + FRAC_PI_2).abs() < 1e-15);
        assert!((dms_to_radians(false, 23, 26, 21.4).unwrap() - 0.409_092_571_511_762).abs() < 1e-12);
        assert!(dms_to_radians(false, 90, 0, 1.0).is_err());
        assert!(dms_to_radians(false, 91, 0, 0.0).is_err());
    }

    #[test]
    fn sexagesimal_text_forms() {
        let spaced = parse_hms("06 02 16.18").unwrap();
        let colon = parse_hms("06:02:16.18").unwrap();
        assert_eq!(spaced, colon);
        assert!((parse_dms("-05:10:00").unwrap() + (5.0 + 10.0 / 60.0f64).to_radians()).abs() < 1e-15);
        assert!(parse_dms("-00 30 00").unwrap() < 0.0);
        assert!(parse_hms("-01 00 00").is_err());
        assert!(parse_hms("12 00").is_err());
    }

    #[test]
    fn horizons_sample_is_sorted() {
        let records = parse_horizons_text(SAMPLE).unwrap();
        assert_eq!(records.len(), 3);
        assert!(records.windows(2).all(|w| w[0].epoch < w[1].epoch));
        assert_eq!(records[0].epoch.to_string(), "2024-01-01T00:00:00Z");
        assert!((records[0].delta - 0.002_705_781_741_02).abs() < 1e-15);
    }

    #[test]
    fn horizons_without_header_infers_columns() {
        let body = SAMPLE.lines().filter(|l| !l.contains("Date__")).collect::<Vec<_>>().join("\n");
        assert_eq!(parse_horizons_text(&body).unwrap(), parse_horizons_text(SAMPLE).unwrap());
    }

    #[test]
    fn horizons_errors() {
        let no_soe = SAMPLE.replace("$$SOE", "");
        assert!(matches!(parse_horizons_text(&no_soe), Err(Error::Format { .. })));
        let no_eoe = SAMPLE.replace("$$EOE", "");
        assert!(matches!(parse_horizons_text(&no_eoe), Err(Error::Format { .. })));

        let bad = SAMPLE.replace("12 35 34.01", "12 xx 34.01");
        match parse_horizons_text(&bad) {
            Err(Error::Format { line: Some(7), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }

        let dup = SAMPLE.replace("2024-Jan-01 02:00", "2024-Jan-01 01:00");
        assert!(matches!(parse_horizons_text(&dup), Err(Error::Validation { .. })));
    }

    #[test]
    fn csv_radians_and_sexagesimal() {
        let text = "epoch_s,ra_rad,dec_rad,delta_au,extra\n10,1.0,0.1,0.0025,x\n0,2.0,-0.2,0.0026,y\n";
        let recs = parse_csv(text, &CsvMapping::default()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].epoch, Epoch(0));

        let mapping = CsvMapping {
            epoch: "time".into(),
            ra: "ra".into(),
            dec: "dec".into(),
            delta: "dist".into(),
            angles: AngleFormat::Sexagesimal,
            epochs: EpochFormat::Calendar,
        };
        let text = "time,ra,dec,dist\n2024-01-01 00:00,06 02 16.18,+23 26 21.4,0.0026\n";
        let recs = parse_csv(text, &mapping).unwrap();
        assert!((recs[0].ra - 1.580_699_615_858_921).abs() < 1e-12);
    }

    #[test]
    fn csv_errors() {
        let neg = "epoch_s,ra_rad,dec_rad,delta_au\n0,1.0,0.1,-1\n";
        assert!(matches!(parse_csv(neg, &CsvMapping::default()), Err(Error::Validation { .. })));
        let missing = "epoch_s,ra,dec_rad,delta_au\n0,1.0,0.1,1\n";
        assert!(matches!(parse_csv(missing, &CsvMapping::default()), Err(Error::Config(_))));
        let garbage = "epoch_s,ra_rad,dec_rad,delta_au\n0,1.0,0.1,1\n1,abc,0.1,1\n";
        let err = parse_csv(garbage, &CsvMapping::default()).unwrap_err().to_string();
        assert!(err.contains("row 2") && err.contains("ra_rad"), "{err}");
        assert!(matches!(load_csv("/nonexistent/x.csv", &CsvMapping::default()), Err(Error::Io { .. })));
    }

    #[test]
    fn csv_writer_round_trip() {
        let recs = parse_horizons_text(SAMPLE).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &recs, &["test header".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# test header\nepoch_s,ra_rad,dec_rad,delta_au\n"));
        assert_eq!(parse_csv(&text, &CsvMapping::default()).unwrap(), recs);
    }

    #[test]
    fn query_validation_and_parameters() {
        let q = HorizonsQuery::lunar_2024();
        assert!(HorizonsQuery::new("301", "500@399", q.stop, q.start, 60, vec![]).is_err());
        assert!(HorizonsQuery::new("301", "500@399", q.start, q.stop, 0, vec![]).is_err());
        let params = q.parameters();
        assert!(params.contains(&("STEP_SIZE", "'60 m'".into())));
        assert!(params.contains(&("START_TIME", "'2024-01-01 00:00'".into())));
    }

    #[test]
    fn epoch_reference() {
        assert_eq!(Epoch::parse_calendar("2000-Jan-01 12:00").unwrap(), Epoch(0));
        let e = Epoch::parse_calendar("2024-01-01T00:00:00").unwrap();
        assert_eq!(Epoch::parse_calendar("2024-Jan-01 00:00:00.000").unwrap(), e);
        assert_eq!(e.to_string(), "2024-01-01T00:00:00Z");
    }
}
