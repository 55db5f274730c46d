//! Column-oriented numeric tables for the search.

use std::collections::HashMap;

use crate::cycles::AnomalySample;
use crate::error::{Error, Result};

/// Named columns of equal length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

/// Column holding the mean anomaly in datasets built from residual samples.
pub const MEAN_ANOMALY: &str = "M";
/// Column holding the true anomaly.
pub const TRUE_ANOMALY: &str = "v";
/// Column holding `v - M`.
pub const RESIDUAL: &str = "residual";

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_columns<S: Into<String>>(columns: impl IntoIterator<Item = (S, Vec<f64>)>) -> Result<Self> {
        let mut out = Dataset::new();
        for (name, values) in columns {
            out = out.with_column(name, values)?;
        }
        Ok(out)
    }

    /// Dataset with columns `M`, `v` and `residual`.
    pub fn from_samples(samples: &[AnomalySample]) -> Self {
        Dataset {
            names: vec![MEAN_ANOMALY.into(), TRUE_ANOMALY.into(), RESIDUAL.into()],
            columns: vec![
                samples.iter().map(|s| s.mean_anomaly).collect(),
                samples.iter().map(|s| s.true_anomaly).collect(),
                samples.iter().map(|s| s.residual).collect(),
            ],
        }
    }

    pub fn with_column(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if self.names.contains(&name) {
            return Err(Error::Config(format!("duplicate column {name:?}")));
        }
        if !self.columns.is_empty() && values.len() != self.rows() {
            return Err(Error::Config(format!("column {name:?} has {} rows, expected {}", values.len(), self.rows())));
        }
        self.names.push(name);
        self.columns.push(values);
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.rows() == 0
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.column(name).ok_or_else(|| Error::Config(format!("dataset has no column {name:?}")))
    }

    pub fn row(&self, index: usize) -> HashMap<&str, f64> {
        self.names.iter().zip(&self.columns).map(|(n, c)| (n.as_str(), c[index])).collect()
    }

    /// At most `max_rows` rows taken at an even stride, first row included.
    pub fn strided(&self, max_rows: usize) -> Dataset {
        let n = self.rows();
        if max_rows == 0 || n <= max_rows {
            return self.clone();
        }
        let picks: Vec<usize> = (0..max_rows).map(|k| k * n / max_rows).collect();
        Dataset {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| picks.iter().map(|&i| c[i]).collect()).collect(),
        }
    }
}

/// Name of the k-th harmonic column.
pub fn harmonic_name(k: usize) -> String {
    format!("sin_{k}")
}

/// Appends `sin_1..sin_K`, where `sin_k = sin(k * column)`.
pub fn augment_harmonics(dataset: &Dataset, column: &str, k: usize) -> Result<Dataset> {
    if k == 0 {
        return Err(Error::Config("harmonic count must be at least 1".into()));
    }
    let base = dataset.require(column)?.to_vec();
    let mut out = dataset.clone();
    for h in 1..=k {
        let values = base.iter().map(|m| (h as f64 * m).sin()).collect();
        out = out.with_column(harmonic_name(h), values)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn harmonics_at_quarter_turn() {
        let d = Dataset::from_columns([("M", vec![FRAC_PI_2, 0.0])]).unwrap();
        let a = augment_harmonics(&d, "M", 3).unwrap();
        assert_eq!(a.rows(), 2);
        let row = a.row(0);
        assert!((row["sin_1"] - 1.0).abs() < 1e-15);
        assert!(row["sin_2"].abs() < 1e-15);
        assert!((row["sin_3"] + 1.0).abs() < 1e-15);
        let b = augment_harmonics(&d, "M", 1).unwrap();
        assert_eq!(b.row(1)["sin_1"], 0.0);
        assert!(augment_harmonics(&d, "x", 1).is_err());
    }

    #[test]
    fn stride_keeps_first_row() {
        let d = Dataset::from_columns([("x", (0..10).map(f64::from).collect())]).unwrap();
        let s = d.strided(4);
        assert_eq!(s.column("x").unwrap(), &[0.0, 2.0, 5.0, 7.0]);
        assert_eq!(d.strided(50), d);
    }

    #[test]
    fn ragged_columns_rejected() {
        let d = Dataset::from_columns([("x", vec![1.0, 2.0])]).unwrap();
        assert!(d.clone().with_column("y", vec![1.0]).is_err());
        assert!(d.with_column("x", vec![1.0, 2.0]).is_err());
    }
}
