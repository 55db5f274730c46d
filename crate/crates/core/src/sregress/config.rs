//! Operator vocabularies and search configuration.

use super::dataset::{self, Dataset};
use super::expr::{BinaryOp, UnaryOp};
use crate::error::{Error, Result};

/// The operators a search may combine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorVocabulary {
    pub name: String,
    pub binary: Vec<BinaryOp>,
    pub unary: Vec<UnaryOp>,
    pub allows_constants: bool,
}

impl OperatorVocabulary {
    pub fn new(name: &str, binary: &[BinaryOp], unary: &[UnaryOp], allows_constants: bool) -> Result<Self> {
        if binary.is_empty() && unary.is_empty() {
            return Err(Error::Config(format!("vocabulary {name:?} has no operators")));
        }
        let mut binary = binary.to_vec();
        let mut unary = unary.to_vec();
        binary.sort();
        binary.dedup();
        unary.sort();
        unary.dedup();
        Ok(OperatorVocabulary { name: name.to_string(), binary, unary, allows_constants })
    }

    /// Every binary and unary operator.
    pub fn full() -> Self {
        Self::new("full", &BinaryOp::ALL, &UnaryOp::ALL, true).expect("non-empty")
    }

    /// Arithmetic without division plus sine, cosine and arctangent.
    pub fn trig() -> Self {
        Self::new(
            "trig",
            &[BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul],
            &[UnaryOp::Neg, UnaryOp::Sin, UnaryOp::Cos, UnaryOp::Arctan],
            true,
        )
        .expect("non-empty")
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "full" => Ok(Self::full()),
            "trig" => Ok(Self::trig()),
            other => Err(Error::Config(format!("unknown vocabulary {other:?}"))),
        }
    }

    /// Number of operators.
    pub fn size(&self) -> usize {
        self.binary.len() + self.unary.len()
    }

    pub fn has_binary(&self, op: BinaryOp) -> bool {
        self.binary.contains(&op)
    }

    pub fn has_unary(&self, op: UnaryOp) -> bool {
        self.unary.contains(&op)
    }
}

/// Default fit epsilon, 2^-30.
pub const DEFAULT_FIT_EPSILON: f64 = 1.0 / (1u64 << 30) as f64;
/// Default constant grain, 2^-10.
pub const DEFAULT_CONSTANT_GRAIN: f64 = 1.0 / 1024.0;
/// Largest accepted node budget.
pub const MAX_NODES_LIMIT: usize = 25;
/// Rows used to score skeletons before the finalists are refitted.
pub const DEFAULT_SEARCH_ROWS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub vocabulary: OperatorVocabulary,
    pub max_nodes: usize,
    pub inputs: Vec<String>,
    pub target: String,
    pub fit_epsilon: f64,
    pub constant_grain: f64,
    pub max_constants: usize,
    /// Rows of the strided subsample every skeleton is scored on; 0 means all rows.
    pub search_rows: usize,
    /// Pareto layers of the subsample ranking that are refitted on all rows.
    pub refit_layers: usize,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

/// The three bias settings of the lunar experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    /// Raw mean anomaly, every operator.
    AllFunctions = 1,
    /// Raw mean anomaly, trigonometric vocabulary.
    Trigonometric = 2,
    /// `sin(kM)` inputs for k = 1..3, trigonometric vocabulary.
    Harmonics = 3,
}

/// Harmonic columns used by [`Experiment::Harmonics`].
pub const HARMONIC_COUNT: usize = 3;

impl Experiment {
    pub fn from_number(n: u32) -> Result<Self> {
        match n {
            1 => Ok(Experiment::AllFunctions),
            2 => Ok(Experiment::Trigonometric),
            3 => Ok(Experiment::Harmonics),
            other => Err(Error::Config(format!("experiment must be 1, 2 or 3, got {other}"))),
        }
    }

    pub fn number(self) -> u32 {
        self as u32
    }

    /// Adds any derived input columns the preset needs.
    pub fn prepare(self, data: &Dataset) -> Result<Dataset> {
        match self {
            Experiment::Harmonics => dataset::augment_harmonics(data, dataset::MEAN_ANOMALY, HARMONIC_COUNT),
            _ => Ok(data.clone()),
        }
    }
}

impl SearchConfig {
    pub fn new(vocabulary: OperatorVocabulary, max_nodes: usize, inputs: Vec<String>, target: &str) -> Self {
        SearchConfig {
            vocabulary,
            max_nodes,
            inputs,
            target: target.to_string(),
            fit_epsilon: DEFAULT_FIT_EPSILON,
            constant_grain: DEFAULT_CONSTANT_GRAIN,
            max_constants: 3,
            search_rows: DEFAULT_SEARCH_ROWS,
            refit_layers: 3,
            workers: None,
        }
    }

    pub fn preset(experiment: Experiment) -> Self {
        let target = dataset::RESIDUAL;
        match experiment {
            Experiment::AllFunctions => {
                // the full vocabulary grows roughly tenfold per node; 9 nodes would
                // mean about 10^8 skeletons
                Self::new(OperatorVocabulary::full(), 7, vec![dataset::MEAN_ANOMALY.into()], target)
            }
            Experiment::Trigonometric => {
                Self::new(OperatorVocabulary::trig(), 9, vec![dataset::MEAN_ANOMALY.into()], target)
            }
            Experiment::Harmonics => Self::new(
                OperatorVocabulary::trig(),
                7,
                (1..=HARMONIC_COUNT).map(dataset::harmonic_name).collect(),
                target,
            ),
        }
    }

    /// Checks the configuration on its own.
    pub fn validate(&self) -> Result<()> {
        if self.max_nodes == 0 || self.max_nodes > MAX_NODES_LIMIT {
            return Err(Error::Config(format!("max nodes must be in 1..={MAX_NODES_LIMIT}, got {}", self.max_nodes)));
        }
        if self.inputs.is_empty() {
            return Err(Error::Config("no input columns".into()));
        }
        if !(self.fit_epsilon > 0.0 && self.fit_epsilon.is_finite()) {
            return Err(Error::Config("fit epsilon must be positive".into()));
        }
        if !(self.constant_grain > 0.0 && self.constant_grain.is_finite()) {
            return Err(Error::Config("constant grain must be positive".into()));
        }
        if self.refit_layers == 0 {
            return Err(Error::Config("refit layers must be at least 1".into()));
        }
        Ok(())
    }

    /// Checks the configuration against a dataset.
    pub fn validate_for(&self, data: &Dataset) -> Result<()> {
        self.validate()?;
        for name in self.inputs.iter().chain(std::iter::once(&self.target)) {
            data.require(name)?;
        }
        if self.inputs.contains(&self.target) {
            return Err(Error::Config(format!("target {:?} is also an input", self.target)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_sizes() {
        assert_eq!(OperatorVocabulary::full().size(), 14);
        assert_eq!(OperatorVocabulary::trig().size(), 7);
        assert!(OperatorVocabulary::new("none", &[], &[], true).is_err());
    }

    #[test]
    fn presets_follow_the_three_rows() {
        let one = SearchConfig::preset(Experiment::AllFunctions);
        let two = SearchConfig::preset(Experiment::Trigonometric);
        let three = SearchConfig::preset(Experiment::Harmonics);
        assert_eq!(one.inputs, vec!["M"]);
        assert_eq!(two.inputs, vec!["M"]);
        assert_eq!(three.inputs, vec!["sin_1", "sin_2", "sin_3"]);
        assert_eq!(one.vocabulary.name, "full");
        assert_eq!(two.vocabulary.name, "trig");
        assert_eq!((one.max_nodes, two.max_nodes, three.max_nodes), (7, 9, 7));
    }

    #[test]
    fn validation() {
        let mut cfg = SearchConfig::preset(Experiment::Trigonometric);
        let data = Dataset::from_columns([("M", vec![0.0]), ("residual", vec![0.0])]).unwrap();
        cfg.validate_for(&data).unwrap();
        cfg.max_nodes = 26;
        assert!(cfg.validate().is_err());
        let three = SearchConfig::preset(Experiment::Harmonics);
        assert!(three.validate_for(&data).is_err());
        let prepared = Experiment::Harmonics.prepare(&data).unwrap();
        three.validate_for(&prepared).unwrap();
    }
}
