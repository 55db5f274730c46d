//! Logarithm-scaled fit and parsimony measures, in bits.

use super::config::SearchConfig;
use super::dataset::Dataset;
use super::expr::Expr;
use super::fit::eval_columns;
use crate::error::{Error, Result};

/// Per-row loss assigned to out-of-domain rows, and the cap on any row's
/// absolute error.
pub const LOSS_CAP: f64 = 1e3;

/// Mean of `min(|prediction - target|, cap)`, with out-of-domain rows at the cap.
pub fn mean_capped_error(prediction: &[f64], target: &[f64]) -> f64 {
    let total: f64 = prediction
        .iter()
        .zip(target)
        .map(|(p, y)| {
            let err = (p - y).abs();
            if err.is_nan() {
                LOSS_CAP
            } else {
                err.min(LOSS_CAP)
            }
        })
        .sum();
    total / prediction.len() as f64
}

/// `log2(1 + mae / epsilon)`.
pub fn bits_for_error(mae: f64, epsilon: f64) -> f64 {
    (mae / epsilon).ln_1p() / std::f64::consts::LN_2
}

/// Fit measure of a fitted expression against `target` on every row.
pub fn fit_measure(expr: &Expr, data: &Dataset, target: &str, epsilon: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Evaluation("empty dataset".into()));
    }
    let prediction = eval_columns(expr, data)?;
    Ok(bits_for_error(mean_capped_error(&prediction, data.require(target)?), epsilon))
}

/// Parsimony of an expression: operators cost `log2(vocabulary size)`,
/// variables `log2(max(2, inputs))`, constants `log2(1 + |c| / grain)`.
pub fn parsimony_measure(expr: &Expr, cfg: &SearchConfig) -> f64 {
    let op_bits = (cfg.vocabulary.size().max(2) as f64).log2();
    let var_bits = (cfg.inputs.len().max(2) as f64).log2();
    let mut total = 0.0;
    expr.visit(&mut |node| {
        total += match node {
            Expr::Var(_) => var_bits,
            Expr::Const(c) => (c.abs() / cfg.constant_grain).ln_1p() / std::f64::consts::LN_2,
            Expr::Param => 0.0,
            Expr::Unary(..) | Expr::Binary(..) => op_bits,
        }
    });
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sregress::config::{OperatorVocabulary, SearchConfig, DEFAULT_FIT_EPSILON};
    use crate::sregress::expr::{BinaryOp, UnaryOp};

    fn trig_one_input() -> SearchConfig {
        SearchConfig::new(OperatorVocabulary::trig(), 9, vec!["M".into()], "y")
    }

    #[test]
    fn fit_bits() {
        let eps = DEFAULT_FIT_EPSILON;
        assert_eq!(bits_for_error(0.0, eps), 0.0);
        assert!((bits_for_error(eps, eps) - 1.0).abs() < 1e-15);
        assert!((bits_for_error(0.003, eps) - 21.6191786639304862).abs() < 1e-9);
    }

    #[test]
    fn perfect_fit_is_zero() {
        let d = Dataset::from_columns([("M", vec![0.1, 0.2]), ("y", vec![0.1, 0.2])]).unwrap();
        assert_eq!(fit_measure(&Expr::var("M"), &d, "y", DEFAULT_FIT_EPSILON).unwrap(), 0.0);
    }

    #[test]
    fn out_of_domain_rows_are_capped() {
        let d = Dataset::from_columns([("M", vec![0.0, 1.0]), ("y", vec![0.0, 1.0])]).unwrap();
        let e = Expr::unary(UnaryOp::Inv, Expr::var("M"));
        let bits = fit_measure(&e, &d, "y", 1.0).unwrap();
        assert!((bits - (1.0 + LOSS_CAP / 2.0).log2()).abs() < 1e-12);
    }

    #[test]
    fn parsimony_examples() {
        let cfg = trig_one_input();
        assert_eq!(parsimony_measure(&Expr::var("M"), &cfg), 1.0);
        assert_eq!(parsimony_measure(&Expr::constant(0.0), &cfg), 0.0);
        let e = Expr::binary(BinaryOp::Mul, Expr::constant(0.1095), Expr::unary(UnaryOp::Sin, Expr::var("M")));
        assert!((parsimony_measure(&e, &cfg) - 13.4365220848944805).abs() < 1e-12);
    }
}
