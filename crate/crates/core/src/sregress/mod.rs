//! Brute-force symbolic regression with a configurable operator bias.
//!
//! Skeletons (trees with placeholder constants) are enumerated in normal
//! form up to a node budget, fitted, scored on a fit and a parsimony axis,
//! and reduced to their Pareto frontier.
//!
//! Every skeleton is first scored on an evenly strided subsample of the
//! rows. The leading Pareto layers of that ranking are then refitted and
//! rescored on all rows, and the frontier is taken over those.

mod config;
mod dataset;
mod enumerate;
mod expr;
mod fit;
mod measure;
mod pareto;

use rayon::prelude::*;

pub use config::{
    Experiment, OperatorVocabulary, SearchConfig, DEFAULT_CONSTANT_GRAIN, DEFAULT_FIT_EPSILON, DEFAULT_SEARCH_ROWS,
    HARMONIC_COUNT, MAX_NODES_LIMIT,
};
pub use dataset::{augment_harmonics, harmonic_name, Dataset, MEAN_ANOMALY, RESIDUAL, TRUE_ANOMALY};
pub use enumerate::enumerate_skeletons;
pub use expr::{eval_expression, format_sig9, simplify, BinaryOp, Expr, UnaryOp, Value};
pub use fit::{fit_constants, GRID_BOUND, GRID_POINTS, MIN_STEP};
pub use measure::{bits_for_error, fit_measure, mean_capped_error, parsimony_measure, LOSS_CAP};
pub use pareto::{
    dominates, pareto_front, pareto_layers, tied, write_frontier_csv, FrameTag, ScoredCandidate, FRONTIER_CSV_HEADER,
    TIE_TOLERANCE,
};

use crate::error::{Error, Result};

/// True if every finite prediction is the same number, or none is finite.
fn is_constant_valued(prediction: &[f64]) -> bool {
    let mut finite = prediction.iter().copied().filter(|v| !v.is_nan());
    let Some(first) = finite.next() else {
        return true;
    };
    let (lo, hi) = finite.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
    hi - lo <= 1e-12 * (1.0 + hi.abs().max(lo.abs()))
}

/// The skeleton of a fitted expression: every number becomes a placeholder.
fn unfitted(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Param => Expr::Param,
        Expr::Var(_) => e.clone(),
        Expr::Unary(op, a) => Expr::unary(*op, unfitted(a)),
        Expr::Binary(op, a, b) => Expr::binary(*op, unfitted(a), unfitted(b)),
    }
}

/// Fits and simplifies a skeleton. When simplification collapses part of
/// the tree (a constant landing on 0 or 1), the smaller skeleton is fitted
/// afresh so that its constants are its own fit.
fn fit_simplified(skeleton: &Expr, data: &Dataset, cfg: &SearchConfig, effort: fit::Effort) -> Option<Expr> {
    let fitted = fit::fit_with(skeleton, data, &cfg.target, effort).ok()?;
    let expression = simplify(&fitted);
    let reduced = unfitted(&expression);
    if reduced == *skeleton || !reduced.has_var() {
        return Some(expression);
    }
    let refitted = fit::fit_with(&reduced, data, &cfg.target, effort).ok()?;
    Some(simplify(&refitted))
}

/// Fits, simplifies and scores one skeleton. `None` means discarded.
fn score(skeleton: &Expr, data: &Dataset, cfg: &SearchConfig, effort: fit::Effort) -> Option<ScoredCandidate> {
    let expression = fit_simplified(skeleton, data, cfg, effort)?;
    let prediction = fit::eval_columns(&expression, data).ok()?;
    if is_constant_valued(&prediction) {
        return None;
    }
    let mae = mean_capped_error(&prediction, data.require(&cfg.target).ok()?);
    let fit = bits_for_error(mae, cfg.fit_epsilon);
    let parsimony = parsimony_measure(&expression, cfg);
    (fit.is_finite() && parsimony.is_finite()).then(|| ScoredCandidate::new(expression, fit, parsimony))
}

fn run_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// Runs the whole search on `data` and returns the Pareto frontier.
///
/// The result does not depend on the number of workers.
pub fn discover(data: &Dataset, cfg: &SearchConfig) -> Result<Vec<ScoredCandidate>> {
    cfg.validate_for(data)?;
    if data.is_empty() {
        return Err(Error::Search("dataset has no rows".into()));
    }
    let skeletons = enumerate_skeletons(cfg);
    let sample = data.strided(cfg.search_rows);
    let screen = if sample.rows() == data.rows() { fit::Effort::FULL } else { fit::Effort::SCREEN };
    run_pool(cfg.workers, || {
        let first: Vec<(usize, ScoredCandidate)> = skeletons
            .par_iter()
            .enumerate()
            .filter_map(|(i, sk)| score(sk, &sample, cfg, screen).map(|c| (i, c)))
            .collect();
        let scored: Vec<ScoredCandidate> = first.iter().map(|(_, c)| c.clone()).collect();
        let finalists: Vec<usize> = if sample.rows() == data.rows() {
            Vec::new()
        } else {
            let mut picks: Vec<usize> =
                pareto_layers(&scored, cfg.refit_layers).into_iter().flatten().map(|k| first[k].0).collect();
            picks.sort_unstable();
            picks
        };
        let rescored: Vec<ScoredCandidate> = if sample.rows() == data.rows() {
            scored
        } else {
            finalists.par_iter().filter_map(|&i| score(&skeletons[i], data, cfg, fit::Effort::FULL)).collect()
        };
        let front = pareto_front(&rescored);
        if front.is_empty() {
            Err(Error::Search("every candidate was discarded".into()))
        } else {
            Ok(front)
        }
    })?
}

/// Coefficient of the best-fitting `c * sin_1` or `c * sin(M)` member of a
/// frontier.
pub fn first_harmonic_coefficient(frontier: &[ScoredCandidate]) -> Option<f64> {
    frontier
        .iter()
        .filter_map(|c| sine_coefficient(&c.expression).map(|k| (c.fit, k)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, k)| k)
}

/// `c` if the expression is `c * sin_1` or `c * sin(M)`.
pub fn sine_coefficient(e: &Expr) -> Option<f64> {
    let is_sine = |x: &Expr| match x {
        Expr::Var(name) => name.as_ref() == harmonic_name(1),
        Expr::Unary(UnaryOp::Sin, inner) => matches!(&**inner, Expr::Var(n) if n.as_ref() == MEAN_ANOMALY),
        _ => false,
    };
    match e {
        Expr::Binary(BinaryOp::Mul, a, b) => match (&**a, &**b) {
            (Expr::Const(c), x) | (x, Expr::Const(c)) if is_sine(x) => Some(*c),
            _ => None,
        },
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_detection() {
        assert!(is_constant_valued(&[1.0, 1.0, f64::NAN]));
        assert!(is_constant_valued(&[f64::NAN]));
        assert!(!is_constant_valued(&[1.0, 1.1]));
    }

    #[test]
    fn sine_coefficients() {
        let a = Expr::binary(BinaryOp::Mul, Expr::constant(0.11), Expr::var("sin_1"));
        let b = Expr::binary(BinaryOp::Mul, Expr::unary(UnaryOp::Sin, Expr::var("M")), Expr::constant(0.2));
        assert_eq!(sine_coefficient(&a), Some(0.11));
        assert_eq!(sine_coefficient(&b), Some(0.2));
        assert_eq!(sine_coefficient(&Expr::var("sin_1")), None);
    }
}
