//! Constant fitting for skeletons.
//!
//! A skeleton is split into additive terms. Placeholders that only scale a
//! term (or stand alone as an intercept) enter linearly and are solved by
//! least squares; any remaining placeholders are searched on a grid and
//! then polished, together with the linear ones, by a compass search on the
//! mean absolute error.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::dataset::Dataset;
use super::expr::{BinaryOp, Expr, UnaryOp};
use super::measure::{mean_capped_error, LOSS_CAP};
use crate::error::{Error, Result};

/// Grid points per nonlinear constant.
pub const GRID_POINTS: usize = 41;
/// Grid range for nonlinear constants.
pub const GRID_BOUND: f64 = 10.0;
/// Compass search stops once its step falls below this.
pub const MIN_STEP: f64 = 1e-10;
/// Rows used for the coarse grid.
const GRID_ROWS: usize = 64;

#[derive(Debug, Clone, Copy)]
enum Instr {
    Column(usize),
    Const(f64),
    Param(usize),
    Unary(UnaryOp),
    Binary(BinaryOp),
}

/// Postfix program over precomputed columns. Placeholder-free subtrees are
/// evaluated once at compile time.
#[derive(Debug, Clone)]
struct Program {
    instrs: Vec<Instr>,
    depth: usize,
}

/// Vectorised evaluation of a placeholder-free expression; NaN marks
/// out-of-domain rows.
pub(crate) fn eval_columns(expr: &Expr, data: &Dataset) -> Result<Vec<f64>> {
    let n = data.rows();
    Ok(match expr {
        Expr::Var(name) => {
            data.column(name).ok_or_else(|| Error::Evaluation(format!("variable {name:?} is not bound")))?.to_vec()
        }
        Expr::Const(c) => vec![*c; n],
        Expr::Param => return Err(Error::Evaluation("unfitted placeholder constant".into())),
        Expr::Unary(op, a) => {
            let mut v = eval_columns(a, data)?;
            v.iter_mut().for_each(|x| *x = op.apply(*x));
            v
        }
        Expr::Binary(op, a, b) => {
            let mut v = eval_columns(a, data)?;
            let w = eval_columns(b, data)?;
            v.iter_mut().zip(&w).for_each(|(x, y)| *x = op.apply(*x, *y));
            v
        }
    })
}

/// Placeholder numbering by node identity, in pre-order.
type Slots = HashMap<*const Expr, usize>;

fn number_slots(expr: &Expr, slots: &mut Slots) {
    expr.visit(&mut |node| {
        if matches!(node, Expr::Param) {
            let next = slots.len();
            slots.insert(node as *const Expr, next);
        }
    });
}

struct Compiler<'a> {
    data: &'a Dataset,
    slots: &'a Slots,
    columns: Vec<Vec<f64>>,
}

impl Compiler<'_> {
    fn finish(instrs: Vec<Instr>) -> Program {
        let (mut depth, mut max) = (0usize, 0usize);
        for i in &instrs {
            match i {
                Instr::Column(_) | Instr::Const(_) | Instr::Param(_) => depth += 1,
                Instr::Unary(_) => {}
                Instr::Binary(_) => depth -= 1,
            }
            max = max.max(depth);
        }
        Program { instrs, depth: max }
    }

    fn compile(&mut self, expr: &Expr) -> Result<Program> {
        let mut instrs = Vec::new();
        self.emit(expr, &mut instrs)?;
        Ok(Self::finish(instrs))
    }

    /// Program for `prod(factors) / divisor`.
    fn compile_ratio(&mut self, factors: &[&Expr], divisor: Option<&Expr>) -> Result<Program> {
        let mut instrs = Vec::new();
        for (k, f) in factors.iter().enumerate() {
            self.emit(f, &mut instrs)?;
            if k > 0 {
                instrs.push(Instr::Binary(BinaryOp::Mul));
            }
        }
        if let Some(d) = divisor {
            self.emit(d, &mut instrs)?;
            instrs.push(if factors.is_empty() { Instr::Unary(UnaryOp::Inv) } else { Instr::Binary(BinaryOp::Div) });
        }
        Ok(Self::finish(instrs))
    }

    fn emit(&mut self, expr: &Expr, out: &mut Vec<Instr>) -> Result<()> {
        match expr {
            Expr::Param => out.push(Instr::Param(self.slots[&(expr as *const Expr)])),
            Expr::Const(c) => out.push(Instr::Const(*c)),
            e if e.param_count() == 0 => {
                self.columns.push(eval_columns(e, self.data)?);
                out.push(Instr::Column(self.columns.len() - 1));
            }
            Expr::Unary(op, a) => {
                self.emit(a, out)?;
                out.push(Instr::Unary(*op));
            }
            Expr::Binary(op, a, b) => {
                self.emit(a, out)?;
                self.emit(b, out)?;
                out.push(Instr::Binary(*op));
            }
            Expr::Var(_) => unreachable!("variables have no placeholders"),
        }
        Ok(())
    }
}

/// Reusable column buffers for [`Program::run`].
#[derive(Default)]
struct Scratch {
    stack: Vec<Vec<f64>>,
}

impl Program {
    /// Evaluates over all `rows` rows, column by column.
    fn run<'s>(&self, params: &[f64], columns: &[Vec<f64>], rows: usize, scratch: &'s mut Scratch) -> &'s [f64] {
        let stack = &mut scratch.stack;
        while stack.len() < self.depth.max(1) {
            stack.push(Vec::new());
        }
        let mut sp = 0;
        for ins in &self.instrs {
            match *ins {
                Instr::Column(c) => {
                    stack[sp].clear();
                    stack[sp].extend_from_slice(&columns[c]);
                    sp += 1;
                }
                Instr::Const(v) => {
                    stack[sp].clear();
                    stack[sp].resize(rows, v);
                    sp += 1;
                }
                Instr::Param(p) => {
                    stack[sp].clear();
                    stack[sp].resize(rows, params[p]);
                    sp += 1;
                }
                Instr::Unary(op) => stack[sp - 1].iter_mut().for_each(|x| *x = op.apply(*x)),
                Instr::Binary(op) => {
                    sp -= 1;
                    let (lower, upper) = stack.split_at_mut(sp);
                    lower[sp - 1].iter_mut().zip(&upper[0]).for_each(|(x, y)| *x = op.apply(*x, *y));
                }
            }
        }
        &stack[0]
    }
}

/// One additive term, `sign * product(factors) / divisor`. When `param`
/// is set, that placeholder is one of the product's factors and has been
/// removed from `factors`.
struct Term<'a> {
    sign: f64,
    param: Option<&'a Expr>,
    factors: Vec<&'a Expr>,
    divisor: Option<&'a Expr>,
}

fn product_factors<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
    match e {
        Expr::Binary(BinaryOp::Mul, a, b) => {
            product_factors(a, out);
            product_factors(b, out);
        }
        other => out.push(other),
    }
}

/// Splits a sum of terms and pulls out each term's placeholder factor
/// when it has exactly one.
fn split_terms<'a>(expr: &'a Expr, sign: f64, out: &mut Vec<Term<'a>>) {
    match expr {
        Expr::Binary(BinaryOp::Add, a, b) => {
            split_terms(a, sign, out);
            split_terms(b, sign, out);
        }
        Expr::Binary(BinaryOp::Sub, a, b) => {
            split_terms(a, sign, out);
            split_terms(b, -sign, out);
        }
        Expr::Unary(UnaryOp::Neg, a) => split_terms(a, -sign, out),
        other => {
            let (numerator, divisor) = match other {
                Expr::Binary(BinaryOp::Div, n, d) => (&**n, Some(&**d)),
                e => (e, None),
            };
            let mut factors = Vec::new();
            product_factors(numerator, &mut factors);
            let params: Vec<usize> = (0..factors.len()).filter(|&k| matches!(factors[k], Expr::Param)).collect();
            if params.len() == 1 {
                let param = factors.remove(params[0]);
                out.push(Term { sign, param: Some(param), factors, divisor });
            } else {
                out.push(Term { sign, param: None, factors: vec![other], divisor: None });
            }
        }
    }
}

/// A skeleton prepared for repeated evaluation on one dataset.
struct Problem {
    columns: Vec<Vec<f64>>,
    target: Vec<f64>,
    /// (term sign, basis program or `None` for 1, placeholder index) for
    /// placeholders that enter linearly.
    linear: Vec<(f64, Option<Program>, usize)>,
    fixed: Vec<(f64, Program)>,
    whole: Program,
    n_params: usize,
    inner: Vec<usize>,
}

impl Problem {
    fn new(skeleton: &Expr, data: &Dataset, target: &str) -> Result<Problem> {
        let target = data.require(target)?.to_vec();
        let mut slots = Slots::new();
        number_slots(skeleton, &mut slots);
        let n_params = slots.len();
        let mut compiler = Compiler { data, slots: &slots, columns: Vec::new() };
        let mut terms = Vec::new();
        split_terms(skeleton, 1.0, &mut terms);
        let mut linear = Vec::new();
        let mut fixed = Vec::new();
        let mut is_linear = vec![false; n_params];
        for term in &terms {
            match term.param {
                Some(param) => {
                    let p = slots[&(param as *const Expr)];
                    is_linear[p] = true;
                    let prog = if term.factors.is_empty() && term.divisor.is_none() {
                        None
                    } else {
                        Some(compiler.compile_ratio(&term.factors, term.divisor)?)
                    };
                    linear.push((term.sign, prog, p));
                }
                None => fixed.push((term.sign, compiler.compile(term.factors[0])?)),
            }
        }
        let whole = compiler.compile(skeleton)?;
        let inner = (0..n_params).filter(|&p| !is_linear[p]).collect();
        Ok(Problem { columns: compiler.columns, target, linear, fixed, whole, n_params, inner })
    }

    fn rows(&self) -> usize {
        self.target.len()
    }

    /// Mean capped absolute error of the full expression.
    fn loss(&self, params: &[f64], scratch: &mut Scratch) -> f64 {
        let prediction = self.whole.run(params, &self.columns, self.rows(), scratch);
        mean_capped_error(prediction, &self.target)
    }

    /// Solves the linear placeholders by least squares for fixed inner
    /// placeholders, writing them into `params`. Returns false when no row is
    /// usable. `coarse` trades a little accuracy for speed on the grid.
    fn solve_linear(&self, params: &mut [f64], coarse: bool, scratch: &mut Scratch) -> bool {
        let n = self.rows();
        if self.linear.is_empty() {
            return n > 0;
        }
        let mut residual = self.target.clone();
        let mut valid = vec![true; n];
        for (sign, prog) in &self.fixed {
            let values = prog.run(params, &self.columns, n, scratch);
            for ((res, ok), v) in residual.iter_mut().zip(&mut valid).zip(values) {
                if v.is_nan() {
                    *ok = false;
                } else {
                    *res -= sign * v;
                }
            }
        }
        let mut basis = Vec::with_capacity(self.linear.len());
        for (sign, prog, _) in &self.linear {
            let col: Vec<f64> = match prog {
                None => vec![*sign; n],
                Some(prog) => prog.run(params, &self.columns, n, scratch).iter().map(|&v| sign * v).collect(),
            };
            for (ok, v) in valid.iter_mut().zip(&col) {
                if v.is_nan() {
                    *ok = false;
                }
            }
            basis.push(col);
        }
        let used: Vec<usize> = (0..n).filter(|&i| valid[i] && residual[i].is_finite()).collect();
        if used.is_empty() {
            return false;
        }
        let k = basis.len();
        let a = DMatrix::from_fn(used.len(), k, |i, j| basis[j][used[i]]);
        let b = DVector::from_iterator(used.len(), used.iter().map(|&i| residual[i]));
        let coeffs = if coarse { quick_least_squares(a, b) } else { least_squares(a, b) };
        for ((_, _, p), c) in self.linear.iter().zip(coeffs.iter()) {
            params[*p] = *c;
        }
        true
    }
}

/// Minimum-norm least-squares solution of `a x = b`.
fn least_squares(a: DMatrix<f64>, b: DVector<f64>) -> DVector<f64> {
    let svd = a.svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = smax * 1e-12;
    svd.solve(&b, eps.max(f64::MIN_POSITIVE)).unwrap_or_else(|_| DVector::zeros(b.len()))
}

/// Normal equations when they are well conditioned, else [`least_squares`].
fn quick_least_squares(a: DMatrix<f64>, b: DVector<f64>) -> DVector<f64> {
    let gram = a.tr_mul(&a);
    let (lo, hi) = gram.diagonal().iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    if lo > 1e-8 * hi {
        if let Some(chol) = gram.cholesky() {
            let l = chol.l_dirty();
            let (dlo, dhi) = l.diagonal().iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
            if dlo > 1e-6 * dhi {
                return chol.solve(&a.tr_mul(&b));
            }
        }
    }
    least_squares(a, b)
}

fn grid_value(i: usize) -> f64 {
    -GRID_BOUND + 2.0 * GRID_BOUND * i as f64 / (GRID_POINTS - 1) as f64
}

/// How hard the final compass search works.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Effort {
    min_step: f64,
    max_evaluations: usize,
}

impl Effort {
    /// Refinement down to [`MIN_STEP`].
    pub(crate) const FULL: Effort = Effort { min_step: MIN_STEP, max_evaluations: 20_000 };
    /// Cheaper refinement used to rank skeletons before the final refit.
    pub(crate) const SCREEN: Effort = Effort { min_step: 1e-6, max_evaluations: 600 };
}

fn compass_search(problem: &Problem, params: &mut [f64], mut best: f64, effort: Effort, scratch: &mut Scratch) -> f64 {
    let mut step = 0.25;
    let mut evaluations = 0;
    let mut trial = params.to_vec();
    while step >= effort.min_step && evaluations < effort.max_evaluations {
        let mut improved = false;
        'coords: for j in 0..params.len() {
            for dir in [1.0, -1.0] {
                trial.copy_from_slice(params);
                trial[j] += dir * step;
                evaluations += 1;
                let f = problem.loss(&trial, scratch);
                if f < best {
                    best = f;
                    params.copy_from_slice(&trial);
                    improved = true;
                    break 'coords;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    best
}

/// Fits every placeholder of `skeleton` against `target` on `data`.
///
/// Placeholders that enter linearly are solved by least squares. Others
/// are set from a 41-point grid over [-10, 10] each, with the linear ones
/// re-solved at every grid point, and then all placeholders are refined by
/// a compass search on mean absolute error down to a 1e-10 step.
pub fn fit_constants(skeleton: &Expr, data: &Dataset, target: &str) -> Result<Expr> {
    fit_with(skeleton, data, target, Effort::FULL)
}

pub(crate) fn fit_with(skeleton: &Expr, data: &Dataset, target: &str, effort: Effort) -> Result<Expr> {
    if skeleton.param_count() == 0 {
        return Ok(skeleton.clone());
    }
    if data.is_empty() {
        return Err(Error::Fitting("empty dataset".into()));
    }
    let out_of_domain = || Error::Fitting("every row is out of domain".into());
    let problem = Problem::new(skeleton, data, target)?;
    let mut scratch = Scratch::default();

    if problem.inner.is_empty() {
        let mut params = vec![0.0; problem.n_params];
        if !problem.solve_linear(&mut params, false, &mut scratch) {
            return Err(out_of_domain());
        }
        return Ok(skeleton.with_params(&params));
    }

    let coarse_data;
    let coarse = if data.rows() > GRID_ROWS {
        coarse_data = data.strided(GRID_ROWS);
        &Problem::new(skeleton, &coarse_data, target)?
    } else {
        &problem
    };
    let k = problem.inner.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut idx = vec![0usize; k];
    let mut trial = vec![0.0; problem.n_params];
    loop {
        for (slot, &p) in problem.inner.iter().enumerate() {
            trial[p] = grid_value(idx[slot]);
        }
        if coarse.solve_linear(&mut trial, true, &mut scratch) {
            let f = coarse.loss(&trial, &mut scratch);
            if best.as_ref().is_none_or(|(b, _)| f < *b) {
                best = Some((f, trial.clone()));
            }
        }
        let mut slot = 0;
        while slot < k {
            idx[slot] += 1;
            if idx[slot] < GRID_POINTS {
                break;
            }
            idx[slot] = 0;
            slot += 1;
        }
        if slot == k {
            break;
        }
    }
    let (_, mut params) = best.ok_or_else(out_of_domain)?;
    problem.solve_linear(&mut params, false, &mut scratch);
    let start = problem.loss(&params, &mut scratch);
    if start >= LOSS_CAP {
        return Err(out_of_domain());
    }
    compass_search(&problem, &mut params, start, effort, &mut scratch);
    Ok(skeleton.with_params(&params))
}
