//! Scored candidates and Pareto-frontier extraction.

use std::cmp::Ordering;
use std::io::Write;

use super::expr::Expr;
use crate::error::{Error, Result};

/// Two measures closer than this on both axes count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Identifies the frame a candidate was found in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameTag {
    /// Position of the frame in its catalog.
    pub index: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub expression: Expr,
    /// Canonical prefix text of `expression`.
    pub canonical: String,
    pub fit: f64,
    pub parsimony: f64,
    pub frame: Option<FrameTag>,
}

impl ScoredCandidate {
    pub fn new(expression: Expr, fit: f64, parsimony: f64) -> Self {
        let canonical = expression.canonical_form();
        ScoredCandidate { expression, canonical, fit, parsimony, frame: None }
    }

    pub fn with_frame(mut self, tag: FrameTag) -> Self {
        self.frame = Some(tag);
        self
    }

    fn key_cmp(&self, other: &Self) -> Ordering {
        self.canonical
            .cmp(&other.canonical)
            .then_with(|| self.frame.as_ref().map(|f| f.index).cmp(&other.frame.as_ref().map(|f| f.index)))
    }
}

/// True if both measures agree within [`TIE_TOLERANCE`].
pub fn tied(a: &ScoredCandidate, b: &ScoredCandidate) -> bool {
    (a.fit - b.fit).abs() <= TIE_TOLERANCE && (a.parsimony - b.parsimony).abs() <= TIE_TOLERANCE
}

/// True if `a` is no worse than `b` on both measures and not tied with it.
pub fn dominates(a: &ScoredCandidate, b: &ScoredCandidate) -> bool {
    !tied(a, b) && a.fit <= b.fit && a.parsimony <= b.parsimony
}

/// Whether `b` is removed by `a`: dominated, or tied with a smaller key.
/// Exact duplicates are broken by input position.
fn beaten_by(a: &ScoredCandidate, a_pos: usize, b: &ScoredCandidate, b_pos: usize) -> bool {
    if tied(a, b) {
        a.key_cmp(b).then(a_pos.cmp(&b_pos)) == Ordering::Less
    } else {
        dominates(a, b)
    }
}

fn output_order(a: &ScoredCandidate, b: &ScoredCandidate) -> Ordering {
    a.parsimony.total_cmp(&b.parsimony).then_with(|| a.fit.total_cmp(&b.fit)).then_with(|| a.key_cmp(b))
}

/// The non-dominated candidates, one per tie group (the smallest canonical
/// text, then frame index), sorted by ascending parsimony, then fit.
pub fn pareto_front(candidates: &[ScoredCandidate]) -> Vec<ScoredCandidate> {
    survivors(candidates).into_iter().map(|i| candidates[i].clone()).collect()
}

/// Indices of the frontier members in output order.
fn survivors(candidates: &[ScoredCandidate]) -> Vec<usize> {
    let n = candidates.len();
    if n == 0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| candidates[a].parsimony.total_cmp(&candidates[b].parsimony));
    let pars: Vec<f64> = order.iter().map(|&i| candidates[i].parsimony).collect();
    let fits: Vec<f64> = order.iter().map(|&i| candidates[i].fit).collect();
    let table = SparseMin::new(&fits);

    let mut keep = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        let c = &candidates[i];
        // Anything with parsimony below p - tol and fit <= c.fit dominates c.
        let strict_end = pars.partition_point(|&p| p < c.parsimony - TIE_TOLERANCE);
        if strict_end > 0 && table.min(0, strict_end) <= c.fit {
            continue;
        }
        // Remaining rivals lie inside the parsimony tolerance band.
        let band_end = pars.partition_point(|&p| p <= c.parsimony + TIE_TOLERANCE);
        let beaten =
            (strict_end..band_end).filter(|&q| q != pos).any(|q| beaten_by(&candidates[order[q]], order[q], c, i));
        if !beaten {
            keep.push(i);
        }
    }
    keep.sort_by(|&a, &b| output_order(&candidates[a], &candidates[b]));
    keep
}

/// Successive frontiers: layer 0 is the Pareto frontier, layer 1 the
/// frontier of what remains, and so on. Returns indices into `candidates`.
pub fn pareto_layers(candidates: &[ScoredCandidate], layers: usize) -> Vec<Vec<usize>> {
    let mut remaining: Vec<usize> = (0..candidates.len()).collect();
    let mut out = Vec::new();
    while out.len() < layers && !remaining.is_empty() {
        let subset: Vec<ScoredCandidate> = remaining.iter().map(|&i| candidates[i].clone()).collect();
        let front: Vec<usize> = survivors(&subset).into_iter().map(|k| remaining[k]).collect();
        let mut taken = vec![false; candidates.len()];
        for &i in &front {
            taken[i] = true;
        }
        remaining.retain(|&i| !taken[i]);
        out.push(front);
    }
    out
}

/// Range-minimum table over a fixed slice.
struct SparseMin {
    levels: Vec<Vec<f64>>,
}

impl SparseMin {
    fn new(values: &[f64]) -> Self {
        let mut levels = vec![values.to_vec()];
        let mut width = 1;
        while 2 * width <= values.len() {
            let prev = levels.last().expect("level 0");
            let next = (0..=values.len() - 2 * width).map(|i| prev[i].min(prev[i + width])).collect();
            levels.push(next);
            width *= 2;
        }
        SparseMin { levels }
    }

    /// Minimum over `[lo, hi)`, which must be non-empty.
    fn min(&self, lo: usize, hi: usize) -> f64 {
        let len = hi - lo;
        let level = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let width = 1 << level;
        self.levels[level][lo].min(self.levels[level][hi - width])
    }
}

/// Header of the frontier CSV.
pub const FRONTIER_CSV_HEADER: [&str; 6] =
    ["rank", "expression_prefix", "expression_infix", "fit_bits", "parsimony_bits", "frame_tag"];

/// Writes `comments` as `# ` lines, then the frontier as CSV with 1-based ranks.
pub fn write_frontier_csv<W: Write>(out: W, frontier: &[ScoredCandidate], comments: &[String]) -> Result<()> {
    let mut out = out;
    for c in comments {
        writeln!(out, "# {c}").map_err(|e| Error::io("frontier output", e))?;
    }
    let mut w = csv::Writer::from_writer(out);
    let fail = |e: csv::Error| Error::Format { line: None, reason: e.to_string() };
    w.write_record(FRONTIER_CSV_HEADER).map_err(fail)?;
    for (rank, c) in frontier.iter().enumerate() {
        w.write_record([
            (rank + 1).to_string(),
            c.canonical.clone(),
            c.expression.infix(),
            format!("{:.6}", c.fit),
            format!("{:.6}", c.parsimony),
            c.frame.as_ref().map(|f| f.label.clone()).unwrap_or_default(),
        ])
        .map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io("frontier output", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(name: &str, fit: f64, parsimony: f64) -> ScoredCandidate {
        ScoredCandidate::new(Expr::var(name), fit, parsimony)
    }

    #[test]
    fn hand_example() {
        let cs = vec![cand("a", 1.0, 2.0), cand("b", 2.0, 1.0), cand("c", 2.0, 2.0)];
        let front = pareto_front(&cs);
        let names: Vec<&str> = front.iter().map(|c| c.canonical.as_str()).collect();
        assert_eq!(names, vec!["(var b)", "(var a)"]);
    }

    #[test]
    fn single_candidate() {
        let cs = vec![cand("a", 3.0, 4.0)];
        assert_eq!(pareto_front(&cs), cs);
        assert!(pareto_front(&[]).is_empty());
    }

    #[test]
    fn ties_keep_smallest_text() {
        let cs = vec![cand("z", 1.0, 1.0), cand("a", 1.0 + 1e-12, 1.0)];
        let front = pareto_front(&cs);
        assert_eq!(front.len(), 1);
        assert_eq!(front[0].canonical, "(var a)");
    }

    #[test]
    fn layers_partition() {
        let cs = vec![cand("a", 1.0, 3.0), cand("b", 2.0, 2.0), cand("c", 3.0, 3.0), cand("d", 4.0, 4.0)];
        let layers = pareto_layers(&cs, 5);
        assert_eq!(layers, vec![vec![1, 0], vec![2], vec![3]]);
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_frontier_csv(&mut buf, &[cand("M", 1.5, 1.0)], &["note".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "# note\nrank,expression_prefix,expression_infix,fit_bits,parsimony_bits,frame_tag\n1,(var M),M,1.500000,1.000000,\n"
        );
    }
}
