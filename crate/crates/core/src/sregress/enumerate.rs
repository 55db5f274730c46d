//! Exhaustive bottom-up enumeration of skeletons in normal form.
//!
//! A tree is kept only if every node passes [`root_is_normal`]. The rule at
//! a node looks at the node's operator and its children, so building each
//! size from already-normal smaller trees yields exactly the normal trees.

use std::collections::HashSet;

use super::config::{OperatorVocabulary, SearchConfig};
use super::expr::{BinaryOp, Expr, UnaryOp};

fn is_param(e: &Expr) -> bool {
    matches!(e, Expr::Param)
}

fn is_binary(e: &Expr, op: BinaryOp) -> bool {
    matches!(e, Expr::Binary(o, _, _) if *o == op)
}

fn is_unary(e: &Expr, op: UnaryOp) -> bool {
    matches!(e, Expr::Unary(o, _) if *o == op)
}

fn has_param_child(e: &Expr, ops: &[BinaryOp]) -> bool {
    match e {
        Expr::Binary(op, a, b) => ops.contains(op) && (is_param(a) || is_param(b)),
        _ => false,
    }
}

/// Placeholders among the elements of the left-leaning `op` chain at `e`.
fn chain_params(e: &Expr, op: BinaryOp) -> usize {
    match e {
        Expr::Binary(o, a, b) if *o == op => chain_params(a, op) + usize::from(is_param(b)),
        other => usize::from(is_param(other)),
    }
}

const ADDITIVE: [BinaryOp; 2] = [BinaryOp::Add, BinaryOp::Sub];
const MULTIPLICATIVE: [BinaryOp; 2] = [BinaryOp::Mul, BinaryOp::Div];

fn unary_is_normal(op: UnaryOp, a: &Expr, vocab: &OperatorVocabulary) -> bool {
    let has = |o| vocab.has_binary(o);
    if is_unary(a, UnaryOp::Neg) {
        // neg moves outward through odd functions and vanishes in even ones
        if matches!(
            op,
            UnaryOp::Neg
                | UnaryOp::Sin
                | UnaryOp::Tan
                | UnaryOp::Arctan
                | UnaryOp::Cos
                | UnaryOp::Square
                | UnaryOp::Inv
        ) {
            return false;
        }
    }
    match op {
        UnaryOp::Neg => {
            if has_param_child(a, &MULTIPLICATIVE) || is_binary(a, BinaryOp::Sub) {
                return false;
            }
            !(has_param_child(a, &ADDITIVE) && has(BinaryOp::Add) && has(BinaryOp::Sub))
        }
        UnaryOp::Inv => {
            if is_unary(a, UnaryOp::Inv) || is_binary(a, BinaryOp::Div) {
                return false;
            }
            if is_unary(a, UnaryOp::Exp) && vocab.has_unary(UnaryOp::Neg) {
                return false;
            }
            !(has_param_child(a, &MULTIPLICATIVE) && has(BinaryOp::Mul) && has(BinaryOp::Div))
        }
        UnaryOp::Log => !(is_unary(a, UnaryOp::Exp) || is_unary(a, UnaryOp::Inv) && vocab.has_unary(UnaryOp::Neg)),
        UnaryOp::Sqrt | UnaryOp::Square => !is_unary(a, UnaryOp::Inv),
        _ => true,
    }
}

fn binary_is_normal(op: BinaryOp, a: &Expr, b: &Expr, vocab: &OperatorVocabulary, ta: &str, tb: &str) -> bool {
    let has = |o| vocab.has_binary(o);
    let (pa, pb) = (is_param(a), is_param(b));
    let (na, nb) = (is_unary(a, UnaryOp::Neg), is_unary(b, UnaryOp::Neg));
    let (ia, ib) = (is_unary(a, UnaryOp::Inv), is_unary(b, UnaryOp::Inv));
    if op.is_commutative() {
        // sums and products are left-leaning chains with sorted elements
        if is_binary(b, op) {
            return false;
        }
        let last = match a {
            Expr::Binary(o, _, right) if *o == op => right.canonical_form(),
            _ => ta.to_string(),
        };
        if last.as_str() > tb {
            return false;
        }
        if chain_params(a, op) + usize::from(pb) > 1 {
            return false;
        }
    }
    match op {
        BinaryOp::Add => {
            if (na || nb) && has(BinaryOp::Sub) || na && nb {
                return false;
            }
            if has(BinaryOp::Sub) && (is_binary(a, BinaryOp::Sub) || is_binary(b, BinaryOp::Sub)) {
                return false;
            }
            !(pa && has_param_child(b, &ADDITIVE) || pb && has_param_child(a, &ADDITIVE))
        }
        BinaryOp::Sub => {
            if ta == tb {
                return false;
            }
            if has(BinaryOp::Add) && (pb || na || nb || is_binary(a, BinaryOp::Sub) || is_binary(b, BinaryOp::Sub)) {
                return false;
            }
            !(pa && has_param_child(b, &ADDITIVE))
        }
        BinaryOp::Mul => {
            if na || nb {
                return false;
            }
            if has(BinaryOp::Div) && (ia || ib || is_binary(a, BinaryOp::Div) || is_binary(b, BinaryOp::Div)) {
                return false;
            }
            if ta == tb && vocab.has_unary(UnaryOp::Square) {
                return false;
            }
            !(pa && has_param_child(b, &MULTIPLICATIVE) || pb && has_param_child(a, &MULTIPLICATIVE))
        }
        BinaryOp::Div => {
            if ta == tb || na || nb {
                return false;
            }
            if has(BinaryOp::Mul) && (pb || ia || ib || is_binary(a, BinaryOp::Div) || is_binary(b, BinaryOp::Div)) {
                return false;
            }
            !(pa && has_param_child(b, &MULTIPLICATIVE))
        }
    }
}

/// Local normal-form test for the root of `e`, assuming its subtrees are
/// already normal. `texts` carries the canonical text of binary children.
pub(crate) fn root_is_normal(
    e: &Expr,
    vocab: &OperatorVocabulary,
    max_constants: usize,
    texts: Option<(&str, &str)>,
) -> bool {
    if !e.is_leaf() && !e.has_var() {
        return false;
    }
    if e.param_count() > max_constants {
        return false;
    }
    match e {
        Expr::Var(_) | Expr::Param | Expr::Const(_) => true,
        Expr::Unary(op, a) => unary_is_normal(*op, a, vocab),
        Expr::Binary(op, a, b) => match texts {
            Some((ta, tb)) => binary_is_normal(*op, a, b, vocab, ta, tb),
            None => binary_is_normal(*op, a, b, vocab, &a.canonical_form(), &b.canonical_form()),
        },
    }
}

struct Node {
    expr: Expr,
    text: String,
}

/// All normal-form skeletons with at most `cfg.max_nodes` nodes, ordered by
/// node count and, within a size, by construction order.
pub fn enumerate_skeletons(cfg: &SearchConfig) -> Vec<Expr> {
    let vocab = &cfg.vocabulary;
    let mut levels: Vec<Vec<Node>> = vec![Vec::new()];
    let mut seen: HashSet<String> = HashSet::new();
    let mut out = Vec::new();

    let mut leaves: Vec<Expr> = cfg.inputs.iter().map(|n| Expr::var(n)).collect();
    if vocab.allows_constants && cfg.max_constants > 0 {
        leaves.push(Expr::Param);
    }
    let mut level1 = Vec::new();
    for leaf in leaves {
        let text = leaf.canonical_form();
        if seen.insert(text.clone()) {
            out.push(leaf.clone());
            level1.push(Node { expr: leaf, text });
        }
    }
    levels.push(level1);

    for size in 2..=cfg.max_nodes {
        let mut level = Vec::new();
        for &op in &vocab.unary {
            for child in &levels[size - 1] {
                let e = Expr::unary(op, child.expr.clone());
                if root_is_normal(&e, vocab, cfg.max_constants, None) {
                    let text = format!("({} {})", op.name(), child.text);
                    if seen.insert(text.clone()) {
                        level.push(Node { expr: e, text });
                    }
                }
            }
        }
        for &op in &vocab.binary {
            for left_size in 1..size - 1 {
                let right_size = size - 1 - left_size;
                for left in &levels[left_size] {
                    for right in &levels[right_size] {
                        if left.expr.param_count() + right.expr.param_count() > cfg.max_constants {
                            continue;
                        }
                        let e = Expr::binary(op, left.expr.clone(), right.expr.clone());
                        if root_is_normal(&e, vocab, cfg.max_constants, Some((&left.text, &right.text))) {
                            let (x, y) = if op.is_commutative() && left.text > right.text {
                                (&right.text, &left.text)
                            } else {
                                (&left.text, &right.text)
                            };
                            let text = format!("({} {x} {y})", op.name());
                            if seen.insert(text.clone()) {
                                level.push(Node { expr: e, text });
                            }
                        }
                    }
                }
            }
        }
        out.extend(level.iter().map(|n| n.expr.clone()));
        levels.push(level);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sregress::config::OperatorVocabulary;

    fn cfg(vocab: OperatorVocabulary, nodes: usize) -> SearchConfig {
        SearchConfig::new(vocab, nodes, vec!["M".into()], "y")
    }

    #[test]
    fn single_node() {
        let all = enumerate_skeletons(&cfg(OperatorVocabulary::trig(), 1));
        let texts: Vec<String> = all.iter().map(Expr::canonical_form).collect();
        assert_eq!(texts, vec!["(var M)", "(const ?)"]);
    }

    #[test]
    fn sine_only() {
        let vocab = OperatorVocabulary::new("s", &[], &[UnaryOp::Sin], true).unwrap();
        let all = enumerate_skeletons(&cfg(vocab, 2));
        let texts: Vec<String> = all.iter().map(Expr::canonical_form).collect();
        assert_eq!(texts, vec!["(var M)", "(const ?)", "(sin (var M))"]);
    }

    #[test]
    fn non_decreasing_size_and_unique() {
        let all = enumerate_skeletons(&cfg(OperatorVocabulary::full(), 5));
        let sizes: Vec<usize> = all.iter().map(Expr::node_count).collect();
        assert!(sizes.windows(2).all(|w| w[0] <= w[1]));
        let texts: HashSet<String> = all.iter().map(Expr::canonical_form).collect();
        assert_eq!(texts.len(), all.len());
    }

    #[test]
    fn trig_excludes_other_operators() {
        for e in enumerate_skeletons(&cfg(OperatorVocabulary::trig(), 6)) {
            e.visit(&mut |n| {
                assert!(!matches!(
                    n,
                    Expr::Unary(UnaryOp::Exp | UnaryOp::Log | UnaryOp::Sqrt, _) | Expr::Binary(BinaryOp::Div, _, _)
                ));
            });
        }
    }
}
