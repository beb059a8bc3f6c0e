//! Random radial expressions and numerical helpers shared by the
//! integration tests.

#![allow(dead_code)]

use proptest::prelude::*;
use rand::Rng;
use radialcap::expr::{BinOp, Func, Node};

/// A random tree of depth at most `depth` over `r`, small constants, the
/// five binary operators and the built-in functions.
pub fn random_node<R: Rng>(rng: &mut R, depth: usize) -> Node {
    if depth == 0 || rng.random_bool(0.3) {
        return if rng.random_bool(0.6) {
            Node::Var
        } else {
            Node::num((rng.random_range(0.5..3.0f64) * 100.0).round() / 100.0)
        };
    }
    match rng.random_range(0..10) {
        0..=3 => {
            let f = Func::ALL[rng.random_range(0..Func::ALL.len())];
            Node::call(f, random_node(rng, depth - 1))
        }
        4 => Node::neg(random_node(rng, depth - 1)),
        5 => {
            let e = [2.0, 3.0, 0.5, -1.0, 1.5][rng.random_range(0..5)];
            Node::binary(BinOp::Pow, random_node(rng, depth - 1), Node::num(e))
        }
        _ => {
            let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div][rng.random_range(0..4)];
            Node::binary(op, random_node(rng, depth - 1), random_node(rng, depth - 1))
        }
    }
}

fn value(node: &Node, r: f64) -> Option<f64> {
    radialcap::RadialExpr::from_node(node.clone()).eval(r).ok()
}

/// True when some non-smooth point of the tree (a zero of the argument of
/// `abs`, `sqrt`, `log`, `coth`, of a divisor or of a fractional power
/// base) lies within `margin` of its value at `r`.
pub fn near_singularity(node: &Node, r: f64, margin: f64) -> bool {
    let close = |n: &Node| value(n, r).is_none_or(|v| v.abs() < margin);
    match node {
        Node::Num(_) | Node::Var => false,
        Node::Neg(a) => near_singularity(a, r, margin),
        Node::Call(f, a) => {
            let risky = matches!(f, Func::Abs | Func::Sqrt | Func::Log | Func::Coth);
            (risky && close(a)) || near_singularity(a, r, margin)
        }
        Node::Binary(op, a, b) => {
            let risky = match op {
                BinOp::Div => close(b),
                BinOp::Pow => close(a),
                _ => false,
            };
            risky || near_singularity(a, r, margin) || near_singularity(b, r, margin)
        }
    }
}

/// Ridders' extrapolation of a central difference quotient `quotient(h)`
/// towards `h = 0`, starting from `h0`.
pub fn ridders(quotient: impl Fn(f64) -> Option<f64>, h0: f64) -> Option<f64> {
    const SHRINK: f64 = 1.4;
    const ROWS: usize = 10;
    let mut table = [[0.0f64; ROWS]; ROWS];
    let mut h = h0;
    table[0][0] = quotient(h)?;
    let (mut best, mut err) = (table[0][0], f64::INFINITY);
    for i in 1..ROWS {
        h /= SHRINK;
        table[0][i] = quotient(h)?;
        let mut fac = SHRINK * SHRINK;
        for j in 1..=i {
            table[j][i] = (table[j - 1][i] * fac - table[j - 1][i - 1]) / (fac - 1.0);
            fac *= SHRINK * SHRINK;
            let e = (table[j][i] - table[j - 1][i]).abs().max((table[j][i] - table[j - 1][i - 1]).abs());
            if e <= err {
                err = e;
                best = table[j][i];
            }
        }
        if (table[i][i] - table[i - 1][i - 1]).abs() >= 2.0 * err {
            break;
        }
    }
    Some(best)
}

/// Proptest strategy for expression trees of depth at most `depth`, built
/// from the same pieces as [`random_node`].
pub fn node_strategy(depth: u32) -> impl Strategy<Value = Node> {
    let leaf = prop_oneof![
        3 => Just(Node::Var),
        2 => (50u32..300).prop_map(|k| Node::num(k as f64 / 100.0)),
    ];
    leaf.prop_recursive(depth, 32, 2, |inner| {
        prop_oneof![
            4 => (0..Func::ALL.len(), inner.clone()).prop_map(|(i, a)| Node::call(Func::ALL[i], a)),
            1 => inner.clone().prop_map(Node::neg),
            1 => (inner.clone(), prop::sample::select(vec![2.0, 3.0, 0.5, -1.0, 1.5]))
                .prop_map(|(a, e)| Node::binary(BinOp::Pow, a, Node::num(e))),
            4 => (prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div]), inner.clone(), inner)
                .prop_map(|(op, a, b)| Node::binary(op, a, b)),
        ]
    })
}
