//! Random test data shared by the integration tests.
#![allow(dead_code)]

use poissonkit::expr::{Func, Node};
use poissonkit::Expression;
use rand::Rng;

/// Random expression in `n` coordinates that is smooth and finite on all of
/// `R^n`: divisions, logarithms and square roots only see arguments of the
/// form `1 + b^2`, and exponentials and tangents only see bounded arguments.
/// Constants are non-negative, so printing re-parses to the same tree.
pub fn random_expression(rng: &mut impl Rng, n: usize, max_depth: usize) -> Expression {
    Expression::new(random_node(rng, n, max_depth), n).expect("coordinates in range")
}

fn leaf(rng: &mut impl Rng, n: usize) -> Node {
    if rng.random_bool(0.6) {
        Node::Coordinate(rng.random_range(0..n))
    } else {
        Node::Constant(rng.random_range(0.0..2.0))
    }
}

fn one_plus_square(b: Node) -> Node {
    Node::add(Node::Constant(1.0), Node::pow(b, Node::Constant(2.0)))
}

fn random_node(rng: &mut impl Rng, n: usize, depth: usize) -> Node {
    if depth == 0 || rng.random_bool(0.25) {
        return leaf(rng, n);
    }
    let d = depth - 1;
    match rng.random_range(0..13) {
        0 => Node::add(random_node(rng, n, d), random_node(rng, n, d)),
        1 => Node::sub(random_node(rng, n, d), random_node(rng, n, d)),
        2 | 3 => Node::mul(random_node(rng, n, d), random_node(rng, n, d)),
        4 => Node::neg(random_node(rng, n, d)),
        5 => Node::div(random_node(rng, n, d), one_plus_square(random_node(rng, n, d))),
        6 => {
            let e = rng.random_range(2..=3) as f64;
            Node::pow(random_node(rng, n, d), Node::Constant(e))
        }
        7 => Node::call(Func::Sin, random_node(rng, n, d)),
        8 => Node::call(Func::Cos, random_node(rng, n, d)),
        9 => Node::call(Func::Exp, Node::call(Func::Sin, random_node(rng, n, d))),
        10 => Node::call(Func::Ln, one_plus_square(random_node(rng, n, d))),
        11 => Node::call(Func::Sqrt, one_plus_square(random_node(rng, n, d))),
        _ => match rng.random_range(0..2) {
            0 => Node::atan2(random_node(rng, n, d), one_plus_square(random_node(rng, n, d))),
            _ => Node::call(
                Func::Tan,
                Node::div(Node::call(Func::Sin, random_node(rng, n, d)), Node::Constant(2.0)),
            ),
        },
    }
}

/// Random polynomial of total degree at most `degree` with coefficients in
/// `[-1, 1]`.
pub fn random_polynomial(rng: &mut impl Rng, n: usize, degree: usize, terms: usize) -> Expression {
    let mut sum = Node::Constant(rng.random_range(0.0..1.0));
    for _ in 0..terms {
        let mut term = Node::Constant(rng.random_range(0.0..1.0));
        for _ in 0..rng.random_range(1..=degree) {
            term = Node::mul(term, Node::Coordinate(rng.random_range(0..n)));
        }
        sum = if rng.random_bool(0.5) {
            Node::add(sum, term)
        } else {
            Node::sub(sum, term)
        };
    }
    Expression::new(sum, n).expect("coordinates in range")
}

pub fn uniform_point(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Product expression `f·g`.
pub fn product(f: &Expression, g: &Expression) -> Expression {
    Expression::new(Node::mul(f.root().clone(), g.root().clone()), f.arity()).expect("same arity")
}

/// `max_i |a_i − b_i| / scale`.
pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()))
}

/// Central-difference gradient.
pub fn fd_gradient(f: &Expression, z: &[f64], h: f64) -> Vec<f64> {
    (0..z.len())
        .map(|i| {
            let mut a = z.to_vec();
            let mut b = z.to_vec();
            a[i] += h;
            b[i] -= h;
            (f.eval(&a).unwrap() - f.eval(&b).unwrap()) / (2.0 * h)
        })
        .collect()
}

/// Second-order central-difference Hessian from function values.
pub fn fd_hessian(f: &Expression, z: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = z.len();
    let at = |di: usize, si: f64, dj: usize, sj: f64| {
        let mut p = z.to_vec();
        p[di] += si * h;
        p[dj] += sj * h;
        f.eval(&p).unwrap()
    };
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (at(i, 1.0, j, 1.0) - at(i, 1.0, j, -1.0) - at(i, -1.0, j, 1.0) + at(i, -1.0, j, -1.0)) / (4.0 * h * h))
                .collect()
        })
        .collect()
}
