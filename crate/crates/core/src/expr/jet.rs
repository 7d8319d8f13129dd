//! Forward-mode propagation of values, gradients and Hessians.
//!
//! A single generic evaluator walks the tree; the number type decides how
//! much derivative information is carried (`f64`, [`Jet1`], [`Jet2`]).
//! Every nonlinear node is expressed through the local partials of a one- or
//! two-argument function (`chain` / `chain2`), so the chain rule lives in
//! exactly two places per jet order.

use nalgebra::DMatrix;

use super::{ExprError, Func, Node};

pub(crate) trait Scalar: Sized {
    const DERIVATIVES: bool;

    fn constant(n: usize, c: f64) -> Self;
    fn variable(n: usize, i: usize, v: f64) -> Self;
    fn value(&self) -> f64;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    /// `g(self)` given g, g', g'' at `self.value()`.
    fn chain(&self, g: f64, d1: f64, d2: f64) -> Self;
    /// `g(a, b)` given the value, gradient and Hessian of `g` at the
    /// argument values.
    #[allow(clippy::too_many_arguments)]
    fn chain2(a: &Self, b: &Self, g: f64, ga: f64, gb: f64, gaa: f64, gab: f64, gbb: f64) -> Self;
    /// True when every derivative entry is zero.
    fn is_flat(&self) -> bool;
}

impl Scalar for f64 {
    const DERIVATIVES: bool = false;

    fn constant(_: usize, c: f64) -> Self {
        c
    }
    fn variable(_: usize, _: usize, v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn chain(&self, g: f64, _: f64, _: f64) -> Self {
        g
    }
    fn chain2(_: &Self, _: &Self, g: f64, _: f64, _: f64, _: f64, _: f64, _: f64) -> Self {
        g
    }
    fn is_flat(&self) -> bool {
        true
    }
}

/// Value and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet1 {
    pub value: f64,
    pub gradient: Vec<f64>,
}

impl Scalar for Jet1 {
    const DERIVATIVES: bool = true;

    fn constant(n: usize, c: f64) -> Self {
        Jet1 {
            value: c,
            gradient: vec![0.0; n],
        }
    }
    fn variable(n: usize, i: usize, v: f64) -> Self {
        let mut gradient = vec![0.0; n];
        gradient[i] = 1.0;
        Jet1 { value: v, gradient }
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn add(&self, o: &Self) -> Self {
        Jet1 {
            value: self.value + o.value,
            gradient: zip(&self.gradient, &o.gradient, |a, b| a + b),
        }
    }
    fn sub(&self, o: &Self) -> Self {
        Jet1 {
            value: self.value - o.value,
            gradient: zip(&self.gradient, &o.gradient, |a, b| a - b),
        }
    }
    fn neg(&self) -> Self {
        Jet1 {
            value: -self.value,
            gradient: self.gradient.iter().map(|a| -a).collect(),
        }
    }
    fn chain(&self, g: f64, d1: f64, _: f64) -> Self {
        Jet1 {
            value: g,
            gradient: self.gradient.iter().map(|a| d1 * a).collect(),
        }
    }
    fn chain2(a: &Self, b: &Self, g: f64, ga: f64, gb: f64, _: f64, _: f64, _: f64) -> Self {
        Jet1 {
            value: g,
            gradient: zip(&a.gradient, &b.gradient, |x, y| ga * x + gb * y),
        }
    }
    fn is_flat(&self) -> bool {
        self.gradient.iter().all(|g| *g == 0.0)
    }
}

/// Value, gradient and Hessian of an expression at a point.
///
/// The Hessian is stored row-major and is exactly symmetric: only the upper
/// triangle is computed, the lower one is a copy.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub gradient: Vec<f64>,
    hessian: Vec<f64>,
}

impl Jet2 {
    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    /// ∂²f / ∂z_i ∂z_j
    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.hessian[i * self.dim() + j]
    }

    pub fn hessian(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_row_slice(n, n, &self.hessian)
    }

    fn build(value: f64, gradient: Vec<f64>, mut upper: impl FnMut(usize, usize) -> f64) -> Self {
        let n = gradient.len();
        let mut hessian = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = upper(i, j);
                hessian[i * n + j] = v;
                hessian[j * n + i] = v;
            }
        }
        Jet2 {
            value,
            gradient,
            hessian,
        }
    }
}

impl Scalar for Jet2 {
    const DERIVATIVES: bool = true;

    fn constant(n: usize, c: f64) -> Self {
        Jet2 {
            value: c,
            gradient: vec![0.0; n],
            hessian: vec![0.0; n * n],
        }
    }
    fn variable(n: usize, i: usize, v: f64) -> Self {
        let mut j = Jet2::constant(n, v);
        j.gradient[i] = 1.0;
        j
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn add(&self, o: &Self) -> Self {
        Jet2 {
            value: self.value + o.value,
            gradient: zip(&self.gradient, &o.gradient, |a, b| a + b),
            hessian: zip(&self.hessian, &o.hessian, |a, b| a + b),
        }
    }
    fn sub(&self, o: &Self) -> Self {
        Jet2 {
            value: self.value - o.value,
            gradient: zip(&self.gradient, &o.gradient, |a, b| a - b),
            hessian: zip(&self.hessian, &o.hessian, |a, b| a - b),
        }
    }
    fn neg(&self) -> Self {
        Jet2 {
            value: -self.value,
            gradient: self.gradient.iter().map(|a| -a).collect(),
            hessian: self.hessian.iter().map(|a| -a).collect(),
        }
    }
    fn chain(&self, g: f64, d1: f64, d2: f64) -> Self {
        let n = self.dim();
        let gradient = self.gradient.iter().map(|a| d1 * a).collect();
        let u = &self.gradient;
        Jet2::build(g, gradient, |i, j| d1 * self.hessian[i * n + j] + d2 * u[i] * u[j])
    }
    fn chain2(a: &Self, b: &Self, g: f64, ga: f64, gb: f64, gaa: f64, gab: f64, gbb: f64) -> Self {
        let n = a.dim();
        let gradient = zip(&a.gradient, &b.gradient, |x, y| ga * x + gb * y);
        let (u, v) = (&a.gradient, &b.gradient);
        Jet2::build(g, gradient, |i, j| {
            ga * a.hessian[i * n + j]
                + gb * b.hessian[i * n + j]
                + gaa * u[i] * u[j]
                + gab * (u[i] * v[j] + v[i] * u[j])
                + gbb * v[i] * v[j]
        })
    }
    fn is_flat(&self) -> bool {
        self.gradient.iter().all(|g| *g == 0.0) && self.hessian.iter().all(|h| *h == 0.0)
    }
}

fn zip(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect()
}

pub(crate) fn evaluate<S: Scalar>(node: &Node, z: &[f64]) -> Result<S, ExprError> {
    let out = eval_node::<S>(node, z)?;
    Ok(out)
}

fn domain(node: &Node, z: &[f64]) -> ExprError {
    ExprError::Domain {
        node: super::Expression {
            root: std::sync::Arc::new(node.clone()),
            arity: z.len(),
        }
        .to_string(),
        point: z.to_vec(),
    }
}

fn finite<S: Scalar>(s: S, node: &Node, z: &[f64]) -> Result<S, ExprError> {
    if s.value().is_finite() {
        Ok(s)
    } else {
        Err(domain(node, z))
    }
}

fn eval_node<S: Scalar>(node: &Node, z: &[f64]) -> Result<S, ExprError> {
    let n = z.len();
    let out = match node {
        Node::Constant(c) => S::constant(n, *c),
        Node::Coordinate(i) => S::variable(n, *i, z[*i]),
        Node::Negate(a) => eval_node::<S>(a, z)?.neg(),
        Node::Add(a, b) => eval_node::<S>(a, z)?.add(&eval_node::<S>(b, z)?),
        Node::Sub(a, b) => eval_node::<S>(a, z)?.sub(&eval_node::<S>(b, z)?),
        Node::Mul(a, b) => {
            let (a, b) = (eval_node::<S>(a, z)?, eval_node::<S>(b, z)?);
            let (x, y) = (a.value(), b.value());
            S::chain2(&a, &b, x * y, y, x, 0.0, 1.0, 0.0)
        }
        Node::Div(a, b) => {
            let (a, b) = (eval_node::<S>(a, z)?, eval_node::<S>(b, z)?);
            let (x, y) = (a.value(), b.value());
            if y == 0.0 {
                return Err(domain(node, z));
            }
            let q = x / y;
            S::chain2(&a, &b, q, 1.0 / y, -q / y, 0.0, -1.0 / (y * y), 2.0 * q / (y * y))
        }
        Node::Pow(base, exponent) => pow::<S>(node, base, exponent, z)?,
        Node::Call(f, a) => {
            let a = eval_node::<S>(a, z)?;
            let x = a.value();
            match f {
                Func::Sin => {
                    let (s, c) = x.sin_cos();
                    a.chain(s, c, -s)
                }
                Func::Cos => {
                    let (s, c) = x.sin_cos();
                    a.chain(c, -s, -c)
                }
                Func::Tan => {
                    if x.cos() == 0.0 {
                        return Err(domain(node, z));
                    }
                    let t = x.tan();
                    let sec2 = 1.0 + t * t;
                    a.chain(t, sec2, 2.0 * t * sec2)
                }
                Func::Exp => {
                    let e = x.exp();
                    a.chain(e, e, e)
                }
                Func::Ln => {
                    if x <= 0.0 {
                        return Err(domain(node, z));
                    }
                    a.chain(x.ln(), 1.0 / x, -1.0 / (x * x))
                }
                Func::Sqrt => {
                    if x < 0.0 || (S::DERIVATIVES && x == 0.0) {
                        return Err(domain(node, z));
                    }
                    let s = x.sqrt();
                    a.chain(s, 0.5 / s, -0.25 / (s * x))
                }
            }
        }
        Node::Atan2(y, x) => {
            let (ys, xs) = (eval_node::<S>(y, z)?, eval_node::<S>(x, z)?);
            let (yv, xv) = (ys.value(), xs.value());
            let r2 = xv * xv + yv * yv;
            if r2 == 0.0 {
                return Err(domain(node, z));
            }
            let r4 = r2 * r2;
            S::chain2(
                &ys,
                &xs,
                yv.atan2(xv),
                xv / r2,
                -yv / r2,
                -2.0 * xv * yv / r4,
                (yv * yv - xv * xv) / r4,
                2.0 * xv * yv / r4,
            )
        }
    };
    finite(out, node, z)
}

fn pow<S: Scalar>(node: &Node, base: &Node, exponent: &Node, z: &[f64]) -> Result<S, ExprError> {
    let a = eval_node::<S>(base, z)?;
    let b = eval_node::<S>(exponent, z)?;
    let x = a.value();
    let y = b.value();
    // integer fast path: exact for any sign of the base
    if exponent.is_constant() && b.is_flat() && y.fract() == 0.0 && y.abs() <= i32::MAX as f64 {
        let k = y as i32;
        if x == 0.0 && k < 0 {
            return Err(domain(node, z));
        }
        let kf = k as f64;
        let (d1, d2) = match k {
            0 => (0.0, 0.0),
            1 => (1.0, 0.0),
            2 => (2.0 * x, 2.0),
            _ => (kf * x.powi(k - 1), kf * (kf - 1.0) * x.powi(k - 2)),
        };
        return Ok(a.chain(x.powi(k), d1, d2));
    }
    if x <= 0.0 {
        return Err(domain(node, z));
    }
    let l = x.ln();
    let g = x.powf(y);
    let gx = y * x.powf(y - 1.0);
    let gy = g * l;
    let gxx = y * (y - 1.0) * x.powf(y - 2.0);
    let gxy = x.powf(y - 1.0) * (1.0 + y * l);
    let gyy = g * l * l;
    Ok(S::chain2(&a, &b, g, gx, gy, gxx, gxy, gyy))
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn square() {
        let e = parse("x^2", &names(&["x"])).unwrap();
        let j = e.eval_jet2(&[3.0]).unwrap();
        assert_eq!(j.value, 9.0);
        assert_eq!(j.gradient, vec![6.0]);
        assert_eq!(j.hess(0, 0), 2.0);
    }

    #[test]
    fn sine_at_origin() {
        let e = parse("sin(x)", &names(&["x"])).unwrap();
        let j = e.eval_jet2(&[0.0]).unwrap();
        assert_eq!(j.value, 0.0);
        assert_eq!(j.gradient, vec![1.0]);
        assert_eq!(j.hess(0, 0), 0.0);
    }

    #[test]
    fn angular_momentum_gradient_matches_central_differences() {
        let e = parse("q1*p2 - q2*p1", &names(&["q1", "q2", "p1", "p2"])).unwrap();
        let z = [1.0, 2.0, 3.0, 4.0];
        let j = e.eval_jet2(&z).unwrap();
        assert_eq!(j.value, -2.0);
        let h = 1e-5;
        for i in 0..4 {
            let mut zp = z;
            let mut zm = z;
            zp[i] += h;
            zm[i] -= h;
            let fd = (e.eval(&zp).unwrap() - e.eval(&zm).unwrap()) / (2.0 * h);
            assert!((fd - j.gradient[i]).abs() < 1e-6);
        }
        assert_eq!(j.gradient, vec![4.0, -3.0, -2.0, 1.0]);
    }

    #[test]
    fn domain_errors() {
        let n = names(&["x", "y"]);
        for (src, z) in [
            ("ln(x)", [0.0, 1.0]),
            ("ln(x)", [-1.0, 1.0]),
            ("1/x", [0.0, 1.0]),
            ("atan2(y, x)", [0.0, 0.0]),
            ("sqrt(x)", [-1.0, 0.0]),
            ("sqrt(x)", [0.0, 0.0]),
            ("x^0.5", [-1.0, 0.0]),
            ("x^y", [-2.0, 0.5]),
            ("x^-1", [0.0, 0.0]),
            ("exp(exp(exp(x)))", [10.0, 0.0]),
        ] {
            let e = parse(src, &n).unwrap();
            assert!(
                matches!(e.eval_jet2(&z), Err(crate::expr::ExprError::Domain { .. })),
                "{src} at {z:?}"
            );
        }
        // value-only evaluation tolerates sqrt(0)
        let e = parse("sqrt(x)", &n).unwrap();
        assert_eq!(e.eval(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn integer_powers_of_negative_bases() {
        let n = names(&["p"]);
        let e = parse("p^3", &n).unwrap();
        let j = e.eval_jet2(&[-2.0]).unwrap();
        assert_eq!(j.value, -8.0);
        assert_eq!(j.gradient, vec![12.0]);
        assert_eq!(j.hess(0, 0), -12.0);
        let e = parse("p^1", &n).unwrap();
        let j = e.eval_jet2(&[0.0]).unwrap();
        assert_eq!((j.value, j.gradient[0], j.hess(0, 0)), (0.0, 1.0, 0.0));
    }

    #[test]
    fn general_power_uses_exp_log_form() {
        let n = names(&["x", "y"]);
        let e = parse("x^y", &n).unwrap();
        let (x, y) = (1.7_f64, 0.6_f64);
        let j = e.eval_jet2(&[x, y]).unwrap();
        assert!((j.value - x.powf(y)).abs() < 1e-15);
        assert!((j.gradient[0] - y * x.powf(y - 1.0)).abs() < 1e-14);
        assert!((j.gradient[1] - x.powf(y) * x.ln()).abs() < 1e-14);
        assert_eq!(j.hess(0, 1), j.hess(1, 0));
    }

    #[test]
    fn atan2_derivatives() {
        let n = names(&["y", "x"]);
        let e = parse("atan2(y, x)", &n).unwrap();
        let j = e.eval_jet2(&[1.0, -1.0]).unwrap();
        assert!((j.value - 0.75 * std::f64::consts::PI).abs() < 1e-15);
        // d/dy = x/r², d/dx = -y/r²
        assert!((j.gradient[0] + 0.5).abs() < 1e-15);
        assert!((j.gradient[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn hessian_symmetric_and_sum_is_componentwise() {
        let n = names(&["a", "b", "c"]);
        let f = parse("sin(a*b)*exp(c) + a^3/b", &n).unwrap();
        let g = parse("sqrt(a^2 + b^2 + c^2)*atan2(b, c)", &n).unwrap();
        let s = parse(
            &format!("{} + {}", f.display_with(&n), g.display_with(&n)),
            &n,
        )
        .unwrap();
        let z = [0.3, 1.2, -0.7];
        let (jf, jg, js) = (
            f.eval_jet2(&z).unwrap(),
            g.eval_jet2(&z).unwrap(),
            s.eval_jet2(&z).unwrap(),
        );
        assert_eq!(js.value, jf.value + jg.value);
        for i in 0..3 {
            assert_eq!(js.gradient[i], jf.gradient[i] + jg.gradient[i]);
            for k in 0..3 {
                assert_eq!(js.hess(i, k), jf.hess(i, k) + jg.hess(i, k));
                assert_eq!(js.hess(i, k), js.hess(k, i));
            }
        }
    }
}
