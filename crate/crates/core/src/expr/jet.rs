//! Second-order forward-mode differentiation.

use std::ops::{Add, Mul, Neg, Sub};

use super::{BinOp, Func, Node};
use crate::error::{Error, Result, NON_FINITE};

/// A function value together with its first and second derivative in `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet2 {
    pub const fn new(value: f64, d1: f64, d2: f64) -> Self {
        Jet2 { value, d1, d2 }
    }

    pub const fn constant(value: f64) -> Self {
        Jet2::new(value, 0.0, 0.0)
    }

    pub const fn variable(r: f64) -> Self {
        Jet2::new(r, 1.0, 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.d1.is_finite() && self.d2.is_finite()
    }

    /// Chain rule for an outer function with derivatives `f0, f1, f2` at
    /// the inner value.
    fn compose(self, f0: f64, f1: f64, f2: f64) -> Jet2 {
        Jet2::new(f0, f1 * self.d1, f2 * self.d1 * self.d1 + f1 * self.d2)
    }

    fn is_const(&self) -> bool {
        self.d1 == 0.0 && self.d2 == 0.0
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2::new(self.value + o.value, self.d1 + o.d1, self.d2 + o.d2)
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        Jet2::new(self.value - o.value, self.d1 - o.d1, self.d2 - o.d2)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2::new(
            self.value * o.value,
            self.d1 * o.value + self.value * o.d1,
            self.d2 * o.value + 2.0 * self.d1 * o.d1 + self.value * o.d2,
        )
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        Jet2::new(-self.value, -self.d1, -self.d2)
    }
}

pub(super) fn eval(node: &Node, r: f64) -> Result<Jet2> {
    let out = match node {
        Node::Num(v) => Jet2::constant(*v),
        Node::Var => Jet2::variable(r),
        Node::Neg(a) => -eval(a, r)?,
        Node::Binary(op, a, b) => {
            let u = eval(a, r)?;
            let v = eval(b, r)?;
            match op {
                BinOp::Add => u + v,
                BinOp::Sub => u - v,
                BinOp::Mul => u * v,
                BinOp::Div => divide(u, v).ok_or_else(|| Error::domain(r, node, "division by zero"))?,
                BinOp::Pow => power(u, v).map_err(|reason| Error::domain(r, node, reason))?,
            }
        }
        Node::Call(f, a) => {
            let u = eval(a, r)?;
            apply(*f, u).map_err(|reason| Error::domain(r, node, reason))?
        }
    };
    if !out.is_finite() {
        return Err(Error::domain(r, node, NON_FINITE));
    }
    Ok(out)
}

fn divide(u: Jet2, v: Jet2) -> Option<Jet2> {
    if v.value == 0.0 {
        return None;
    }
    let q = u.value / v.value;
    let q1 = (u.d1 - q * v.d1) / v.value;
    let q2 = (u.d2 - 2.0 * q1 * v.d1 - q * v.d2) / v.value;
    Some(Jet2::new(q, q1, q2))
}

fn power(u: Jet2, v: Jet2) -> std::result::Result<Jet2, &'static str> {
    if v.is_const() {
        let n = v.value;
        let x = u.value;
        if n == 0.0 {
            return Ok(Jet2::constant(1.0));
        }
        if x < 0.0 && n.fract() != 0.0 {
            return Err("negative base with non-integer exponent");
        }
        if x == 0.0 && n < 2.0 && n != 1.0 && !u.is_const() {
            return Err("power is not twice differentiable at zero");
        }
        if x == 0.0 && n < 0.0 {
            return Err("zero raised to a negative power");
        }
        let f0 = x.powf(n);
        let f1 = if n == 1.0 { 1.0 } else { n * x.powf(n - 1.0) };
        let f2 = if n == 1.0 {
            0.0
        } else if n == 2.0 {
            2.0
        } else {
            n * (n - 1.0) * x.powf(n - 2.0)
        };
        return Ok(u.compose(f0, f1, f2));
    }
    if u.value <= 0.0 {
        return Err("non-positive base with variable exponent");
    }
    // u^v = exp(v log u)
    let log_u = u.compose(u.value.ln(), 1.0 / u.value, -1.0 / (u.value * u.value));
    let g = v * log_u;
    let e = g.value.exp();
    Ok(g.compose(e, e, e))
}

fn apply(f: Func, u: Jet2) -> std::result::Result<Jet2, &'static str> {
    let x = u.value;
    let j = match f {
        Func::Sin => {
            let (s, c) = x.sin_cos();
            u.compose(s, c, -s)
        }
        Func::Cos => {
            let (s, c) = x.sin_cos();
            u.compose(c, -s, -c)
        }
        Func::Sinh => u.compose(x.sinh(), x.cosh(), x.sinh()),
        Func::Cosh => u.compose(x.cosh(), x.sinh(), x.cosh()),
        Func::Tanh => {
            let t = x.tanh();
            let s = 1.0 - t * t;
            u.compose(t, s, -2.0 * t * s)
        }
        Func::Coth => {
            if x == 0.0 {
                return Err("pole of coth");
            }
            let c = 1.0 / x.tanh();
            let s = 1.0 - c * c;
            u.compose(c, s, -2.0 * c * s)
        }
        Func::Exp => {
            let e = x.exp();
            u.compose(e, e, e)
        }
        Func::Log => {
            if x <= 0.0 {
                return Err("log of a non-positive value");
            }
            u.compose(x.ln(), 1.0 / x, -1.0 / (x * x))
        }
        Func::Sqrt => {
            if x < 0.0 {
                return Err("sqrt of a negative value");
            }
            if x == 0.0 {
                if u.is_const() {
                    return Ok(Jet2::constant(0.0));
                }
                return Err("sqrt is not differentiable at zero");
            }
            let s = x.sqrt();
            u.compose(s, 0.5 / s, -0.25 / (s * x))
        }
        Func::Abs => {
            if x == 0.0 {
                if u.is_const() {
                    return Ok(Jet2::constant(0.0));
                }
                return Err("abs is not differentiable at zero");
            }
            u.compose(x.abs(), x.signum(), 0.0)
        }
    };
    Ok(j)
}

#[cfg(test)]
mod tests {
    use crate::expr::RadialExpr;
    use crate::Error;

    fn jet(s: &str, r: f64) -> super::Jet2 {
        RadialExpr::parse(s).unwrap().eval_jet2(r).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn sinh_near_origin() {
        let j = jet("sinh(r)", 1e-12);
        assert!(j.value.abs() < 1e-11);
        assert!((j.d1 - 1.0).abs() < 1e-12);
        assert!(j.d2.abs() < 1e-11);
    }

    #[test]
    fn square() {
        let j = jet("r^2", 2.0);
        assert_eq!((j.value, j.d1, j.d2), (4.0, 4.0, 2.0));
    }

    #[test]
    fn exp_over_r_matches_central_differences() {
        // oracle: central differences, h = 1e-5
        let e = RadialExpr::parse("exp(r)/r").unwrap();
        let h = 1e-5;
        let f = |x: f64| e.eval(x).unwrap();
        let fd1 = (f(1.0 + h) - f(1.0 - h)) / (2.0 * h);
        let fd2 = (f(1.0 + h) - 2.0 * f(1.0) + f(1.0 - h)) / (h * h);
        let j = e.eval_jet2(1.0).unwrap();
        assert!(close(j.value, std::f64::consts::E, 1e-15));
        assert!(j.d1.abs() < 1e-15);
        assert!(close(j.d2, std::f64::consts::E, 1e-14));
        assert!(close(j.d1, fd1, 1e-8));
        assert!(close(j.d2, fd2, 1e-4));
    }

    #[test]
    fn variable_exponent() {
        // r^r: d1 = r^r (1 + ln r), d2 = r^r ((1 + ln r)^2 + 1/r)
        let j = jet("r^r", 2.0);
        let l = 1.0 + 2f64.ln();
        assert!(close(j.value, 4.0, 1e-15));
        assert!(close(j.d1, 4.0 * l, 1e-14));
        assert!(close(j.d2, 4.0 * (l * l + 0.5), 1e-14));
    }

    #[test]
    fn coth_derivatives() {
        let j = jet("coth(r)", 1.0);
        let c = 1.0f64.cosh() / 1.0f64.sinh();
        assert!(close(j.value, c, 1e-15));
        assert!(close(j.d1, 1.0 - c * c, 1e-14));
        assert!(close(j.d2, 2.0 * c * (c * c - 1.0), 1e-14));
    }

    #[test]
    fn negative_base_integer_power() {
        let j = jet("(r - 3)^3", 1.0);
        assert_eq!((j.value, j.d1, j.d2), (-8.0, 12.0, -12.0));
    }

    #[test]
    fn domain_errors_are_reported() {
        for (s, r) in [
            ("log(r - 1)", 0.5),
            ("1/(r - 1)", 1.0),
            ("coth(r - 2)", 2.0),
            ("sqrt(r - 3)", 1.0),
            ("(r - 3)^0.5", 1.0),
            ("exp(exp(r))", 10.0),
            ("r^(-1)", 0.0),
        ] {
            let e = RadialExpr::parse(s).unwrap();
            match e.eval_jet2(r) {
                Err(Error::Domain { subexpr, .. }) => assert!(!subexpr.is_empty()),
                other => panic!("{s} at {r}: {other:?}"),
            }
        }
    }
}
