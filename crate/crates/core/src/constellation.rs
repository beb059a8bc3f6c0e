//! Comparison constellations: a submanifold `S^m` of an ambient `N^n`
//! compared against a model `M_w^m` through radial lower bounds
//!
//! - `g` on the radial tangency (lower-tangency case only),
//! - `lambda` on the radial component of the second fundamental form,
//! - `h` on the radial mean convexity.
//!
//! From these the balance function
//! `M_p(r) = (m + p - 2) eta_w(r) - m h(r) - (p - 2) lambda(r)`
//! and the weight
//! `Lambda(r) = w(r) exp(-int_rho^r M_p / ((p - 1) g^2))`
//! are built. With upper tangency `g` is replaced by the constant 1.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::RadialExpr;
use crate::model::{geometric_grid, ModelSpace};
use crate::quadrature::Integrator;

/// Smallest admissible value of `g` in lower-tangency mode.
pub const MIN_TANGENCY: f64 = 1e-8;
/// Width of the band around zero in which a balance value counts as zero,
/// relative to the size of its terms.
pub const ZERO_BAND: f64 = 1e-12;
const MAX_WITNESSES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tangency {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    ambient_dim: usize,
    model: ModelSpace,
    g: RadialExpr,
    lambda: RadialExpr,
    h: RadialExpr,
    tangency: Tangency,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "sign", content = "witnesses", rename_all = "snake_case")]
pub enum SignSummary {
    /// Every sample is within the zero band.
    Zero,
    NonNegative,
    NonPositive,
    /// Both signs occur; carries up to five sign-change locations.
    Mixed(Vec<f64>),
}

/// Samples of `M_p` over a geometric grid together with their sign.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceProfile {
    pub p: f64,
    pub values: Vec<(f64, f64)>,
    pub sign_summary: SignSummary,
    /// Grid point where evaluation overflowed; the profile stops there.
    pub truncated_at: Option<f64>,
}

impl BalanceProfile {
    pub fn is_nonnegative(&self) -> bool {
        matches!(self.sign_summary, SignSummary::Zero | SignSummary::NonNegative)
    }

    pub fn is_nonpositive(&self) -> bool {
        matches!(self.sign_summary, SignSummary::Zero | SignSummary::NonPositive)
    }

    /// Sampled interval actually covered.
    pub fn interval(&self) -> (f64, f64) {
        match (self.values.first(), self.values.last()) {
            (Some(a), Some(b)) => (a.0, b.0),
            _ => (f64::NAN, f64::NAN),
        }
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A balance value together with the scale of the terms that formed it.
#[derive(Debug, Clone, Copy)]
struct BalanceSample {
    value: f64,
    scale: f64,
}

impl BalanceSample {
    fn sign(&self) -> i8 {
        if self.value.abs() <= ZERO_BAND * self.scale.max(1.0) {
            0
        } else if self.value > 0.0 {
            1
        } else {
            -1
        }
    }
}

impl Constellation {
    pub fn new(
        ambient_dim: usize,
        model: ModelSpace,
        g: RadialExpr,
        lambda: RadialExpr,
        h: RadialExpr,
        tangency: Tangency,
    ) -> Result<Self> {
        let m = model.dim();
        if ambient_dim < m {
            return Err(Error::InvalidConstellation(format!(
                "submanifold dimension {m} exceeds ambient dimension {ambient_dim}"
            )));
        }
        Ok(Constellation {
            ambient_dim,
            model,
            g,
            lambda,
            h,
            tangency,
        })
    }

    /// The degenerate constellation `S = N = M_w^m`: `g = 1`, `lambda = h = 0`.
    pub fn self_constellation(model: ModelSpace) -> Self {
        let one = RadialExpr::constant(1.0);
        let zero = RadialExpr::constant(0.0);
        Constellation {
            ambient_dim: model.dim(),
            model,
            g: one,
            lambda: zero.clone(),
            h: zero,
            tangency: Tangency::Lower,
        }
    }

    pub fn with_tangency(mut self, tangency: Tangency) -> Self {
        self.tangency = tangency;
        self
    }

    pub fn with_lambda(mut self, lambda: RadialExpr) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn model(&self) -> &ModelSpace {
        &self.model
    }

    pub fn g(&self) -> &RadialExpr {
        &self.g
    }

    pub fn lambda(&self) -> &RadialExpr {
        &self.lambda
    }

    pub fn h(&self) -> &RadialExpr {
        &self.h
    }

    pub fn tangency(&self) -> Tangency {
        self.tangency
    }

    /// True for `S = N = M_w^m`: `n = m`, `lambda = h = 0` and, with lower
    /// tangency, `g = 1`.
    pub fn is_self_constellation(&self) -> bool {
        let is = |e: &RadialExpr, v: f64| e.is_constant() && e.eval(1.0).is_ok_and(|x| x == v);
        self.ambient_dim == self.dim()
            && is(&self.lambda, 0.0)
            && is(&self.h, 0.0)
            && (self.tangency == Tangency::Upper || is(&self.g, 1.0))
    }

    fn balance_sample(&self, p: f64, r: f64) -> Result<BalanceSample> {
        let m = self.dim() as f64;
        let eta = self.model.eta(r)?;
        let h = self.h.eval(r)?;
        let lambda = self.lambda.eval(r)?;
        let a = (m + p - 2.0) * eta;
        let b = m * h;
        let c = (p - 2.0) * lambda;
        Ok(BalanceSample {
            value: a - b - c,
            scale: a.abs() + b.abs() + c.abs(),
        })
    }

    /// `M_p(r) = (m + p - 2) eta_w(r) - m h(r) - (p - 2) lambda(r)`.
    pub fn balance(&self, p: f64, r: f64) -> Result<f64> {
        self.balance_sample(p, r).map(|s| s.value)
    }

    /// The tangency bound used in the weight: `g(r)` for lower tangency,
    /// identically 1 for upper tangency.
    pub fn tangency_bound(&self, r: f64) -> Result<f64> {
        match self.tangency {
            Tangency::Upper => Ok(1.0),
            Tangency::Lower => {
                let g = self.g.eval(r)?;
                if g < MIN_TANGENCY {
                    return Err(Error::domain(r, &self.g, "tangency bound below 1e-8"));
                }
                Ok(g)
            }
        }
    }

    /// Integrand of the weight's exponent, `M_p / ((p - 1) g^2)`.
    pub fn drift_rate(&self, p: f64, r: f64) -> Result<f64> {
        let g = self.tangency_bound(r)?;
        Ok(self.balance(p, r)? / ((p - 1.0) * g * g))
    }

    /// Checks `0 < g <= 1` on `grid` in lower-tangency mode.
    pub fn validate_tangency(&self, grid: &[f64]) -> Result<()> {
        if self.tangency == Tangency::Upper {
            return Ok(());
        }
        for &r in grid {
            let g = match self.tangency_bound(r) {
                Ok(g) => g,
                Err(e) if e.is_non_finite() => break,
                Err(e) => return Err(e),
            };
            if g > 1.0 + 1e-12 {
                return Err(Error::InvalidConstellation(format!(
                    "tangency bound g({r}) = {g} exceeds 1"
                )));
            }
        }
        Ok(())
    }

    /// Samples `M_p` on a geometric grid of `grid_size` points over
    /// `[lo, hi]` and summarizes its sign.
    pub fn balance_sign(&self, p: f64, lo: f64, hi: f64, grid_size: usize) -> Result<BalanceProfile> {
        if !(lo > 0.0 && hi >= lo) || grid_size == 0 {
            return Err(Error::InvalidArgument(format!(
                "balance grid needs 0 < lo <= hi and at least one point, got [{lo}, {hi}] x {grid_size}"
            )));
        }
        let mut values = Vec::with_capacity(grid_size);
        let mut signs = Vec::with_capacity(grid_size);
        let mut truncated_at = None;
        for r in geometric_grid(lo, hi, grid_size) {
            match self.balance_sample(p, r) {
                Ok(s) => {
                    values.push((r, s.value));
                    signs.push(s.sign());
                }
                Err(e) if e.is_non_finite() && !values.is_empty() => {
                    truncated_at = Some(r);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        let pos = signs.iter().any(|&s| s > 0);
        let neg = signs.iter().any(|&s| s < 0);
        let sign_summary = match (pos, neg) {
            (false, false) => SignSummary::Zero,
            (true, false) => SignSummary::NonNegative,
            (false, true) => SignSummary::NonPositive,
            (true, true) => SignSummary::Mixed(self.sign_changes(p, &values, &signs)?),
        };
        Ok(BalanceProfile {
            p,
            values,
            sign_summary,
            truncated_at,
        })
    }

    fn sign_changes(&self, p: f64, values: &[(f64, f64)], signs: &[i8]) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        let mut last: Option<(usize, i8)> = None;
        for (i, &s) in signs.iter().enumerate() {
            if s == 0 {
                continue;
            }
            if let Some((j, prev)) = last {
                if prev != s {
                    out.push(self.refine_root(p, values[j].0, values[i].0, prev)?);
                    if out.len() == MAX_WITNESSES {
                        break;
                    }
                }
            }
            last = Some((i, s));
        }
        Ok(out)
    }

    /// Bisection for a sign change of `M_p` bracketed by `[a, b]`.
    fn refine_root(&self, p: f64, mut a: f64, mut b: f64, sign_a: i8) -> Result<f64> {
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            let s = self.balance_sample(p, mid)?.sign();
            if s == 0 {
                return Ok(mid);
            }
            if s == sign_a {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b))
    }

    /// Sample points of `profile` that violate the required sign.
    pub fn witnesses(profile: &BalanceProfile, nonnegative: bool) -> Vec<f64> {
        if let SignSummary::Mixed(w) = &profile.sign_summary {
            if !w.is_empty() {
                return w.clone();
            }
        }
        profile
            .values
            .iter()
            .filter(|(_, v)| if nonnegative { *v < 0.0 } else { *v > 0.0 })
            .take(MAX_WITNESSES)
            .map(|(r, _)| *r)
            .collect()
    }

    /// Maximum over `grid` of `|M_p - M_q - (p - q)(eta_w - lambda)|`,
    /// relative to the magnitude of the terms.
    pub fn balance_shift_identity_check(&self, p: f64, q: f64, grid: &[f64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &r in grid {
            let mp = self.balance(p, r)?;
            let mq = self.balance(q, r)?;
            let shift = (p - q) * (self.model.eta(r)? - self.lambda.eval(r)?);
            let scale = 1f64.max(mp.abs()).max(mq.abs()).max(shift.abs());
            worst = worst.max((mp - mq - shift).abs() / scale);
        }
        Ok(worst)
    }

    /// `Lambda_{g,p}(r)` based at `rho`; see [`Weight`] for repeated use.
    pub fn lambda_weight(&self, p: f64, rho: f64, r: f64) -> Result<f64> {
        Weight::new(self, p, rho)?.value(r)
    }

    pub fn weight(&self, p: f64, rho: f64) -> Result<Weight<'_>> {
        Weight::new(self, p, rho)
    }
}

/// Knots per doubling of the radius in [`Weight`]'s cumulative table.
const KNOTS_PER_DOUBLING: f64 = 8.0;

/// The weight `Lambda(r) = w(r) exp(-J(r))`, `J(r) = int_rho^r M_p/((p-1) g^2)`.
///
/// `J` is accumulated on a geometric knot table that grows on demand, so
/// evaluating the weight at many points costs one short quadrature each.
pub struct Weight<'a> {
    constellation: &'a Constellation,
    p: f64,
    rho: f64,
    ratio: f64,
    integrator: Integrator,
    // (knot, J(knot)), starting at (rho, 0)
    table: RefCell<Vec<(f64, f64)>>,
}

impl<'a> Weight<'a> {
    pub fn new(constellation: &'a Constellation, p: f64, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidArgument(format!("base radius must be positive, got {rho}")));
        }
        if p <= 1.0 {
            return Err(Error::InvalidArgument(format!("p must exceed 1, got {p}")));
        }
        Ok(Weight {
            constellation,
            p,
            rho,
            ratio: 2f64.powf(1.0 / KNOTS_PER_DOUBLING),
            integrator: Integrator {
                rel_tol: 1e-13,
                abs_tol: 1e-15,
                max_intervals: 2000,
            },
            table: RefCell::new(vec![(rho, 0.0)]),
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    fn segment(&self, a: f64, b: f64) -> Result<f64> {
        let c = self.constellation;
        let p = self.p;
        Ok(self.integrator.integrate(|t| c.drift_rate(p, t), a, b)?.value)
    }

    /// `J(r) = int_rho^r M_p / ((p - 1) g^2)`.
    pub fn log_decay(&self, r: f64) -> Result<f64> {
        if r == self.rho {
            return Ok(0.0);
        }
        if r < self.rho {
            return self.segment(self.rho, r);
        }
        let mut table = self.table.borrow_mut();
        while table.last().expect("table starts non-empty").0 < r {
            let &(knot, j) = table.last().expect("non-empty");
            let next = knot * self.ratio;
            let inc = self.segment(knot, next)?;
            table.push((next, j + inc));
        }
        let idx = table.partition_point(|&(k, _)| k <= r) - 1;
        let (knot, j) = table[idx];
        drop(table);
        Ok(j + self.segment(knot, r)?)
    }

    /// `Lambda(r)`.
    pub fn value(&self, r: f64) -> Result<f64> {
        let w = self.constellation.model().warping().eval(r)?;
        if r == self.rho {
            return Ok(w);
        }
        let j = self.log_decay(r)?;
        Ok(w * (-j).exp())
    }
}
