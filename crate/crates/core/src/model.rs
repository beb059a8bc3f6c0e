//! The `w`-model space `M_w^m`: a warped product `[0, inf) x_w S^{m-1}`
//! with warping function `w(0) = 0`, `w'(0) = 1`, `w > 0` elsewhere.
//!
//! Distance spheres of radius `r` have constant mean curvature
//! `eta_w(r) = w'(r)/w(r)` and the radial sectional curvature is
//! `-w''(r)/w(r)`. For space forms (`w = r`, `sinh r`, `sin r`) these
//! reduce to the familiar constants.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::expr::RadialExpr;
use crate::quadrature::Integrator;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpace {
    dim: usize,
    warping: RadialExpr,
}

/// Point where the behaviour at the origin is probed.
pub const ORIGIN_PROBE: f64 = 1e-6;
const ORIGIN_TOL: f64 = 1e-4;
const VALIDATION_POINTS: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum WarpingViolation {
    /// `|w(1e-6)| > 1e-4`
    NonZeroAtOrigin { r: f64, value: f64 },
    /// `|w'(1e-6) - 1| > 1e-4`
    UnitSlopeAtOrigin { r: f64, slope: f64 },
    /// `w(r) <= 0` on the grid.
    NotPositive { r: f64, value: f64 },
    /// `w` could not be evaluated.
    Unevaluable { r: f64, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub r_max: f64,
    pub violations: Vec<WarpingViolation>,
    /// First grid point where `w` overflowed, if any. Points beyond it
    /// are not checked.
    pub overflow_from: Option<f64>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Geometric grid of `n` points on `[lo, hi]`.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else if i == 0 {
                lo
            } else {
                (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Checks that `w` behaves like a warping function on `(1e-6, r_max]`.
pub fn validate_warping(w: &RadialExpr, r_max: f64) -> ValidationReport {
    let mut violations = Vec::new();
    match w.eval_jet2(ORIGIN_PROBE) {
        Ok(j) => {
            if j.value.abs() > ORIGIN_TOL {
                violations.push(WarpingViolation::NonZeroAtOrigin {
                    r: ORIGIN_PROBE,
                    value: j.value,
                });
            }
            if (j.d1 - 1.0).abs() > ORIGIN_TOL {
                violations.push(WarpingViolation::UnitSlopeAtOrigin {
                    r: ORIGIN_PROBE,
                    slope: j.d1,
                });
            }
        }
        Err(e) => violations.push(WarpingViolation::Unevaluable {
            r: ORIGIN_PROBE,
            message: e.to_string(),
        }),
    }
    let mut overflow_from = None;
    if r_max > ORIGIN_PROBE {
        for r in geometric_grid(ORIGIN_PROBE, r_max, VALIDATION_POINTS).into_iter().skip(1) {
            match w.eval(r) {
                Ok(v) if v > 0.0 => {}
                Ok(v) => {
                    violations.push(WarpingViolation::NotPositive { r, value: v });
                    break;
                }
                Err(e) if e.is_non_finite() => {
                    overflow_from = Some(r);
                    break;
                }
                Err(e) => {
                    violations.push(WarpingViolation::Unevaluable {
                        r,
                        message: e.to_string(),
                    });
                    break;
                }
            }
        }
    }
    ValidationReport {
        r_max,
        violations,
        overflow_from,
    }
}

/// Volume of the unit `(m-1)`-sphere, `2 pi^{m/2} / Gamma(m/2)`.
pub fn unit_sphere_volume(m: usize) -> f64 {
    let half = m as f64 / 2.0;
    (std::f64::consts::LN_2 + half * std::f64::consts::PI.ln() - ln_gamma(half)).exp()
}

impl ModelSpace {
    pub fn new(dim: usize, warping: RadialExpr) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "model dimension must be at least 2, got {dim}"
            )));
        }
        Ok(ModelSpace { dim, warping })
    }

    pub fn euclidean(dim: usize) -> Self {
        ModelSpace::new(dim, RadialExpr::parse("r").expect("literal")).expect("dim >= 2")
    }

    pub fn hyperbolic(dim: usize) -> Self {
        ModelSpace::new(dim, RadialExpr::parse("sinh(r)").expect("literal")).expect("dim >= 2")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn warping(&self) -> &RadialExpr {
        &self.warping
    }

    pub fn validate(&self, r_max: f64) -> ValidationReport {
        validate_warping(&self.warping, r_max)
    }

    fn positive_jet(&self, r: f64) -> Result<crate::Jet2> {
        let j = self.warping.eval_jet2(r)?;
        if j.value == 0.0 {
            return Err(Error::domain(r, &self.warping, "warping vanishes"));
        }
        Ok(j)
    }

    /// Mean curvature `w'/w` of the distance sphere of radius `r`.
    pub fn eta(&self, r: f64) -> Result<f64> {
        let j = self.positive_jet(r)?;
        Ok(j.d1 / j.value)
    }

    /// Radial sectional curvature `-w''/w`.
    pub fn radial_curvature(&self, r: f64) -> Result<f64> {
        let j = self.positive_jet(r)?;
        Ok(-j.d2 / j.value)
    }

    /// `Vol(dB_r) = omega_{m-1} w(r)^{m-1}`.
    pub fn sphere_volume(&self, r: f64) -> Result<f64> {
        let w = self.warping.eval(r)?;
        Ok(unit_sphere_volume(self.dim) * w.powi(self.dim as i32 - 1))
    }

    /// Radial p-Laplacian `|f'|^{p-2} ((p-1) f'' + (m-1) eta_w f')` of a
    /// radial function `f`.
    pub fn p_laplacian_radial(&self, f: &RadialExpr, p: f64, r: f64) -> Result<f64> {
        if p < 2.0 {
            return Err(Error::InvalidArgument(format!("p must be at least 2, got {p}")));
        }
        let jf = f.eval_jet2(r)?;
        let eta = self.eta(r)?;
        Ok(radial_p_laplacian(self.dim, p, eta, jf.d1, jf.d2))
    }

    /// Exact p-capacity of the annulus `(B_rho, B_R)`:
    /// `omega_{m-1} (int_rho^R w^{(1-m)/(p-1)})^{1-p}`.
    pub fn exact_annulus_p_capacity(&self, rho: f64, big_r: f64, p: f64) -> Result<f64> {
        if !(rho > 0.0 && big_r > rho) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < rho < R, got rho = {rho}, R = {big_r}"
            )));
        }
        if p < 2.0 {
            return Err(Error::InvalidArgument(format!("p must be at least 2, got {p}")));
        }
        let exponent = (1.0 - self.dim as f64) / (p - 1.0);
        let q = Integrator::with_rel_tol(1e-12).integrate(
            |t| {
                let w = self.warping.eval(t)?;
                if w <= 0.0 {
                    return Err(Error::domain(t, &self.warping, "warping is not positive"));
                }
                Ok(w.powf(exponent))
            },
            rho,
            big_r,
        )?;
        Ok(unit_sphere_volume(self.dim) * q.value.powf(1.0 - p))
    }
}

/// `|f'|^{p-2} ((p-1) f'' + (m-1) eta f')`, continuously extended by zero
/// where `f' = 0` and `p > 2`.
pub fn radial_p_laplacian(m: usize, p: f64, eta: f64, d1: f64, d2: f64) -> f64 {
    let bracket = (p - 1.0) * d2 + (m as f64 - 1.0) * eta * d1;
    if p == 2.0 {
        return bracket;
    }
    if d1 == 0.0 {
        return 0.0;
    }
    d1.abs().powf(p - 2.0) * bracket
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, FRAC_PI_2, PI};

    fn expr(s: &str) -> RadialExpr {
        RadialExpr::parse(s).unwrap()
    }

    fn model(m: usize, w: &str) -> ModelSpace {
        ModelSpace::new(m, expr(w)).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn space_form_warpings_are_valid() {
        assert!(validate_warping(&expr("r"), 100.0).is_valid());
        assert!(validate_warping(&expr("sinh(r)"), 100.0).is_valid());
        assert!(validate_warping(&expr("tanh(r)"), 100.0).is_valid());
    }

    #[test]
    fn square_warping_fails_unit_slope() {
        let report = validate_warping(&expr("r^2"), 10.0);
        assert!(!report.is_valid());
        assert!(matches!(
            report.violations[0],
            WarpingViolation::UnitSlopeAtOrigin { .. }
        ));
    }

    #[test]
    fn sphere_warping_fails_positivity_past_pi() {
        let report = validate_warping(&expr("sin(r)"), 4.0);
        match &report.violations[..] {
            [WarpingViolation::NotPositive { r, .. }] => assert!(*r >= PI),
            other => panic!("{other:?}"),
        }
        assert!(validate_warping(&expr("sin(r)"), 3.0).is_valid());
    }

    #[test]
    fn exponential_warping_fails_at_origin() {
        let report = validate_warping(&expr("exp(r)"), 1.0);
        assert!(matches!(
            report.violations[0],
            WarpingViolation::NonZeroAtOrigin { .. }
        ));
    }

    #[test]
    fn hyperbolic_overflow_is_recorded_not_failed() {
        let report = validate_warping(&expr("sinh(r)"), 1e4);
        assert!(report.is_valid());
        assert!(report.overflow_from.unwrap() > 700.0);
    }

    #[test]
    fn eta_examples() {
        assert_eq!(model(2, "r").eta(2.0).unwrap(), 0.5);
        let coth1 = 1f64.cosh() / 1f64.sinh();
        assert!(rel(model(2, "sinh(r)").eta(1.0).unwrap(), coth1) < 1e-15);
        assert!((coth1 - 1.313035).abs() < 1e-6);
        assert!(model(2, "sin(r)").eta(FRAC_PI_2).unwrap().abs() < 1e-15);
    }

    #[test]
    fn eta_at_zero_of_warping_is_domain_error() {
        let m = model(2, "r - 1");
        assert!(matches!(m.eta(1.0), Err(Error::Domain { .. })));
        assert!(matches!(m.radial_curvature(1.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn space_form_curvatures_are_constant() {
        for (w, k) in [("r", 0.0), ("sinh(r)", -1.0), ("sin(r)", 1.0)] {
            let ms = model(3, w);
            for i in 0..100 {
                let r = 0.01 + 3.0 * i as f64 / 100.0;
                let got = ms.radial_curvature(r).unwrap();
                assert!((got - k).abs() < 1e-9, "{w} at {r}: {got}");
            }
        }
    }

    #[test]
    fn sphere_volumes() {
        assert!(rel(model(3, "r").sphere_volume(1.0).unwrap(), 4.0 * PI) < 1e-14);
        assert!(rel(model(2, "r").sphere_volume(2.0).unwrap(), 4.0 * PI) < 1e-14);
        let s = 1f64.sinh();
        assert!(rel(model(3, "sinh(r)").sphere_volume(1.0).unwrap(), 4.0 * PI * s * s) < 1e-14);
        assert!((4.0 * PI * s * s - 17.355387).abs() < 1e-6);
    }

    #[test]
    fn unit_sphere_volume_large_dimension() {
        // omega_{m-1} by the recurrence omega_{m+1} = 2 pi omega_{m-1} / m
        let mut omega = [0.0; 51];
        omega[2] = 2.0 * PI;
        omega[3] = 4.0 * PI;
        for m in 4..=50 {
            omega[m] = 2.0 * PI * omega[m - 2] / (m as f64 - 2.0);
        }
        for m in 2..=50 {
            assert!(rel(unit_sphere_volume(m), omega[m]) < 1e-12, "m = {m}");
        }
    }

    #[test]
    fn p_laplacian_examples() {
        assert!(model(2, "r").p_laplacian_radial(&expr("log(r)"), 2.0, 3.0).unwrap().abs() < 1e-15);
        // u' = 1/r: 2 * (-1/r^2) + 2 * (1/r)(1/r) = 0
        assert!(model(3, "r").p_laplacian_radial(&expr("log(r)"), 3.0, 2.0).unwrap().abs() < 1e-15);
        assert_eq!(model(3, "r").p_laplacian_radial(&expr("r"), 2.0, 1.0).unwrap(), 2.0);
    }

    #[test]
    fn p_laplacian_degenerate_gradient() {
        // f = (r - 1)^2 has f'(1) = 0
        let v = model(3, "r").p_laplacian_radial(&expr("(r - 1)^2"), 3.0, 1.0).unwrap();
        assert_eq!(v, 0.0);
        let v = model(3, "r").p_laplacian_radial(&expr("(r - 1)^2"), 2.0, 1.0).unwrap();
        assert_eq!(v, 2.0);
    }

    #[test]
    fn exact_capacity_examples() {
        let c = model(3, "r").exact_annulus_p_capacity(1.0, 2.0, 2.0).unwrap();
        assert!(rel(c, 4.0 * PI / (1.0 - 0.5)) < 1e-12);
        assert!(rel(c, 25.13274) < 1e-6);
        let c = model(2, "r").exact_annulus_p_capacity(1.0, E, 2.0).unwrap();
        assert!(rel(c, 2.0 * PI) < 1e-12);
        let ln2 = 2f64.ln();
        let c = model(3, "r").exact_annulus_p_capacity(1.0, 2.0, 3.0).unwrap();
        assert!(rel(c, 4.0 * PI / (ln2 * ln2)) < 1e-12);
    }

    #[test]
    fn exact_capacity_rejects_bad_radii() {
        let ms = model(3, "r");
        assert!(ms.exact_annulus_p_capacity(2.0, 1.0, 2.0).is_err());
        assert!(ms.exact_annulus_p_capacity(0.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn exact_capacity_decreases_in_outer_radius() {
        for w in ["r", "sinh(r)", "tanh(r)"] {
            let ms = model(3, w);
            let caps: Vec<f64> = [1.5, 2.0, 4.0, 8.0, 16.0]
                .iter()
                .map(|&big_r| ms.exact_annulus_p_capacity(1.0, big_r, 2.5).unwrap())
                .collect();
            assert!(caps.iter().all(|&c| c > 0.0));
            assert!(caps.windows(2).all(|w| w[1] < w[0]), "{caps:?}");
        }
    }

    #[test]
    fn exact_radial_profile_is_p_harmonic() {
        // u(r) = int_1^r w^{(1-m)/(p-1)}, so u' = w^{(1-m)/(p-1)} and
        // u'' = (1-m)/(p-1) * eta * u'.
        for (m, w, p) in [(3, "r", 2.0), (3, "sinh(r)", 3.0), (4, "r", 5.5), (2, "tanh(r)", 2.5)] {
            let ms = model(m, w);
            for i in 0..100 {
                let r = 0.2 + 4.0 * i as f64 / 100.0;
                let jw = ms.warping().eval_jet2(r).unwrap();
                let k = (1.0 - m as f64) / (p - 1.0);
                let d1 = jw.value.powf(k);
                let d2 = k * jw.value.powf(k - 1.0) * jw.d1;
                let lap = radial_p_laplacian(m, p, ms.eta(r).unwrap(), d1, d2);
                assert!(lap.abs() <= 1e-7, "m={m} w={w} p={p} r={r}: {lap}");
            }
        }
    }
}
