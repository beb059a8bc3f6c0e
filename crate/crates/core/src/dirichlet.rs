//! The drifted radial operator
//! `L psi = psi'' + psi' (M_p / ((p - 1) g^2) - eta_w)`
//! on the model annulus `rho < r < R`, its Dirichlet solution
//! `psi(r) = int_rho^r Lambda / int_rho^R Lambda`, an independent
//! Runge–Kutta solution of the same problem, the drifted capacity
//! (the flux of `psi` through the inner sphere) and the resulting upper
//! bound on the p-capacity of the extrinsic ball in the submanifold.

use serde::Serialize;

use crate::constellation::{Constellation, Weight};
use crate::error::{Error, Result};
use crate::quadrature::Integrator;

/// Number of Chebyshev probes used by default for residual checks.
pub const DEFAULT_PROBES: usize = 257;

fn check_annulus(rho: f64, big_r: f64) -> Result<()> {
    if !(rho > 0.0 && big_r > rho && big_r.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < rho < R, got rho = {rho}, R = {big_r}"
        )));
    }
    Ok(())
}

/// First-order part of `L`: `L psi = psi'' + coefficient(r) psi'`.
#[derive(Clone, Copy)]
pub struct DriftOperator<'a> {
    constellation: &'a Constellation,
    p: f64,
}

impl<'a> DriftOperator<'a> {
    pub fn new(constellation: &'a Constellation, p: f64) -> Self {
        DriftOperator { constellation, p }
    }

    /// `c(r) = M_p(r) / ((p - 1) g(r)^2) - eta_w(r)`.
    pub fn coefficient(&self, r: f64) -> Result<f64> {
        Ok(self.constellation.drift_rate(self.p, r)? - self.constellation.model().eta(r)?)
    }

    pub fn apply(&self, r: f64, d1: f64, d2: f64) -> Result<f64> {
        Ok(d2 + self.coefficient(r)? * d1)
    }
}

/// A radial profile on `[rho, R]` with its derivative.
pub trait Profile {
    fn interval(&self) -> (f64, f64);
    fn psi(&self, r: f64) -> Result<f64>;
    fn dpsi(&self, r: f64) -> Result<f64>;
}

/// Closed-form Dirichlet solution `psi(r) = int_rho^r Lambda / int_rho^R Lambda`.
pub struct RadialSolution<'a> {
    rho: f64,
    big_r: f64,
    normalizer: f64,
    weight: Weight<'a>,
    integrator: Integrator,
}

impl<'a> RadialSolution<'a> {
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn big_r(&self) -> f64 {
        self.big_r
    }

    /// `int_rho^R Lambda`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn weight(&self) -> &Weight<'a> {
        &self.weight
    }

    fn integral(&self, a: f64, b: f64) -> Result<f64> {
        Ok(self.integrator.integrate(|t| self.weight.value(t), a, b)?.value)
    }

    /// `psi` on sorted `nodes`, accumulating the integral node to node.
    pub fn sample(&self, nodes: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(nodes.len());
        let mut acc = 0.0;
        let mut prev = self.rho;
        for &r in nodes {
            if r < prev {
                return Err(Error::InvalidArgument("sample nodes must be sorted and >= rho".into()));
            }
            if r == self.big_r {
                out.push(1.0);
                continue;
            }
            acc += self.integral(prev, r)?;
            prev = r;
            out.push(acc / self.normalizer);
        }
        Ok(out)
    }
}

impl Profile for RadialSolution<'_> {
    fn interval(&self) -> (f64, f64) {
        (self.rho, self.big_r)
    }

    fn psi(&self, r: f64) -> Result<f64> {
        if r == self.big_r {
            return Ok(1.0);
        }
        Ok(self.integral(self.rho, r)? / self.normalizer)
    }

    fn dpsi(&self, r: f64) -> Result<f64> {
        Ok(self.weight.value(r)? / self.normalizer)
    }
}

/// Builds the closed-form solution of `L psi = 0`, `psi(rho) = 0`, `psi(R) = 1`.
pub fn solve_dirichlet_closed(c: &Constellation, p: f64, rho: f64, big_r: f64) -> Result<RadialSolution<'_>> {
    check_annulus(rho, big_r)?;
    let weight = c.weight(p, rho)?;
    let integrator = Integrator::with_rel_tol(1e-13);
    let normalizer = integrator.integrate(|t| weight.value(t), rho, big_r)?.value;
    if !(normalizer > 0.0 && normalizer.is_finite()) {
        return Err(Error::Overflow(format!(
            "weight integral over [{rho}, {big_r}] is {normalizer}"
        )));
    }
    Ok(RadialSolution {
        rho,
        big_r,
        normalizer,
        weight,
        integrator,
    })
}

/// A profile known at uniform nodes, interpolated by local quartics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledProfile {
    pub nodes: Vec<f64>,
    pub psi: Vec<f64>,
    pub dpsi: Vec<f64>,
}

impl SampledProfile {
    fn interpolate(&self, values: &[f64], r: f64) -> f64 {
        let n = self.nodes.len();
        let (a, b) = (self.nodes[0], self.nodes[n - 1]);
        let h = (b - a) / (n - 1) as f64;
        let k = (((r - a) / h).round() as isize).clamp(2, n as isize - 3) as usize;
        let idx = [k - 2, k - 1, k, k + 1, k + 2];
        let mut sum = 0.0;
        for &i in &idx {
            let mut l = 1.0;
            for &j in &idx {
                if i != j {
                    l *= (r - self.nodes[j]) / (self.nodes[i] - self.nodes[j]);
                }
            }
            sum += l * values[i];
        }
        sum
    }
}

impl Profile for SampledProfile {
    fn interval(&self) -> (f64, f64) {
        (self.nodes[0], *self.nodes.last().expect("non-empty"))
    }

    fn psi(&self, r: f64) -> Result<f64> {
        Ok(self.interpolate(&self.psi, r))
    }

    fn dpsi(&self, r: f64) -> Result<f64> {
        Ok(self.interpolate(&self.dpsi, r))
    }
}

/// Rescaling threshold for the unnormalized ODE state.
const RESCALE_ABOVE: f64 = 1e150;

/// Integrates `psi' = y`, `y' = -c(r) y` from `(0, 1)` at `rho` with the
/// classical fourth-order Runge–Kutta method on `step_count` uniform
/// steps, then normalizes so that `psi(R) = 1`.
pub fn solve_dirichlet_ode(
    c: &Constellation,
    p: f64,
    rho: f64,
    big_r: f64,
    step_count: usize,
) -> Result<SampledProfile> {
    check_annulus(rho, big_r)?;
    if step_count < 100 {
        return Err(Error::InvalidArgument(format!(
            "step_count must be at least 100, got {step_count}"
        )));
    }
    let op = DriftOperator::new(c, p);
    let h = (big_r - rho) / step_count as f64;
    let mut psi = 0.0;
    let mut y = 1.0;
    // log10 of the scale applied so far; true state = stored * 10^scale
    let mut scale = 0i32;
    let mut nodes = Vec::with_capacity(step_count + 1);
    let mut raw = Vec::with_capacity(step_count + 1);
    nodes.push(rho);
    raw.push((psi, y, scale));
    let mut c0 = op.coefficient(rho)?;
    for i in 0..step_count {
        let r = rho + i as f64 * h;
        let r1 = if i + 1 == step_count { big_r } else { rho + (i + 1) as f64 * h };
        let cm = op.coefficient(r + 0.5 * h)?;
        let c1 = op.coefficient(r1)?;
        let k1y = -c0 * y;
        let k1p = y;
        let y2 = y + 0.5 * h * k1y;
        let k2y = -cm * y2;
        let k2p = y2;
        let y3 = y + 0.5 * h * k2y;
        let k3y = -cm * y3;
        let k3p = y3;
        let y4 = y + h * k3y;
        let k4y = -c1 * y4;
        let k4p = y4;
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        psi += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        if psi.abs() > RESCALE_ABOVE || y.abs() > RESCALE_ABOVE {
            psi /= RESCALE_ABOVE;
            y /= RESCALE_ABOVE;
            scale += 150;
        }
        if !(psi.is_finite() && y.is_finite()) {
            return Err(Error::Overflow(format!(
                "unnormalized solution left f64 range near r = {r1}"
            )));
        }
        nodes.push(r1);
        raw.push((psi, y, scale));
        c0 = c1;
    }
    let (end_psi, _, end_scale) = *raw.last().expect("non-empty");
    if end_psi <= 0.0 {
        return Err(Error::Overflow("unnormalized solution vanished at R".into()));
    }
    let mut psi_out = Vec::with_capacity(raw.len());
    let mut dpsi_out = Vec::with_capacity(raw.len());
    for &(ps, dy, s) in &raw {
        let factor = 10f64.powi(s - end_scale) / end_psi;
        psi_out.push(ps * factor);
        dpsi_out.push(dy * factor);
    }
    *psi_out.last_mut().expect("non-empty") = 1.0;
    Ok(SampledProfile {
        nodes,
        psi: psi_out,
        dpsi: dpsi_out,
    })
}

/// `Cap_L = Vol(dB_rho) Lambda(rho) / int_rho^R Lambda`.
pub fn drifted_capacity(c: &Constellation, p: f64, rho: f64, big_r: f64) -> Result<f64> {
    let sol = solve_dirichlet_closed(c, p, rho, big_r)?;
    Ok(c.model().sphere_volume(rho)? * sol.weight().value(rho)? / sol.normalizer())
}

/// Upper bound `flux * (Cap_L / Vol(dB_rho))^{p-1}` on the p-capacity of
/// the extrinsic annulus in the submanifold, where `flux` is the
/// integral of `|grad^S r|^{p-1}` over the inner extrinsic sphere.
pub fn capacity_upper_bound(c: &Constellation, p: f64, rho: f64, big_r: f64, boundary_flux: f64) -> Result<f64> {
    if !(boundary_flux > 0.0 && boundary_flux.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "boundary flux must be positive, got {boundary_flux}"
        )));
    }
    let cap = drifted_capacity(c, p, rho, big_r)?;
    let vol = c.model().sphere_volume(rho)?;
    Ok(boundary_flux * (cap / vol).powf(p - 1.0))
}

/// Chebyshev points of the first kind mapped into the open interval `(a, b)`.
pub fn chebyshev_nodes(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    (0..n)
        .rev()
        .map(|k| {
            let theta = std::f64::consts::PI * (2 * k + 1) as f64 / (2 * n) as f64;
            mid + half * theta.cos()
        })
        .collect()
}

/// Maximum of `|psi'' + c psi'|` over `probes`, with `psi''` taken by a
/// five-point central difference of the profile's derivative.
pub fn operator_residual(c: &Constellation, p: f64, profile: &dyn Profile, probes: &[f64]) -> Result<f64> {
    let op = DriftOperator::new(c, p);
    let (a, b) = profile.interval();
    let base = 1e-3 * (b - a);
    let mut worst: f64 = 0.0;
    for &r in probes {
        let room = (r - a).min(b - r);
        if room <= 0.0 {
            continue;
        }
        let h = base.min(room / 2.5);
        let f = |x: f64| profile.dpsi(x);
        let d2 = (-f(r + 2.0 * h)? + 8.0 * f(r + h)? - 8.0 * f(r - h)? + f(r - 2.0 * h)?) / (12.0 * h);
        let d1 = profile.dpsi(r)?;
        worst = worst.max(op.apply(r, d1, d2)?.abs());
    }
    Ok(worst)
}
