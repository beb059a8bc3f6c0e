//! Monte Carlo radial Brownian motion on a model space.
//!
//! The radial part of Brownian motion on `M_w^m` solves
//! `dr = dB + (m - 1)/2 eta_w(r) dt`. Paths start at `r0` and are
//! absorbed at `r_inner` or `r_outer`; the fraction absorbed at the inner
//! sphere estimates the hitting probability
//! `int_r0^R w^{1-m} / int_rho^R w^{1-m}`.
//!
//! Each path draws from its own xoshiro256++ generator keyed by `(seed, path)`,
//! so results do not depend on the number of worker threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelSpace;
use crate::quadrature::Integrator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffusionConfig {
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    pub r_inner: f64,
    pub r_outer: f64,
    /// Paths still inside the annulus at this time are censored.
    pub max_time: f64,
    /// Detect barrier crossings between grid times with the Brownian
    /// bridge crossing probability.
    pub bridge: bool,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        DiffusionConfig {
            dt: 1e-4,
            paths: 20_000,
            seed: 0,
            r_inner: 0.5,
            r_outer: 8.0,
            max_time: 1e3,
            bridge: true,
        }
    }
}

impl DiffusionConfig {
    pub fn validate(&self, r0: f64) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.r_inner > 0.0 && self.r_inner < r0 && r0 < self.r_outer && self.r_outer.is_finite()) {
            return fail(format!(
                "need 0 < r_inner < r0 < r_outer, got {} < {r0} < {}",
                self.r_inner, self.r_outer
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return fail(format!("dt must be positive, got {}", self.dt));
        }
        if self.paths == 0 {
            return fail("paths must be at least 1".into());
        }
        if !(self.max_time > 0.0) {
            return fail(format!("max_time must be positive, got {}", self.max_time));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HittingStats {
    pub paths: usize,
    pub hits_inner: usize,
    pub hits_outer: usize,
    pub censored: usize,
    /// `hits_inner / paths`.
    pub p_inner: f64,
    /// `sqrt(p (1 - p) / paths)`.
    pub stderr: f64,
    /// Average absorption time of the uncensored paths.
    pub mean_exit_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathEnd {
    Inner,
    Outer,
    Censored,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    inner: usize,
    outer: usize,
    censored: usize,
    exit_steps: u64,
}

impl Tally {
    fn single(end: PathEnd, steps: u64) -> Tally {
        let mut t = Tally::default();
        match end {
            PathEnd::Inner => t.inner = 1,
            PathEnd::Outer => t.outer = 1,
            PathEnd::Censored => t.censored = 1,
        }
        if end != PathEnd::Censored {
            t.exit_steps = steps;
        }
        t
    }

    fn merge(self, o: Tally) -> Tally {
        Tally {
            inner: self.inner + o.inner,
            outer: self.outer + o.outer,
            censored: self.censored + o.censored,
            exit_steps: self.exit_steps + o.exit_steps,
        }
    }
}

/// Cells of the drift table per unit of radius, at least.
const CELLS_PER_UNIT: f64 = 64.0;

/// `eta_w` on `[a, b]` as a cubic Hermite interpolant of its exact values
/// and derivatives, so the inner loop does not walk the expression tree.
pub struct DriftTable {
    a: f64,
    inv_h: f64,
    last: usize,
    // per cell, coefficients of the cubic in the local coordinate t in [0, 1]
    cells: Vec<[f64; 4]>,
}

impl DriftTable {
    pub fn new(ms: &ModelSpace, a: f64, b: f64) -> Result<Self> {
        let n = (((b - a) * CELLS_PER_UNIT).ceil() as usize).max(64);
        let h = (b - a) / n as f64;
        let knots = (0..=n)
            .map(|i| {
                let r = if i == n { b } else { a + i as f64 * h };
                let j = ms.warping().eval_jet2(r)?;
                if j.value == 0.0 {
                    return Err(Error::domain(r, ms.warping(), "w vanishes"));
                }
                let eta = j.d1 / j.value;
                Ok((eta, j.d2 / j.value - eta * eta))
            })
            .collect::<Result<Vec<(f64, f64)>>>()?;
        let cells = knots
            .windows(2)
            .map(|k| {
                let (y0, d0) = (k[0].0, h * k[0].1);
                let (y1, d1) = (k[1].0, h * k[1].1);
                [y0, d0, 3.0 * (y1 - y0) - 2.0 * d0 - d1, 2.0 * (y0 - y1) + d0 + d1]
            })
            .collect();
        Ok(DriftTable {
            a,
            inv_h: 1.0 / h,
            last: n - 1,
            cells,
        })
    }

    /// Interpolated `eta_w(r)` for `r` in `[a, b]`.
    #[inline]
    pub fn eta(&self, r: f64) -> f64 {
        let x = (r - self.a) * self.inv_h;
        // saturating conversion; f64::floor is a library call on baseline x86-64
        let cell = (x as usize).min(self.last);
        let t = x - cell as f64;
        let c = &self.cells[cell];
        c[0] + t * (c[1] + t * (c[2] + t * c[3]))
    }
}

/// State of one path inside a lockstep pool.
struct Lane {
    rng: Xoshiro256PlusPlus,
    r: f64,
    steps: u64,
}

impl Lane {
    fn new(seed: u64, index: u64, r0: f64) -> Self {
        Lane {
            rng: path_rng(seed, index),
            r: r0,
            steps: 0,
        }
    }
}

/// Paths advanced together; their dependency chains overlap in the CPU.
const LANES: usize = 8;
/// Paths handed to one worker at a time.
const CHUNK: usize = 256;

/// Precomputed per-step constants.
struct Stepper<'a> {
    table: &'a DriftTable,
    drift_scale: f64,
    sqrt_dt: f64,
    two_over_dt: f64,
    bridge_band: f64,
    bridge: bool,
    a: f64,
    b: f64,
}

impl<'a> Stepper<'a> {
    fn new(table: &'a DriftTable, dim: usize, cfg: &DiffusionConfig) -> Self {
        Stepper {
            table,
            drift_scale: 0.5 * (dim as f64 - 1.0) * cfg.dt,
            sqrt_dt: cfg.dt.sqrt(),
            two_over_dt: 2.0 / cfg.dt,
            bridge_band: 20.0 * cfg.dt,
            bridge: cfg.bridge,
            a: cfg.r_inner,
            b: cfg.r_outer,
        }
    }

    /// One Euler–Maruyama step; `Some` once the path is absorbed.
    #[inline]
    fn step(&self, rng: &mut Xoshiro256PlusPlus, r: &mut f64) -> Option<PathEnd> {
        let z: f64 = rng.sample(StandardNormal);
        let next = *r + self.drift_scale * self.table.eta(*r) + self.sqrt_dt * z;
        if next <= self.a {
            return Some(PathEnd::Inner);
        }
        if next >= self.b {
            return Some(PathEnd::Outer);
        }
        if self.bridge {
            let da = (*r - self.a) * (next - self.a);
            if da < self.bridge_band && rng.random::<f64>() < (-self.two_over_dt * da).exp() {
                return Some(PathEnd::Inner);
            }
            let db = (self.b - *r) * (self.b - next);
            if db < self.bridge_band && rng.random::<f64>() < (-self.two_over_dt * db).exp() {
                return Some(PathEnd::Outer);
            }
        }
        *r = next;
        None
    }
}

fn path_rng(seed: u64, index: u64) -> Xoshiro256PlusPlus {
    // seed_from_u64 runs the key through SplitMix64, so neighbouring keys
    // give unrelated states
    let base = Xoshiro256PlusPlus::seed_from_u64(seed).next_u64();
    Xoshiro256PlusPlus::seed_from_u64(base.wrapping_add(index))
}

/// Runs one path and returns how it ended and after how many steps.
pub fn simulate_path(ms: &ModelSpace, r0: f64, cfg: &DiffusionConfig, index: u64) -> Result<(PathEnd, u64)> {
    cfg.validate(r0)?;
    let table = DriftTable::new(ms, cfg.r_inner, cfg.r_outer)?;
    Ok(run_path(&table, ms.dim(), r0, cfg, index))
}

fn run_path(table: &DriftTable, dim: usize, r0: f64, cfg: &DiffusionConfig, index: u64) -> (PathEnd, u64) {
    let stepper = Stepper::new(table, dim, cfg);
    let mut rng = path_rng(cfg.seed, index);
    let mut r = r0;
    let max_steps = (cfg.max_time / cfg.dt).ceil() as u64;
    for step in 1..=max_steps {
        if let Some(end) = stepper.step(&mut rng, &mut r) {
            return (end, step);
        }
    }
    (PathEnd::Censored, max_steps)
}

/// Runs paths `first .. first + count`, keeping up to `LANES` of them in
/// flight and starting the next one as soon as a path is absorbed.
fn run_chunk(table: &DriftTable, dim: usize, r0: f64, cfg: &DiffusionConfig, first: u64, count: usize) -> Tally {
    let stepper = Stepper::new(table, dim, cfg);
    let max_steps = (cfg.max_time / cfg.dt).ceil() as u64;
    let end = first + count as u64;
    let mut next = first;
    let mut lanes: [Option<Lane>; LANES] = std::array::from_fn(|_| None);
    for slot in lanes.iter_mut() {
        if next < end {
            *slot = Some(Lane::new(cfg.seed, next, r0));
            next += 1;
        }
    }
    let mut tally = Tally::default();
    let mut live = lanes.iter().filter(|l| l.is_some()).count();
    while live > 0 {
        for slot in lanes.iter_mut() {
            let Some(lane) = slot else { continue };
            lane.steps += 1;
            let outcome = match stepper.step(&mut lane.rng, &mut lane.r) {
                None if lane.steps >= max_steps => Some(PathEnd::Censored),
                other => other,
            };
            let Some(path_end) = outcome else { continue };
            tally = tally.merge(Tally::single(path_end, lane.steps));
            if next < end {
                *slot = Some(Lane::new(cfg.seed, next, r0));
                next += 1;
            } else {
                *slot = None;
                live -= 1;
            }
        }
    }
    tally
}

/// Euler–Maruyama estimate of the probability of reaching `r_inner`
/// before `r_outer` from `r0`.
pub fn simulate_radial(ms: &ModelSpace, r0: f64, cfg: &DiffusionConfig) -> Result<HittingStats> {
    cfg.validate(r0)?;
    let table = DriftTable::new(ms, cfg.r_inner, cfg.r_outer)?;
    let dim = ms.dim();
    let chunks = cfg.paths.div_ceil(CHUNK);
    let tally = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let first = k * CHUNK;
            let count = CHUNK.min(cfg.paths - first);
            run_chunk(&table, dim, r0, cfg, first as u64, count)
        })
        .reduce(Tally::default, Tally::merge);
    let n = cfg.paths as f64;
    let p = tally.inner as f64 / n;
    let exited = tally.inner + tally.outer;
    Ok(HittingStats {
        paths: cfg.paths,
        hits_inner: tally.inner,
        hits_outer: tally.outer,
        censored: tally.censored,
        p_inner: p,
        stderr: (p * (1.0 - p) / n).sqrt(),
        mean_exit_time: if exited > 0 {
            tally.exit_steps as f64 * cfg.dt / exited as f64
        } else {
            f64::NAN
        },
    })
}

/// `int_r0^R w^{1-m} / int_rho^R w^{1-m}`.
pub fn exact_hitting_prob(ms: &ModelSpace, r0: f64, rho: f64, big_r: f64) -> Result<f64> {
    if !(rho > 0.0 && rho <= r0 && r0 <= big_r && rho < big_r && big_r.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < rho <= r0 <= R, got rho = {rho}, r0 = {r0}, R = {big_r}"
        )));
    }
    let exponent = 1.0 - ms.dim() as f64;
    let w = ms.warping();
    let integrator = Integrator::with_rel_tol(1e-13);
    let mut density = |t: f64| Ok(w.eval(t)?.powf(exponent));
    let total = integrator.integrate(&mut density, rho, big_r)?.value;
    if r0 == rho {
        return Ok(1.0);
    }
    let upper = integrator.integrate(&mut density, r0, big_r)?.value;
    Ok(upper / total)
}
