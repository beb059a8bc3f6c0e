//! Adaptive Gauss–Kronrod integration and a divergence classifier for
//! improper integrals of nonnegative functions over `[rho, inf)`.
//!
//! The classifier never proves anything: it integrates over doubling
//! horizons `rho * 2^k` and combines a Cauchy increment test, an
//! increment-growth test and a log-log fit of the integrand's decay
//! exponent. Tails whose exponent sits within `delta` of `-1` without
//! any other evidence are reported as [`TailKind::Undetermined`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};

#[rustfmt::skip]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[rustfmt::skip]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[rustfmt::skip]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Result of a definite integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One 21-point Kronrod rule with its embedded 10-point Gauss estimate,
/// error estimated as in QUADPACK's QK21.
fn gk21<F>(f: &mut F, a: f64, b: f64) -> Result<Segment>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut resg = 0.0;
    let mut resk = WGK[10] * fc;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
    }
    let mean = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = resk * half;
    resabs *= half.abs();
    resasc *= half.abs();
    let mut error = ((resk - resg) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * resabs;
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(floor);
    }
    if !value.is_finite() {
        return Err(Error::Overflow(format!(
            "integral over [{a}, {b}] is not finite"
        )));
    }
    Ok(Segment { a, b, value, error })
}

/// Adaptive bisection driver.
#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_intervals: 2000,
        }
    }
}

impl Integrator {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Integrator {
            rel_tol,
            ..Integrator::default()
        }
    }

    /// Integrates `f` over `[a, b]`. Intervals with `a > b` are oriented;
    /// `a == b` gives zero.
    pub fn integrate<F>(&self, mut f: F, a: f64, b: f64) -> Result<Quadrature>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "integration limits must be finite, got [{a}, {b}]"
            )));
        }
        if a == b {
            return Ok(Quadrature {
                value: 0.0,
                error: 0.0,
                evaluations: 0,
            });
        }
        if a > b {
            let q = self.integrate(f, b, a)?;
            return Ok(Quadrature {
                value: -q.value,
                ..q
            });
        }

        let first = gk21(&mut f, a, b)?;
        let mut evaluations = 21;
        let mut total = first.value;
        let mut total_err = first.error;
        let mut heap = BinaryHeap::new();
        heap.push(first);
        // Segments too narrow to split, kept aside with their error.
        let mut frozen_err = 0.0;
        let mut frozen_value = 0.0;

        loop {
            let tol = (self.rel_tol * total.abs()).max(self.abs_tol);
            if total_err <= tol {
                break;
            }
            if heap.len() >= self.max_intervals || heap.is_empty() {
                let worst = heap.peek().copied().unwrap_or(first);
                // Error sits in unsplittable segments at round-off level.
                if heap.is_empty() && frozen_err <= 1e3 * f64::EPSILON * total.abs().max(f64::MIN_POSITIVE) {
                    break;
                }
                return Err(Error::Quadrature {
                    intervals: heap.len(),
                    a: worst.a,
                    b: worst.b,
                });
            }
            let worst = heap.pop().expect("heap is non-empty");
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b || (worst.b - worst.a) <= 4.0 * f64::EPSILON * mid.abs() {
                frozen_err += worst.error;
                frozen_value += worst.value;
                continue;
            }
            let left = gk21(&mut f, worst.a, mid)?;
            let right = gk21(&mut f, mid, worst.b)?;
            evaluations += 42;
            total += left.value + right.value - worst.value;
            total_err += left.error + right.error - worst.error;
            heap.push(left);
            heap.push(right);
        }
        // Re-sum to shed accumulated cancellation in the running total.
        let value: f64 = heap.iter().map(|s| s.value).sum::<f64>() + frozen_value;
        let error: f64 = heap.iter().map(|s| s.error).sum::<f64>() + frozen_err;
        Ok(Quadrature {
            value,
            error,
            evaluations,
        })
    }
}

/// Integrates `f` over `[a, b]` to relative tolerance `rel_tol`.
pub fn integrate<F>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<Quadrature>
where
    F: FnMut(f64) -> Result<f64>,
{
    Integrator::with_rel_tol(rel_tol).integrate(f, a, b)
}

/// Settings for [`classify_tail`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailConfig {
    /// Number of doublings of the horizon, `rho * 2^k_max` at most.
    pub k_max: u32,
    /// Threshold on relative increments for the Cauchy test.
    pub conv_eps: f64,
    /// Half-width of the undecidable band around exponent `-1`.
    pub exp_band: f64,
    /// Relative tolerance of each horizon's quadrature.
    pub rel_tol: f64,
}

impl Default for TailConfig {
    fn default() -> Self {
        TailConfig {
            k_max: 40,
            conv_eps: 1e-8,
            exp_band: 0.05,
            rel_tol: 1e-10,
        }
    }
}

/// Growth factor over `I_1` beyond which the integral is declared unbounded.
pub const GROWTH_LIMIT: f64 = 1e12;
/// Consecutive increments whose ratio is at least `1 - FLAT_TOL` are
/// taken as non-decreasing.
const FLAT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailKind {
    Divergent,
    Convergent { value: f64, error: f64 },
    Undetermined,
}

/// Which test settled the classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailRule {
    CauchyIncrements,
    UnboundedGrowth,
    NonDecreasingIncrements,
    ExponentAbove,
    ExponentBelow,
    Borderline,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEvidence {
    /// `(R_k, I(R_k))` with `R_k = rho * 2^k`.
    pub partial_integrals: Vec<(f64, f64)>,
    /// Fitted decay exponent of the integrand over the last two decades.
    pub alpha_hat: Option<f64>,
    /// Root-mean-square residual of the log-log fit.
    pub fit_residual: Option<f64>,
    pub rule: TailRule,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailClass {
    pub kind: TailKind,
    pub evidence: TailEvidence,
}

impl TailClass {
    pub fn is_divergent(&self) -> bool {
        self.kind == TailKind::Divergent
    }

    /// Largest horizon reached.
    pub fn horizon(&self) -> f64 {
        self.evidence
            .partial_integrals
            .last()
            .map(|&(r, _)| r)
            .unwrap_or(f64::NAN)
    }

    /// Partial integral at the largest horizon reached.
    pub fn last_partial(&self) -> f64 {
        self.evidence
            .partial_integrals
            .last()
            .map(|&(_, v)| v)
            .unwrap_or(f64::NAN)
    }
}

/// Least-squares slope of `log f` against `log t` on 41 log-spaced points
/// of `[hi / 100, hi]`, skipping points where `f` is zero or fails.
pub fn fit_tail_exponent<F>(f: &mut F, lo: f64, hi: f64) -> Option<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let start = (hi / 100.0).max(lo);
    if start >= hi {
        return None;
    }
    let n = 41;
    let (l0, l1) = (start.ln(), hi.ln());
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let x = l0 + (l1 - l0) * i as f64 / (n - 1) as f64;
        if let Ok(v) = f(x.exp()) {
            if v > 0.0 && v.is_finite() {
                xs.push(x);
                ys.push(v.ln());
            }
        }
    }
    if xs.len() < 3 {
        return None;
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (my + slope * (x - mx));
            e * e
        })
        .sum();
    Some((slope, (rss / m).sqrt()))
}

/// Classifies `int_rho^inf f` as divergent, convergent or undetermined.
///
/// `f` must be nonnegative on `[rho, rho * 2^k_max]`.
pub fn classify_tail<F>(mut f: F, rho: f64, cfg: &TailConfig) -> Result<TailClass>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    if cfg.k_max < 4 {
        return Err(Error::InvalidArgument("k_max must be at least 4".into()));
    }
    let integrator = Integrator::with_rel_tol(cfg.rel_tol);
    let mut partials: Vec<(f64, f64)> = Vec::with_capacity(cfg.k_max as usize);
    let mut increments: Vec<f64> = Vec::with_capacity(cfg.k_max as usize);
    let mut total = 0.0;
    let mut lo = rho;
    let mut settled: Option<(TailKind, TailRule)> = None;

    for _ in 1..=cfg.k_max {
        let hi = 2.0 * lo;
        let q = match integrator.integrate(&mut f, lo, hi) {
            Ok(q) => q,
            // The integrand left f64 range. With growing increments it is
            // certainly unbounded; otherwise the horizons reached so far
            // decide.
            Err(e @ (Error::Overflow(_) | Error::Domain { .. })) if partials.len() >= 2 => {
                let n = increments.len();
                if increments[n - 1] > 0.0 && increments[n - 1] >= increments[n - 2] {
                    settled = Some((TailKind::Divergent, TailRule::UnboundedGrowth));
                } else if partials.len() < 4 {
                    return Err(e);
                }
                break;
            }
            Err(e) => return Err(e),
        };
        let inc = q.value.max(0.0);
        total += inc;
        increments.push(inc);
        partials.push((hi, total));
        lo = hi;

        let first = partials[0].1;
        if first > 0.0 && total > GROWTH_LIMIT * first {
            settled = Some((TailKind::Divergent, TailRule::UnboundedGrowth));
            break;
        }
        let n = partials.len();
        if n >= 4 {
            let cauchy = (n - 3..n).all(|k| {
                let prev = partials[k - 1].1;
                prev > 0.0 && (partials[k].1 - prev) / prev < cfg.conv_eps
            });
            if cauchy {
                settled = Some((
                    TailKind::Convergent {
                        value: total,
                        error: increments[n - 1],
                    },
                    TailRule::CauchyIncrements,
                ));
                break;
            }
        }
    }

    let horizon = partials.last().map(|p| p.0).unwrap_or(2.0 * rho);
    let fit = fit_tail_exponent(&mut f, rho, horizon);
    let (alpha_hat, fit_residual) = match fit {
        Some((a, res)) => (Some(a), Some(res)),
        None => (None, None),
    };

    let (kind, rule) = match settled {
        Some(s) => s,
        None => decide(&increments, total, alpha_hat, cfg),
    };
    Ok(TailClass {
        kind,
        evidence: TailEvidence {
            partial_integrals: partials,
            alpha_hat,
            fit_residual,
            rule,
        },
    })
}

fn decide(increments: &[f64], total: f64, alpha_hat: Option<f64>, cfg: &TailConfig) -> (TailKind, TailRule) {
    let n = increments.len();
    let ratios: Vec<f64> = (n - 3..n)
        .map(|k| {
            if increments[k - 1] > 0.0 {
                increments[k] / increments[k - 1]
            } else {
                f64::INFINITY
            }
        })
        .collect();

    if ratios.iter().all(|&q| q >= 1.0 - FLAT_TOL) {
        return (TailKind::Divergent, TailRule::NonDecreasingIncrements);
    }
    let delta = cfg.exp_band;
    match alpha_hat {
        Some(a) if a >= -1.0 + delta => (TailKind::Divergent, TailRule::ExponentAbove),
        Some(a) if a <= -1.0 - delta => {
            // Geometric decay of increments, consistent with the exponent.
            let q_max = 2f64.powf(-0.5 * delta);
            if ratios.iter().all(|&q| q > 0.0 && q <= q_max) {
                let q = ratios[2];
                let tail = increments[n - 1] * q / (1.0 - q);
                (
                    TailKind::Convergent {
                        value: total + tail,
                        error: tail.abs() * 1e-3 + increments[n - 1] * cfg.rel_tol,
                    },
                    TailRule::ExponentBelow,
                )
            } else {
                (TailKind::Undetermined, TailRule::Borderline)
            }
        }
        _ => (TailKind::Undetermined, TailRule::Borderline),
    }
}
