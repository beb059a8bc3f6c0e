//! Sufficient criteria for p-parabolicity.
//!
//! Each criterion checks its hypotheses on a finite geometric grid and,
//! where needed, classifies the tail of the weight integral. A verdict is
//! either `PParabolic` (all hypotheses certified on the working interval
//! and the weight integral divergent) or `Inconclusive` with a reason;
//! the criteria are sufficient only, so nothing is ever declared
//! p-hyperbolic.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::constellation::{BalanceProfile, Constellation, Tangency, ZERO_BAND};
use crate::error::{Error, Result};
use crate::model::geometric_grid;
use crate::quadrature::{classify_tail, Integrator, TailClass, TailConfig, TailKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassifyConfig {
    pub tail: TailConfig,
    /// Points of the geometric grid on which hypotheses are checked.
    pub grid_size: usize,
    /// The grid starts at `min(rho, grid_floor)`.
    pub grid_floor: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            tail: TailConfig::default(),
            grid_size: 4096,
            grid_floor: 1e-3,
        }
    }
}

impl ClassifyConfig {
    /// Largest radius examined for a given base radius.
    pub fn horizon(&self, rho: f64) -> f64 {
        rho * 2f64.powi(self.tail.k_max as i32)
    }

    /// Sets `k_max` so that the horizon reaches at least `horizon`.
    pub fn with_horizon(mut self, rho: f64, horizon: f64) -> Result<Self> {
        if !(horizon > rho && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "horizon must exceed rho = {rho}, got {horizon}"
            )));
        }
        self.tail.k_max = ((horizon / rho).log2().ceil() as u32).max(4);
        Ok(self)
    }

    fn grid_start(&self, rho: f64) -> f64 {
        rho.min(self.grid_floor)
    }
}

/// Result that certified p-parabolicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Lower tangency, `M_p >= 0`, `int Lambda_{g,p} = inf`.
    LowerTangency,
    /// Upper tangency, `M_p <= 0`, `int Lambda_p = inf`.
    UpperTangency,
    /// Upper tangency, `M_p <= 0` and `w` bounded below by a positive constant.
    BoundedWarping,
    /// `M_q <= 0`, `h <= eta_w <= lambda` and `int Lambda_q = inf` for some `q <= p`.
    MonotoneInP,
}

impl Criterion {
    pub fn describe(self) -> &'static str {
        match self {
            Criterion::LowerTangency => "lower-tangency criterion",
            Criterion::UpperTangency => "upper-tangency criterion",
            Criterion::BoundedWarping => "bounded-warping criterion",
            Criterion::MonotoneInP => "monotone-in-p criterion",
        }
    }
}

/// Hypothesis that failed on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    BalanceNonNegative,
    BalanceNonPositive,
    WarpingBoundedBelow,
    /// `h <= eta_w <= lambda`.
    MeanCurvatureSandwich,
    /// `M_p <= M_q` and `int Lambda_p >= int Lambda_q` on every horizon.
    MonotoneComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Reason {
    BalanceFails { condition: Hypothesis, witnesses: Vec<f64> },
    TailConvergent { value: f64 },
    TailUndetermined,
    PBelow2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    PParabolic { by: Criterion },
    Inconclusive { reason: Reason },
}

impl Outcome {
    pub fn is_p_parabolic(&self) -> bool {
        matches!(self, Outcome::PParabolic { .. })
    }

    /// Short label used in tables: `p_parabolic` or `inconclusive`.
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::PParabolic { .. } => "p_parabolic",
            Outcome::Inconclusive { .. } => "inconclusive",
        }
    }

    /// Equality of outcome kinds, ignoring witnesses and tail values.
    pub fn same_kind(&self, other: &Outcome) -> bool {
        use std::mem::discriminant;
        match (self, other) {
            (Outcome::PParabolic { by: a }, Outcome::PParabolic { by: b }) => a == b,
            (Outcome::Inconclusive { reason: a }, Outcome::Inconclusive { reason: b }) => match (a, b) {
                (Reason::BalanceFails { condition: x, .. }, Reason::BalanceFails { condition: y, .. }) => x == y,
                _ => discriminant(a) == discriminant(b),
            },
            _ => false,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::PParabolic { by } => write!(f, "PParabolic ({})", by.describe()),
            Outcome::Inconclusive { reason } => match reason {
                Reason::BalanceFails { condition, .. } => {
                    let what = match condition {
                        Hypothesis::BalanceNonNegative => "balance not nonnegative",
                        Hypothesis::BalanceNonPositive => "balance not nonpositive",
                        Hypothesis::WarpingBoundedBelow => "warping not bounded below",
                        Hypothesis::MeanCurvatureSandwich => "h <= eta <= lambda fails",
                        Hypothesis::MonotoneComparison => "monotone comparison fails",
                    };
                    write!(f, "Inconclusive ({what})")
                }
                Reason::TailConvergent { .. } => write!(f, "Inconclusive (tail convergent)"),
                Reason::TailUndetermined => write!(f, "Inconclusive (tail undetermined)"),
                Reason::PBelow2 => write!(f, "Inconclusive (p below 2)"),
            },
        }
    }
}

/// Pointwise check of a lower bound on `w`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundCheck {
    pub r0: f64,
    pub lower_const: f64,
    pub min_value: f64,
    pub interval: (f64, f64),
}

/// Internal comparison behind the monotone criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneCheck {
    pub q: f64,
    /// `max (M_p - M_q)` on the grid, at most zero up to rounding.
    pub max_balance_gap: f64,
    /// `(R_k, int_rho^R_k Lambda_p, int_rho^R_k Lambda_q)`.
    pub integrals: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Evidence {
    pub p: f64,
    pub rho: f64,
    pub balance: Option<BalanceProfile>,
    pub tail: Option<TailClass>,
    /// Interval on which the hypotheses were checked.
    pub certified_interval: Option<(f64, f64)>,
    pub lower_bound: Option<LowerBoundCheck>,
    pub monotone: Option<MonotoneCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub evidence: Evidence,
}

impl Verdict {
    fn inconclusive(reason: Reason, evidence: Evidence) -> Self {
        Verdict {
            outcome: Outcome::Inconclusive { reason },
            evidence,
        }
    }
}

fn check_inputs(c: &Constellation, rho: f64, cfg: &ClassifyConfig) -> Result<()> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    let report = c.model().validate(cfg.horizon(rho));
    if !report.is_valid() {
        let list: Vec<String> = report.violations.iter().map(|v| format!("{v:?}")).collect();
        return Err(Error::InvalidWarping(list.join("; ")));
    }
    let grid = geometric_grid(cfg.grid_start(rho), cfg.horizon(rho), cfg.grid_size);
    c.validate_tangency(&grid)
}

fn require_upper(c: &Constellation, what: &str) -> Result<()> {
    if c.tangency() != Tangency::Upper {
        return Err(Error::InvalidArgument(format!("{what} needs an upper-tangency constellation")));
    }
    Ok(())
}

fn balance_fails(condition: Hypothesis, witnesses: Vec<f64>, evidence: Evidence) -> Verdict {
    Verdict::inconclusive(Reason::BalanceFails { condition, witnesses }, evidence)
}

fn tail_verdict(by: Criterion, tail: &TailClass, evidence: Evidence) -> Verdict {
    match tail.kind {
        TailKind::Divergent => Verdict {
            outcome: Outcome::PParabolic { by },
            evidence,
        },
        TailKind::Convergent { value, .. } => Verdict::inconclusive(Reason::TailConvergent { value }, evidence),
        TailKind::Undetermined => Verdict::inconclusive(Reason::TailUndetermined, evidence),
    }
}

fn weight_tail(c: &Constellation, p: f64, rho: f64, cfg: &ClassifyConfig) -> Result<TailClass> {
    let weight = c.weight(p, rho)?;
    classify_tail(|t| weight.value(t), rho, &cfg.tail)
}

/// Applies the lower- or upper-tangency criterion according to the
/// constellation's tangency kind.
pub fn classify(c: &Constellation, p: f64, rho: f64, cfg: &ClassifyConfig) -> Result<Verdict> {
    let mut evidence = Evidence {
        p,
        rho,
        ..Evidence::default()
    };
    if !(p >= 2.0) {
        return Ok(Verdict::inconclusive(Reason::PBelow2, evidence));
    }
    check_inputs(c, rho, cfg)?;
    let lo = cfg.grid_start(rho);
    let profile = c.balance_sign(p, lo, cfg.horizon(rho), cfg.grid_size)?;
    let (by, nonneg, hypothesis) = match c.tangency() {
        Tangency::Lower => (Criterion::LowerTangency, true, Hypothesis::BalanceNonNegative),
        Tangency::Upper => (Criterion::UpperTangency, false, Hypothesis::BalanceNonPositive),
    };
    let holds = if nonneg { profile.is_nonnegative() } else { profile.is_nonpositive() };
    if !holds {
        let witnesses = Constellation::witnesses(&profile, nonneg);
        evidence.balance = Some(profile);
        return Ok(balance_fails(hypothesis, witnesses, evidence));
    }
    let tail = weight_tail(c, p, rho, cfg)?;
    evidence.certified_interval = Some((lo, profile.interval().1.min(tail.horizon())));
    evidence.balance = Some(profile);
    let verdict = tail_verdict(by, &tail, Evidence {
        tail: Some(tail.clone()),
        ..evidence
    });
    Ok(verdict)
}

/// Bounded-warping criterion: with upper tangency, `M_p <= 0` and
/// `w >= lower_const > 0` on `[r0, inf)` give `Lambda_p >= w`, so the
/// weight integral diverges without any tail quadrature.
pub fn classify_bounded_w(
    c: &Constellation,
    p: f64,
    rho: f64,
    r0: f64,
    lower_const: f64,
    cfg: &ClassifyConfig,
) -> Result<Verdict> {
    require_upper(c, "the bounded-warping criterion")?;
    if !(lower_const > 0.0 && lower_const.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lower bound on w must be positive, got {lower_const}"
        )));
    }
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::InvalidArgument(format!("r0 must be positive, got {r0}")));
    }
    let mut evidence = Evidence {
        p,
        rho,
        ..Evidence::default()
    };
    if !(p >= 2.0) {
        return Ok(Verdict::inconclusive(Reason::PBelow2, evidence));
    }
    check_inputs(c, rho, cfg)?;
    let lo = cfg.grid_start(rho);
    let horizon = cfg.horizon(rho).max(2.0 * r0);
    let profile = c.balance_sign(p, lo, horizon, cfg.grid_size)?;
    if !profile.is_nonpositive() {
        let witnesses = Constellation::witnesses(&profile, false);
        evidence.balance = Some(profile);
        return Ok(balance_fails(Hypothesis::BalanceNonPositive, witnesses, evidence));
    }

    let w = c.model().warping();
    let mut min_value = f64::INFINITY;
    let mut reached = r0;
    let mut witnesses = Vec::new();
    for r in geometric_grid(r0, horizon, cfg.grid_size) {
        let v = match w.eval(r) {
            Ok(v) => v,
            // w overflowed: it is certainly above the bound from here on
            Err(e) if e.is_non_finite() => break,
            Err(e) => return Err(e),
        };
        reached = r;
        min_value = min_value.min(v);
        if v < lower_const && witnesses.len() < 5 {
            witnesses.push(r);
        }
    }
    evidence.lower_bound = Some(LowerBoundCheck {
        r0,
        lower_const,
        min_value,
        interval: (r0, reached),
    });
    evidence.certified_interval = Some((lo, profile.interval().1));
    evidence.balance = Some(profile);
    if !witnesses.is_empty() {
        return Ok(balance_fails(Hypothesis::WarpingBoundedBelow, witnesses, evidence));
    }
    Ok(Verdict {
        outcome: Outcome::PParabolic {
            by: Criterion::BoundedWarping,
        },
        evidence,
    })
}

/// Monotone criterion: with upper tangency, `h <= eta_w <= lambda`,
/// `M_q <= 0` and `int Lambda_q = inf` give p-parabolicity for every
/// `p >= q`.
pub fn classify_monotone(c: &Constellation, q: f64, p: f64, rho: f64, cfg: &ClassifyConfig) -> Result<Verdict> {
    require_upper(c, "the monotone criterion")?;
    if !(p >= q) {
        return Err(Error::InvalidArgument(format!("need q <= p, got q = {q}, p = {p}")));
    }
    let mut evidence = Evidence {
        p,
        rho,
        ..Evidence::default()
    };
    if !(q >= 2.0) {
        return Ok(Verdict::inconclusive(Reason::PBelow2, evidence));
    }
    check_inputs(c, rho, cfg)?;
    let lo = cfg.grid_start(rho);
    let horizon = cfg.horizon(rho);

    let mut sandwich_witnesses = Vec::new();
    let mut gap: f64 = f64::NEG_INFINITY;
    let mut reached = lo;
    for r in geometric_grid(lo, horizon, cfg.grid_size) {
        let sample = (|| -> Result<_> {
            let eta = c.model().eta(r)?;
            let h = c.h().eval(r)?;
            let lambda = c.lambda().eval(r)?;
            Ok((eta, h, lambda, c.balance(p, r)? - c.balance(q, r)?))
        })();
        let (eta, h, lambda, diff) = match sample {
            Ok(s) => s,
            Err(e) if e.is_non_finite() && r > lo => break,
            Err(e) => return Err(e),
        };
        reached = r;
        let band = ZERO_BAND * 1f64.max(eta.abs()).max(h.abs()).max(lambda.abs());
        if (h > eta + band || eta > lambda + band) && sandwich_witnesses.len() < 5 {
            sandwich_witnesses.push(r);
        }
        gap = gap.max(diff / 1f64.max(diff.abs()).max((p - q) * (eta.abs() + lambda.abs())));
    }
    if !sandwich_witnesses.is_empty() {
        evidence.certified_interval = Some((lo, reached));
        return Ok(balance_fails(Hypothesis::MeanCurvatureSandwich, sandwich_witnesses, evidence));
    }

    let profile = c.balance_sign(q, lo, horizon, cfg.grid_size)?;
    if !profile.is_nonpositive() {
        let witnesses = Constellation::witnesses(&profile, false);
        evidence.balance = Some(profile);
        return Ok(balance_fails(Hypothesis::BalanceNonPositive, witnesses, evidence));
    }
    let tail = weight_tail(c, q, rho, cfg)?;
    evidence.certified_interval = Some((lo, profile.interval().1.min(tail.horizon()).min(reached)));
    evidence.balance = Some(profile);

    let integrals = if tail.is_divergent() {
        compare_integrals(c, p, rho, &tail)?
    } else {
        Vec::new()
    };
    let ordered = gap <= ZERO_BAND && integrals.iter().all(|&(_, ip, iq)| ip >= iq * (1.0 - 1e-9));
    evidence.monotone = Some(MonotoneCheck {
        q,
        max_balance_gap: gap,
        integrals,
    });
    evidence.tail = Some(tail.clone());
    if !ordered {
        return Ok(balance_fails(Hypothesis::MonotoneComparison, Vec::new(), evidence));
    }
    Ok(tail_verdict(Criterion::MonotoneInP, &tail, evidence))
}

/// `(R_k, int Lambda_p, int Lambda_q)` over the horizons of `tail`, which
/// holds the partial integrals of `Lambda_q`.
fn compare_integrals(c: &Constellation, p: f64, rho: f64, tail: &TailClass) -> Result<Vec<(f64, f64, f64)>> {
    let weight = c.weight(p, rho)?;
    let integrator = Integrator::with_rel_tol(1e-10);
    let mut out = Vec::new();
    let mut lo = rho;
    let mut total = 0.0;
    for &(hi, iq) in &tail.evidence.partial_integrals {
        match integrator.integrate(|t| weight.value(t), lo, hi) {
            Ok(part) => total += part.value,
            // Lambda_p left f64 range; it dominates Lambda_q from here on
            Err(e) if e.is_numeric() => break,
            Err(e) => return Err(e),
        }
        out.push((hi, total, iq));
        lo = hi;
    }
    Ok(out)
}

/// One row of a sweep over `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub p: f64,
    pub verdict: std::result::Result<Verdict, Error>,
    /// Fitted decay exponent of the weight.
    pub alpha_hat: Option<f64>,
    /// Drifted capacity of the annulus out to the largest horizon reached.
    pub cap_at_horizon: Option<f64>,
}

impl SweepRow {
    pub fn outcome_label(&self) -> String {
        match &self.verdict {
            Ok(v) => v.outcome.to_string(),
            Err(e) => format!("error: {e}"),
        }
    }
}

/// `p_from, p_from + p_step, ...` up to `p_to` inclusive.
pub fn p_grid(p_from: f64, p_to: f64, p_step: f64) -> Result<Vec<f64>> {
    if !(p_from.is_finite() && p_to.is_finite() && p_step > 0.0 && p_step.is_finite()) || p_from > p_to {
        return Err(Error::InvalidArgument(format!(
            "empty p range: from {p_from} to {p_to} step {p_step}"
        )));
    }
    let n = ((p_to - p_from) / p_step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| p_from + i as f64 * p_step).collect())
}

/// Classifies every `p` of the range in parallel; rows keep input order
/// and a failing row does not stop the others.
pub fn sweep(c: &Constellation, p_from: f64, p_to: f64, p_step: f64, rho: f64, cfg: &ClassifyConfig) -> Result<Vec<SweepRow>> {
    let ps = p_grid(p_from, p_to, p_step)?;
    Ok(ps.into_par_iter().map(|p| sweep_row(c, p, rho, cfg)).collect())
}

fn sweep_row(c: &Constellation, p: f64, rho: f64, cfg: &ClassifyConfig) -> SweepRow {
    let verdict = classify(c, p, rho, cfg);
    let tail = match &verdict {
        Ok(v) => match &v.evidence.tail {
            Some(t) => Some(t.clone()),
            None if p >= 2.0 => weight_tail(c, p, rho, cfg).ok(),
            None => None,
        },
        Err(_) => None,
    };
    let cap_at_horizon = tail.as_ref().and_then(|t| {
        let vol = c.model().sphere_volume(rho).ok()?;
        let w = c.model().warping().eval(rho).ok()?;
        let cap = vol * w / t.last_partial();
        cap.is_finite().then_some(cap)
    });
    SweepRow {
        p,
        alpha_hat: tail.as_ref().and_then(|t| t.evidence.alpha_hat),
        cap_at_horizon,
        verdict,
    }
}
