use std::fmt::Write as _;
use std::io;
use std::path::Path;
use std::time::Instant;

use radialcap::config::ConstellationConfig;
use radialcap::criteria::{classify, classify_bounded_w, classify_monotone, sweep, SweepRow};
use radialcap::diffusion::{exact_hitting_prob, simulate_radial, DiffusionConfig};
use radialcap::dirichlet::{
    capacity_upper_bound, drifted_capacity, operator_residual, solve_dirichlet_closed, solve_dirichlet_ode,
};
use radialcap::quadrature::{TailConfig, TailKind};
use radialcap::{ClassifyConfig, Constellation, Error, Result, Verdict};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{
    CapacityArgs, ClassifyArgs, Cli, Command, CriterionArg, SimulateArgs, SolveArgs, SweepArgs, Tolerances,
};
use crate::report::{balance_summary, emit, error_value, to_value, Report, Status};

/// What a command produced before it is rendered.
struct Done {
    status: Status,
    outcome: Value,
    evidence: Value,
    /// Human-readable form, printed without `--json`.
    text: String,
}

pub fn run(cli: Cli) -> Status {
    match cli.command {
        Command::Classify(a) => {
            let inputs = json!({
                "config": a.config,
                "p": a.p,
                "rho": a.rho,
                "criterion": format!("{:?}", a.criterion).to_lowercase(),
                "r0": a.r0,
                "w_lower": a.w_lower,
                "q": a.q,
            });
            finish("classify", a.json, inputs, &a.config, |c, inputs| cmd_classify(c, &a, inputs))
        }
        Command::Sweep(a) => {
            let inputs = json!({
                "config": a.config,
                "p_from": a.p_from,
                "p_to": a.p_to,
                "p_step": a.p_step,
                "rho": a.rho,
                "out": a.out,
            });
            finish("sweep", a.json, inputs, &a.config, |c, inputs| cmd_sweep(c, &a, inputs))
        }
        Command::Capacity(a) => {
            let inputs = json!({
                "config": a.config,
                "p": a.p,
                "rho": a.rho,
                "R": a.big_r,
                "flux": a.flux,
            });
            finish("capacity", a.json, inputs, &a.config, |c, _| cmd_capacity(c, &a))
        }
        Command::Solve(a) => {
            let inputs = json!({
                "config": a.config,
                "p": a.p,
                "rho": a.rho,
                "R": a.big_r,
                "samples": a.samples,
                "steps": a.steps,
                "out": a.out,
            });
            finish("solve", a.json, inputs, &a.config, |c, inputs| cmd_solve(c, &a, inputs))
        }
        Command::Simulate(a) => {
            let inputs = json!({
                "config": a.config,
                "r0": a.r0,
            });
            finish("simulate", a.json, inputs, &a.config, |c, inputs| cmd_simulate(c, &a, inputs))
        }
    }
}

/// Loads the constellation, runs `body` and renders the result; errors go
/// to standard error and, with `--json`, into the document as well.
fn finish<F>(command: &'static str, as_json: bool, mut inputs: Value, config: &Path, body: F) -> Status
where
    F: FnOnce(&Constellation, &mut Value) -> Result<Done>,
{
    let started = Instant::now();
    let result = ConstellationConfig::load(config).and_then(|cfg| {
        inputs["constellation"] = to_value(&cfg);
        let c = cfg.build()?;
        body(&c, &mut inputs)
    });
    let mut report = Report::new(command, inputs, started);
    match result {
        Ok(done) => {
            if as_json {
                report.outcome = done.outcome;
                report.evidence = done.evidence;
                report.print();
            } else {
                emit(&done.text);
            }
            done.status
        }
        Err(e) => {
            eprintln!("error: {e}");
            if as_json {
                report.outcome = error_value(&e);
                report.print();
            }
            Status::of_error(&e)
        }
    }
}

fn classify_config(tol: &Tolerances, rho: f64) -> Result<ClassifyConfig> {
    let cfg = ClassifyConfig {
        tail: TailConfig {
            k_max: tol.k_max,
            conv_eps: tol.conv_eps,
            exp_band: tol.exp_band,
            rel_tol: tol.rel_tol,
        },
        grid_size: tol.grid_size,
        grid_floor: tol.grid_floor,
    };
    if !(tol.grid_size >= 2 && tol.grid_floor > 0.0 && tol.conv_eps > 0.0 && tol.rel_tol > 0.0 && tol.exp_band >= 0.0) {
        return Err(Error::InvalidArgument(
            "grid_size must be at least 2 and grid_floor, conv_eps, rel_tol positive".into(),
        ));
    }
    match tol.horizon {
        Some(h) => cfg.with_horizon(rho, h),
        None => Ok(cfg),
    }
}

fn echo_tolerances(inputs: &mut Value, cfg: &ClassifyConfig, rho: f64) {
    inputs["tolerances"] = to_value(cfg);
    inputs["horizon"] = json!(cfg.horizon(rho));
}

fn tail_text(kind: &TailKind) -> String {
    match kind {
        TailKind::Divergent => "divergent".into(),
        TailKind::Convergent { value, error } => format!("convergent to {value:.6e} (+- {error:.1e})"),
        TailKind::Undetermined => "undetermined".into(),
    }
}

fn verdict_text(v: &Verdict) -> String {
    let mut s = format!("{}\n", v.outcome);
    let e = &v.evidence;
    let _ = writeln!(s, "  p = {}, rho = {}", e.p, e.rho);
    if let Some(b) = &e.balance {
        let (lo, hi) = b.interval();
        let _ = writeln!(
            s,
            "  balance: {:?} on [{lo:.3e}, {hi:.3e}], min {:.6e}, max {:.6e}",
            b.sign_summary,
            b.min_value(),
            b.max_value()
        );
    }
    if let Some(t) = &e.tail {
        let _ = writeln!(s, "  tail: {} by {:?}, horizon {:.3e}", tail_text(&t.kind), t.evidence.rule, t.horizon());
        if let Some(a) = t.evidence.alpha_hat {
            let _ = writeln!(s, "  alpha_hat: {a:.4}");
        }
    }
    if let Some((a, b)) = e.certified_interval {
        let _ = writeln!(s, "  certified interval: [{a:.3e}, {b:.3e}]");
    }
    if let Some(l) = &e.lower_bound {
        let _ = writeln!(s, "  min w on [{:.3e}, {:.3e}]: {:.6e} (claimed >= {})", l.interval.0, l.interval.1, l.min_value, l.lower_const);
    }
    if let Some(m) = &e.monotone {
        let _ = writeln!(s, "  q = {}, max(M_p - M_q) = {:.3e}", m.q, m.max_balance_gap);
    }
    s
}

fn evidence_value(v: &Verdict) -> Value {
    let mut ev = to_value(&v.evidence);
    if let Some(b) = &v.evidence.balance {
        ev["balance"] = balance_summary(b);
    }
    ev
}

fn cmd_classify(c: &Constellation, a: &ClassifyArgs, inputs: &mut Value) -> Result<Done> {
    let cfg = classify_config(&a.tol, a.rho)?;
    echo_tolerances(inputs, &cfg, a.rho);
    let verdict = match a.criterion {
        CriterionArg::Tangency => classify(c, a.p, a.rho, &cfg)?,
        CriterionArg::BoundedW => {
            let lower = a
                .w_lower
                .ok_or_else(|| Error::InvalidArgument("--criterion bounded-w needs --w-lower".into()))?;
            classify_bounded_w(c, a.p, a.rho, a.r0, lower, &cfg)?
        }
        CriterionArg::Monotone => {
            let q = a
                .q
                .ok_or_else(|| Error::InvalidArgument("--criterion monotone needs --q".into()))?;
            classify_monotone(c, q, a.p, a.rho, &cfg)?
        }
    };
    Ok(Done {
        status: if verdict.outcome.is_p_parabolic() {
            Status::Success
        } else {
            Status::Inconclusive
        },
        outcome: to_value(&verdict.outcome),
        evidence: evidence_value(&verdict),
        text: verdict_text(&verdict),
    })
}

#[derive(Serialize)]
struct SweepCsvRow {
    p: f64,
    outcome: String,
    alpha_hat: Option<f64>,
    cap_at_horizon: Option<f64>,
}

fn write_csv<T: Serialize>(rows: &[T], out: Option<&Path>) -> Result<()> {
    let io_err = |e: csv::Error| Error::InvalidArgument(format!("cannot write CSV: {e}"));
    match out {
        Some(path) => {
            let mut w = csv::Writer::from_path(path).map_err(io_err)?;
            for row in rows {
                w.serialize(row).map_err(io_err)?;
            }
            w.flush().map_err(|e| io_err(e.into()))
        }
        None => {
            let mut w = csv::Writer::from_writer(io::stdout().lock());
            for row in rows {
                w.serialize(row).map_err(io_err)?;
            }
            w.flush().map_err(|e| io_err(e.into()))
        }
    }
}

/// Smallest `p` from which every later row is p-parabolic.
fn parabolic_from(rows: &[SweepRow]) -> Option<f64> {
    let tail = rows
        .iter()
        .rev()
        .take_while(|r| matches!(&r.verdict, Ok(v) if v.outcome.is_p_parabolic()))
        .count();
    (tail > 0).then(|| rows[rows.len() - tail].p)
}

fn cmd_sweep(c: &Constellation, a: &SweepArgs, inputs: &mut Value) -> Result<Done> {
    let cfg = classify_config(&a.tol, a.rho)?;
    echo_tolerances(inputs, &cfg, a.rho);
    let rows = sweep(c, a.p_from, a.p_to, a.p_step, a.rho, &cfg)?;
    let csv_rows: Vec<SweepCsvRow> = rows
        .iter()
        .map(|r| SweepCsvRow {
            p: r.p,
            outcome: r.outcome_label(),
            alpha_hat: r.alpha_hat,
            cap_at_horizon: r.cap_at_horizon,
        })
        .collect();
    // in JSON mode without --out the rows travel inside the document
    if a.out.is_some() || !a.json {
        write_csv(&csv_rows, a.out.as_deref())?;
    }
    let status = rows
        .iter()
        .find_map(|r| r.verdict.as_ref().err().map(Status::of_error))
        .unwrap_or(Status::Success);
    let json_rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "p": r.p,
                "outcome": match &r.verdict {
                    Ok(v) => to_value(&v.outcome),
                    Err(e) => error_value(e),
                },
                "alpha_hat": r.alpha_hat,
                "cap_at_horizon": r.cap_at_horizon,
            })
        })
        .collect();
    let from = parabolic_from(&rows);
    let mut text = String::new();
    if let Some(path) = &a.out {
        let _ = writeln!(text, "{} rows written to {}", rows.len(), path.display());
        match from {
            Some(p) => {
                let _ = writeln!(text, "p-parabolic from p = {p}");
            }
            None => {
                let _ = writeln!(text, "no p-parabolic tail of the range");
            }
        }
    }
    Ok(Done {
        status,
        outcome: json!({ "rows": json_rows }),
        evidence: json!({ "parabolic_from": from }),
        text,
    })
}

fn cmd_capacity(c: &Constellation, a: &CapacityArgs) -> Result<Done> {
    // flux is checked first so a bad flag fails fast
    if !(a.flux > 0.0 && a.flux.is_finite()) {
        return Err(Error::InvalidArgument(format!("boundary flux must be positive, got {}", a.flux)));
    }
    let sol = solve_dirichlet_closed(c, a.p, a.rho, a.big_r)?;
    let drifted = drifted_capacity(c, a.p, a.rho, a.big_r)?;
    let exact = if c.is_self_constellation() {
        Some(c.model().exact_annulus_p_capacity(a.rho, a.big_r, a.p)?)
    } else {
        None
    };
    let bound = capacity_upper_bound(c, a.p, a.rho, a.big_r, a.flux)?;
    let volume = c.model().sphere_volume(a.rho)?;
    let weight_at_rho = sol.weight().value(a.rho)?;
    let mut text = format!("drifted capacity: {drifted:.12e}\n");
    if let Some(x) = exact {
        let _ = writeln!(text, "exact model capacity: {x:.12e}");
    }
    let _ = writeln!(text, "capacity upper bound (flux {}): {bound:.12e}", a.flux);
    Ok(Done {
        status: Status::Success,
        outcome: json!({
            "drifted_capacity": drifted,
            "exact_model_capacity": exact,
            "upper_bound": bound,
        }),
        evidence: json!({
            "sphere_volume_at_rho": volume,
            "weight_at_rho": weight_at_rho,
            "weight_integral": sol.normalizer(),
            "self_constellation": c.is_self_constellation(),
            "relative_gap_to_exact": exact.map(|x| (drifted - x).abs() / x.abs()),
        }),
        text,
    })
}

#[derive(Serialize)]
struct SolveCsvRow {
    r: f64,
    psi_closed: f64,
    psi_ode: f64,
    /// Empty at the endpoints, where the central stencil does not fit.
    residual: Option<f64>,
}

fn cmd_solve(c: &Constellation, a: &SolveArgs, inputs: &mut Value) -> Result<Done> {
    if a.samples < 2 {
        return Err(Error::InvalidArgument(format!("--samples must be at least 2, got {}", a.samples)));
    }
    let intervals = a.samples - 1;
    let per = a.steps.max(100).div_ceil(intervals);
    inputs["ode_steps"] = json!(per * intervals);
    let sol = solve_dirichlet_closed(c, a.p, a.rho, a.big_r)?;
    let nodes: Vec<f64> = (0..a.samples)
        .map(|i| {
            if i == intervals {
                a.big_r
            } else {
                a.rho + (a.big_r - a.rho) * i as f64 / intervals as f64
            }
        })
        .collect();
    let closed = sol.sample(&nodes)?;
    let ode = solve_dirichlet_ode(c, a.p, a.rho, a.big_r, per * intervals)?;
    let mut rows = Vec::with_capacity(nodes.len());
    for (i, (&r, &psi_closed)) in nodes.iter().zip(&closed).enumerate() {
        let residual = if i == 0 || i == intervals {
            None
        } else {
            Some(operator_residual(c, a.p, &sol, &[r])?)
        };
        rows.push(SolveCsvRow {
            r,
            psi_closed,
            psi_ode: ode.psi[i * per],
            residual,
        });
    }
    if a.out.is_some() || !a.json {
        write_csv(&rows, a.out.as_deref())?;
    }
    let max_gap = rows.iter().map(|x| (x.psi_closed - x.psi_ode).abs()).fold(0.0, f64::max);
    let max_residual = rows.iter().filter_map(|x| x.residual).fold(0.0, f64::max);
    let mut text = String::new();
    if let Some(path) = &a.out {
        let _ = writeln!(text, "{} rows written to {}", rows.len(), path.display());
        let _ = writeln!(text, "max |psi_closed - psi_ode| = {max_gap:.3e}, max residual = {max_residual:.3e}");
    }
    let table: Vec<Value> = rows.iter().map(to_value).collect();
    Ok(Done {
        status: Status::Success,
        outcome: json!({ "rows": table }),
        evidence: json!({
            "max_closed_ode_gap": max_gap,
            "max_residual": max_residual,
            "weight_integral": sol.normalizer(),
        }),
        text,
    })
}

fn cmd_simulate(c: &Constellation, a: &SimulateArgs, inputs: &mut Value) -> Result<Done> {
    let cfg = DiffusionConfig {
        dt: a.dt,
        paths: a.paths,
        seed: a.seed,
        r_inner: a.rin,
        r_outer: a.rout,
        max_time: a.max_time,
        bridge: !a.no_bridge,
    };
    inputs["diffusion"] = to_value(&cfg);
    let ms = c.model();
    let stats = simulate_radial(ms, a.r0, &cfg)?;
    let exact = if c.is_self_constellation() {
        Some(exact_hitting_prob(ms, a.r0, a.rin, a.rout)?)
    } else {
        None
    };
    let z = exact.map(|x| (stats.p_inner - x) / stats.stderr);
    let mut text = format!(
        "p_inner = {:.6} +- {:.6} ({} inner, {} outer, {} censored of {})\nmean exit time = {:.4}\n",
        stats.p_inner, stats.stderr, stats.hits_inner, stats.hits_outer, stats.censored, stats.paths, stats.mean_exit_time
    );
    if let (Some(x), Some(z)) = (exact, z) {
        let _ = writeln!(text, "exact = {x:.6}, deviation = {z:.2} stderr");
    }
    Ok(Done {
        status: Status::Success,
        outcome: to_value(&stats),
        evidence: json!({
            "exact_p_inner": exact,
            "deviation_in_stderr": z,
        }),
        text,
    })
}
