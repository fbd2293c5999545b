use std::fs;
use std::io::Write;
use std::path::Path;

use cubelap::probes::{
    build_diffusion_probe, build_transport_probe, derivative_at_origin, laplacian_cubed_at_origin, ode_reduction_check,
    probe_grid, run_violation_experiment, Experiment, Mollifier, ViolationKind, ViolationReport, NEGATIVITY_TOLERANCE,
};
use cubelap::stepper::{StateDump, TimeSeries};
use cubelap::system::SystemConfig;
use cubelap::{audit, Field, Grid, MatrixN, ReactionSpec, RunConfig, SignSampler, SystemSpec};
use serde_json::json;

use crate::output::{scaling_script, timeseries_script, OutDir};
use crate::{exit, Cli, Command, ProbeArg, ViolationArg};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Runtime(_) => exit::RUNTIME,
        }
    }
}

/// Bad parameters are usage errors; only numerical or I/O failures are runtime errors.
impl From<cubelap::Error> for CliError {
    fn from(e: cubelap::Error) -> Self {
        use cubelap::Error::*;
        match e {
            Parse { .. }
            | InvalidField { .. }
            | DimensionMismatch { .. }
            | NotPositiveDefinite { .. }
            | IndexOutOfRange { .. }
            | Precondition(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

const DEFAULT_N: usize = 64;
const DEFAULT_BOX: f64 = 32.0;
const DEFAULT_T_END: f64 = 0.1;

pub fn dispatch(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Audit { config } => run_audit(cli, config),
        Command::Simulate {
            config,
            init,
            stride,
            no_dealias,
        } => run_simulate(cli, config, init, *stride, *no_dealias),
        Command::Probe { kind, d, radius, axis } => run_probe(cli, *kind, *d, *radius, *axis),
        Command::Counterexample { .. } => run_counterexample(cli),
        Command::OdeCheck { config, u0 } => run_ode_check(cli, config, u0.as_deref()),
    }
}

/// Config problems of any kind are the caller's fault, hence a usage error.
fn load(path: &Path) -> Result<(String, SystemConfig, SystemSpec)> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let bad = |e: cubelap::Error| CliError::Usage(format!("{}: {e}", path.display()));
    let cfg = SystemConfig::parse(&text).map_err(bad)?;
    let spec = cfg.to_spec().map_err(bad)?;
    Ok((text, cfg, spec))
}

fn emit(cli: &Cli, summary: &str, json: &str) {
    if cli.global.json {
        println!("{json}");
    } else {
        println!("{summary}");
    }
}

fn one_based(name: &str, v: usize, max: usize) -> Result<usize> {
    if v == 0 || v > max {
        return Err(CliError::Usage(format!("--{name} must be in 1..={max}, got {v}")));
    }
    Ok(v - 1)
}

fn run_audit(cli: &Cli, config: &Path) -> Result<u8> {
    let (text, _, spec) = load(config)?;
    let tol = cli.global.tol.unwrap_or(0.0);
    if !(tol >= 0.0) {
        return Err(CliError::Usage(format!("--tol must be nonnegative, got {tol}")));
    }
    let sampler = SignSampler::with_seed(cli.global.seed);
    let report = audit(&spec, &sampler, tol)?;
    let body = report.to_json();

    let mut out = OutDir::create(&cli.global.out)?;
    out.write("audit.json", &body)?;
    out.finish("audit", cli.global.seed, Some(&text), json!({ "tol": tol, "sampler": sampler }))?;

    let verdict = match report.exit_code() {
        0 => "PASS".to_string(),
        3 => format!("PASS with {} warning(s)", report.warnings.len()),
        _ => {
            let mut counts: Vec<(String, usize)> = Vec::new();
            for v in &report.violations {
                let rule = serde_json::to_value(v.rule).unwrap().as_str().unwrap_or("?").to_string();
                match counts.iter_mut().find(|(r, _)| *r == rule) {
                    Some((_, c)) => *c += 1,
                    None => counts.push((rule, 1)),
                }
            }
            let rules: Vec<String> = counts.iter().map(|(r, c)| format!("{r} x{c}")).collect();
            format!("FAIL, {} violation(s): {}", report.violations.len(), rules.join(", "))
        }
    };
    let evidence = serde_json::to_value(report.reaction_evidence).unwrap();
    let summary = format!(
        "audit {}: {verdict} (reaction evidence: {})",
        config.display(),
        evidence.as_str().unwrap_or("?")
    );
    emit(cli, &summary, &body);
    Ok(report.exit_code() as u8)
}

fn initial_state(init: &str, grid: &Grid, ncomp: usize) -> Result<Field> {
    if init == "gaussian" {
        let w = grid.box_len() / 16.0;
        return Ok(Field::from_fn(grid, ncomp, |_, x| {
            let r2: f64 = x[..grid.d()].iter().map(|v| v * v).sum();
            (-0.5 * r2 / (w * w)).exp()
        }));
    }
    if let Some(list) = init.strip_prefix("const:") {
        let vals = list
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| CliError::Usage(format!("--init {init}: {e}")))?;
        if vals.len() != ncomp {
            return Err(CliError::Usage(format!(
                "--init lists {} values for {ncomp} components",
                vals.len()
            )));
        }
        return Ok(Field::from_fn(grid, ncomp, |k, _| vals[k]));
    }
    let text = fs::read_to_string(init).map_err(|e| CliError::Usage(format!("cannot read --init {init}: {e}")))?;
    let dump: StateDump =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("--init {init}: {e}")))?;
    let u = dump.to_field().map_err(|e| CliError::Usage(format!("--init {init}: {e}")))?;
    if u.grid() != grid || u.ncomp() != ncomp {
        return Err(CliError::Usage(format!(
            "--init {init}: state does not match the {ncomp}-component grid"
        )));
    }
    Ok(u)
}

fn run_simulate(cli: &Cli, config: &Path, init: &str, stride: usize, no_dealias: bool) -> Result<u8> {
    let (text, cfg, spec) = load(config)?;
    let g = &cli.global;
    let n = g.n.or(cfg.grid.as_ref().map(|s| s.n)).unwrap_or(DEFAULT_N);
    let box_len = g.box_len.or(cfg.grid.as_ref().map(|s| s.box_len)).unwrap_or(DEFAULT_BOX);
    let grid = Grid::new(spec.d(), n, box_len)?;
    let t_end = g.t_end.unwrap_or(DEFAULT_T_END);
    let mut rc = match g.dt {
        Some(dt) => RunConfig::new(t_end, dt),
        None => RunConfig::fitted(t_end, RunConfig::default_dt(&spec, &grid)),
    }
    .with_stride(stride.max(1));
    if no_dealias {
        rc = rc.with_dealias(false);
    }
    rc.steps()?;

    let u0 = initial_state(init, &grid, spec.ncomp())?;
    let start_nonneg = u0.values().iter().all(|&v| v >= 0.0);
    let series = cubelap::run(&spec, &u0, &rc)?;

    let mut out = OutDir::create(&g.out)?;
    {
        let mut w = out.writer("timeseries.csv")?;
        series
            .write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let dump = StateDump::from_field(&series.final_state, series.final_t);
    out.write("final_state.json", &serde_json::to_string(&dump).unwrap())?;
    out.write("timeseries.gp", &timeseries_script(spec.ncomp()))?;

    let report = simulate_report(&series, spec.ncomp(), start_nonneg);
    out.write("summary.json", &serde_json::to_string_pretty(&report).unwrap())?;
    out.finish(
        "simulate",
        g.seed,
        Some(&text),
        json!({ "n": n, "box": box_len, "run": rc, "init": init }),
    )?;

    let minima: Vec<String> = report["min"]
        .as_array()
        .unwrap()
        .iter()
        .enumerate()
        .map(|(k, v)| format!("u_{}={:.4e}", k + 1, v.as_f64().unwrap_or(f64::NAN)))
        .collect();
    let mut summary = format!(
        "simulate: {} records to t={:.4e}, min {}",
        series.records.len(),
        series.final_t,
        minima.join(" ")
    );
    let code = if let Some(b) = &series.blow_up {
        summary.push_str(&format!("; BLOW-UP at t={:.4e} (step {})", b.t, b.step));
        exit::RUNTIME
    } else if report["negativity_certificate"].as_bool() == Some(true) {
        summary.push_str("; negativity from nonnegative data");
        exit::FAIL
    } else {
        exit::OK
    };
    emit(cli, &summary, &serde_json::to_string_pretty(&report).unwrap());
    Ok(code)
}

fn simulate_report(series: &TimeSeries, ncomp: usize, start_nonneg: bool) -> serde_json::Value {
    let min: Vec<f64> = (0..ncomp)
        .map(|k| {
            series
                .records
                .iter()
                .map(|r| r.components[k].min)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let first_negative: Vec<Option<f64>> = (0..ncomp).map(|k| series.first_negative_time(k)).collect();
    let certificate = start_nonneg && min.iter().any(|&m| m < -NEGATIVITY_TOLERANCE);
    json!({
        "records": series.records.len(),
        "final_t": series.final_t,
        "min": min,
        "first_negative_t": first_negative,
        "negativity_certificate": certificate,
        "blow_up": series.blow_up,
    })
}

fn run_probe(cli: &Cli, kind: ProbeArg, d: usize, radius: Option<f64>, axis: usize) -> Result<u8> {
    let g = &cli.global;
    if !(1..=3).contains(&d) {
        return Err(CliError::Usage(format!("--d must be 1, 2 or 3, got {d}")));
    }
    let axis = one_based("axis", axis, d)?;
    let n = g.n.unwrap_or(match d {
        1 => 256,
        2 => 128,
        _ => 64,
    });
    let radius = radius.unwrap_or(if d == 3 { 0.6 } else { 0.5 });
    let mollifier = Mollifier::with_radius(radius);
    mollifier.validate()?;
    let eps = g.eps.clone().unwrap_or_else(|| vec![1.0]);

    let mut rows = Vec::new();
    for &e in &eps {
        let grid = match g.box_len {
            Some(b) => Grid::new(d, n, b),
            None => probe_grid(d, n, e),
        }
        ?;
        let (value, expected) = match kind {
            ProbeArg::Diffusion => {
                let u = build_diffusion_probe(&grid, e, mollifier)?;
                (laplacian_cubed_at_origin(&u, 0), -((d * d * d) as f64) / e.powi(6))
            }
            ProbeArg::Transport => {
                let u = build_transport_probe(&grid, axis, 1.0, e, mollifier)?;
                (derivative_at_origin(&u, 0, axis), -1.0 / e)
            }
        };
        rows.push((e, grid.box_len(), value, expected));
    }

    let name = match kind {
        ProbeArg::Diffusion => "diffusion",
        ProbeArg::Transport => "transport",
    };
    let mut out = OutDir::create(&g.out)?;
    let mut csv = String::from("eps,n,box,value,expected,rel_err\n");
    for &(e, b, v, x) in &rows {
        csv.push_str(&format!("{e:e},{n},{b:e},{v:e},{x:e},{:e}\n", ((v - x) / x).abs()));
    }
    out.write("probe.csv", &csv)?;
    out.write("probe.gp", &scaling_script("probe.csv", 4, "|value at origin|"))?;
    out.finish(
        "probe",
        g.seed,
        None,
        json!({ "kind": name, "d": d, "n": n, "radius": radius, "axis": axis + 1, "eps": eps }),
    )?;

    let op = if kind == ProbeArg::Diffusion { "Δ³u(0)" } else { "∂u(0)" };
    let parts: Vec<String> = rows
        .iter()
        .map(|&(e, _, v, x)| format!("eps={e} {op}={v:.6} (expected {x:.6})"))
        .collect();
    let body = serde_json::to_string_pretty(
        &rows
            .iter()
            .map(|&(e, b, v, x)| json!({ "eps": e, "box": b, "value": v, "expected": x }))
            .collect::<Vec<_>>(),
    )
    .unwrap();
    emit(cli, &format!("probe {name} d={d} n={n}: {}", parts.join("; ")), &body);
    Ok(exit::OK)
}

/// Grid used when neither `--n` nor `--box` is given.
fn counterexample_grid(d: usize) -> (usize, f64) {
    match d {
        1 => (1024, 8.0),
        2 => (256, 3.0),
        _ => (128, 3.0),
    }
}

fn run_counterexample(cli: &Cli) -> Result<u8> {
    let Command::Counterexample {
        kind,
        k,
        j,
        a,
        gamma,
        axis,
        d,
        ncomp,
        config,
        t_probe,
    } = &cli.command
    else {
        unreachable!()
    };
    let g = &cli.global;
    if !(1..=3).contains(d) {
        return Err(CliError::Usage(format!("--d must be 1, 2 or 3, got {d}")));
    }
    let loaded = config.as_deref().map(load).transpose()?;
    let nc = match &loaded {
        Some((_, _, spec)) => spec.ncomp(),
        None => ncomp.unwrap_or((*k).max(*j).max(2)),
    };
    let k0 = one_based("k", *k, nc)?;
    let j0 = one_based("j", *j, nc)?;
    let violation = match kind {
        ViolationArg::Diffusion => ViolationKind::Diffusion { k: k0, j: j0, a: *a },
        ViolationArg::Transport => ViolationKind::Transport {
            k: k0,
            j: j0,
            axis: one_based("axis", *axis, *d)?,
            gamma: *gamma,
        },
        ViolationArg::Reaction => {
            let reaction = match &loaded {
                Some((_, _, spec)) => spec.reaction().clone(),
                None => {
                    let mut l = MatrixN::zeros(nc);
                    l.set(k0, j0, *a);
                    ReactionSpec::linear(l)
                }
            };
            ViolationKind::Reaction { k: k0, reaction }
        }
    };
    violation.spec(*d, nc)?;

    let (n0, b0) = counterexample_grid(*d);
    let grid = Grid::new(*d, g.n.unwrap_or(n0), g.box_len.unwrap_or(b0))?;
    let eps = g.eps.clone().unwrap_or_else(|| vec![1.0, 0.5, 0.25]);
    let mut exp = Experiment::new(violation, nc, grid.clone(), eps);
    exp.t_probe = *t_probe;
    let report = run_violation_experiment(&exp)?;
    let body = report.to_json();

    let mut out = OutDir::create(&g.out)?;
    out.write("violation.json", &body)?;
    out.write("violation.csv", &violation_csv(&report))?;
    out.write("violation.gp", &scaling_script("violation.csv", 2, "|initial rate at origin|"))?;
    out.finish(
        "counterexample",
        g.seed,
        loaded.as_ref().map(|(t, _, _)| t.as_str()),
        json!({
            "kind": report.kind, "k": k, "j": j, "a": a, "gamma": gamma, "axis": axis, "d": d,
            "components": nc, "n": grid.n(), "box": grid.box_len(), "eps": exp.eps, "t_probe": report.t_probe,
        }),
    )?;

    let slope = report
        .fitted_slope
        .map(|s| format!("{s:.4}"))
        .unwrap_or_else(|| "n/a".into());
    let verdict = if report.negativity_observed {
        format!(
            "negativity observed (threshold eps {})",
            report.negativity_threshold_eps.map(|e| e.to_string()).unwrap_or_default()
        )
    } else {
        "no negativity observed".into()
    };
    let min = report.min_after_t_probe.iter().copied().fold(f64::INFINITY, f64::min);
    let summary = format!(
        "counterexample {} (u_{} pinned): {verdict}; slope {slope} over eps {:?}; min {min:.4e}; {} scale(s) dropped",
        report.kind,
        report.pinned_component,
        report.eps,
        report.dropped.len()
    );
    emit(cli, &summary, &body);
    Ok(if report.negativity_observed { exit::OK } else { exit::FAIL })
}

fn violation_csv(r: &ViolationReport) -> String {
    let mut s = String::from("eps,initial_rate_at_origin,min_after_t_probe\n");
    for ((e, rate), m) in r.eps.iter().zip(&r.initial_rate_at_origin).zip(&r.min_after_t_probe) {
        s.push_str(&format!("{e:e},{rate:e},{m:e}\n"));
    }
    s
}

fn run_ode_check(cli: &Cli, config: &Path, u0: Option<&[f64]>) -> Result<u8> {
    let (text, _, spec) = load(config)?;
    let g = &cli.global;
    let nc = spec.ncomp();
    let u0 = u0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.5; nc]);
    if u0.len() != nc {
        return Err(CliError::Usage(format!("--u0 lists {} values for {nc} components", u0.len())));
    }
    let t_end = g.t_end.unwrap_or(1.0);
    let dt = g.dt.unwrap_or(1e-2);
    let tol = g.tol.unwrap_or(1e-8);
    let cmp = ode_reduction_check(spec.reaction(), &u0, t_end, dt)?;
    let body = serde_json::to_string_pretty(&cmp).unwrap();

    let mut out = OutDir::create(&g.out)?;
    out.write("ode_check.json", &body)?;
    out.finish(
        "ode-check",
        g.seed,
        Some(&text),
        json!({ "u0": u0, "t_end": t_end, "dt": dt, "tol": tol }),
    )?;

    let agree = cmp.max_deviation <= tol;
    let negative = cmp.pde_first_negative.iter().any(Option::is_some);
    let mut summary = format!(
        "ode-check: max |PDE − ODE| = {:.3e} over {} records ({})",
        cmp.max_deviation,
        cmp.steps_compared,
        if agree { "agree" } else { "DISAGREE" }
    );
    if negative {
        summary.push_str("; a component goes negative");
    }
    if let Some(t) = cmp.pde_blow_up {
        summary.push_str(&format!("; blow-up at t={t:.4e}"));
    }
    emit(cli, &summary, &body);
    Ok(if agree && !negative { exit::OK } else { exit::FAIL })
}
