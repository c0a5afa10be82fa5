//! One function per subcommand. Sweep rows are computed in parallel and
//! written in decreasing `δ`, so the last row is the one nearest the
//! `δ → 0` limit.

use std::path::Path;

use moreau_w2::differentials::{convergence_row, DEGENERATE_GAP};
use moreau_w2::envelope::{
    bounds_row, check_delta, default_max_iter, default_tol, equality_row, BoundsRow, SweepRow,
};
use moreau_w2::functionals::{functional_report, symmetric_grid, CONVEXITY_TOL};
use moreau_w2::io::{gaussian_to_json, parse_affine, parse_gaussian, read_measure_path, MeasureInput};
use moreau_w2::linalg::operator_norm;
use moreau_w2::tolerance::{ASSIGNMENT_TIE, CERTIFICATE_VIOLATION};
use moreau_w2::{
    displacement_convexity_check, envelope_value, equality_threshold, gaussian_w2,
    sample_gaussian_stream, w2_assignment, w2_general, w2_gradient, AffineMap, EmpiricalCloud,
    Error, GaussianSpec, Perturbation, TransportPlan,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::output::{flag, num, Run, Table};
use crate::svg::{line_chart, Series};
use crate::{Common, ConvergeArgs, EnvelopeArgs, Failure, FunctionalArgs, SweepArgs};

const BOUNDS_DELTAS: [f64; 5] = [0.9, 0.5, 0.25, 0.1, 0.05];
const CONVERGE_DELTAS: [f64; 5] = [0.2, 0.1, 0.05, 0.02, 0.01];
const EQUALITY_N: usize = 500;

/// Inline JSON when the text starts with `{`, otherwise a file path.
fn json_text(arg: &str) -> Result<String, Failure> {
    if arg.trim_start().starts_with('{') {
        Ok(arg.to_string())
    } else {
        Ok(std::fs::read_to_string(arg)?)
    }
}

fn gaussian_arg(arg: &str) -> Result<GaussianSpec, Failure> {
    Ok(parse_gaussian(&json_text(arg)?)?)
}

fn measure_arg(path: &Path) -> Result<MeasureInput, Failure> {
    read_measure_path(path).map_err(|e| match e {
        Error::Io(io) => Failure::from(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        other => other.into(),
    })
}

/// One side of the input: a CSV measure or a sampled Gaussian.
enum Side {
    Measure(MeasureInput),
    Sampled(EmpiricalCloud),
}

impl Side {
    fn cloud(self, flag: &str) -> Result<EmpiricalCloud, Failure> {
        match self {
            Side::Measure(MeasureInput::Cloud(c)) | Side::Sampled(c) => Ok(c),
            Side::Measure(MeasureInput::Weighted(_)) => Err(Failure::invalid(format!(
                "{flag} must be a uniform cloud (no `w` column) for this subcommand"
            ))),
        }
    }
}

fn side(
    c: &Common,
    path: Option<&Path>,
    spec: Option<&str>,
    stream: u64,
    name: &str,
) -> Result<Side, Failure> {
    match (path, spec) {
        (Some(_), Some(_)) => Err(Failure::invalid(format!(
            "--{name} and --gauss-{name} are mutually exclusive"
        ))),
        (Some(p), None) => Ok(Side::Measure(measure_arg(p)?)),
        (None, Some(s)) => {
            let g = gaussian_arg(s)?;
            let n = c
                .n
                .ok_or_else(|| Failure::invalid(format!("--n is required with --gauss-{name}")))?;
            Ok(Side::Sampled(sample_gaussian_stream(&g, n, c.seed, stream)?))
        }
        (None, None) => Err(Failure::invalid(format!(
            "one of --{name} or --gauss-{name} is required"
        ))),
    }
}

/// Gaussian sides are drawn on streams 0 and 1 of `--seed`.
fn sides(c: &Common) -> Result<(Side, Side), Failure> {
    Ok((
        side(c, c.a.as_deref(), c.gauss_a.as_deref(), 0, "a")?,
        side(c, c.b.as_deref(), c.gauss_b.as_deref(), 1, "b")?,
    ))
}

fn clouds(c: &Common) -> Result<(EmpiricalCloud, EmpiricalCloud), Failure> {
    let (a, b) = sides(c)?;
    Ok((a.cloud("--a")?, b.cloud("--b")?))
}

fn inputs_meta(c: &Common) -> Value {
    let path = |p: &Option<std::path::PathBuf>| p.as_ref().map(|p| p.display().to_string());
    json!({
        "a": path(&c.a),
        "b": path(&c.b),
        "gauss_a": c.gauss_a,
        "gauss_b": c.gauss_b,
        "n": c.n,
        "seed": c.seed,
        "tol": c.tol,
        "max_iter": c.max_iter,
    })
}

fn check_tol(c: &Common) -> Result<(), Failure> {
    match c.tol {
        Some(t) if !(t > 0.0 && t.is_finite()) => {
            Err(Failure::invalid(format!("--tol must be positive, got {t}")))
        }
        _ => Ok(()),
    }
}

/// `--deltas` plus `--delta`, validated, deduplicated and sorted decreasing.
fn delta_list(args: &SweepArgs, default: &[f64]) -> Result<Vec<f64>, Failure> {
    let mut ds: Vec<f64> = args.deltas.clone().unwrap_or_default();
    ds.extend(args.delta);
    if ds.is_empty() {
        ds = default.to_vec();
    }
    for &d in &ds {
        check_delta(d)?;
    }
    ds.sort_by(|a, b| b.total_cmp(a));
    ds.dedup();
    Ok(ds)
}

fn new_run(name: &'static str, c: &Common) -> Run {
    let mut run = Run::new(name, c.out.as_deref());
    run.set("inputs", inputs_meta(c));
    run
}

fn plan_table(plan: &TransportPlan) -> Table {
    let mut t = Table::new(["source", "target", "mass"]);
    for (i, j, m) in plan.entries() {
        t.push(vec![i.to_string(), j.to_string(), num(m)]);
    }
    t
}

pub fn w2(c: &Common) -> Result<(), Failure> {
    let mut run = new_run("w2", c);
    let (a, b) = sides(c)?;
    let to_measure = |s: Side| match s {
        Side::Measure(m) => m,
        Side::Sampled(c) => MeasureInput::Cloud(c),
    };
    let (a, b) = (to_measure(a), to_measure(b));
    let (n_a, n_b, dim) = (a.len(), b.len(), a.dim());
    let (plan, solver) = match (&a, &b) {
        (MeasureInput::Cloud(x), MeasureInput::Cloud(y)) if x.len() == y.len() => {
            (w2_assignment(x, y)?, "assignment")
        }
        _ => (w2_general(&a.to_weighted(), &b.to_weighted())?, "network_simplex"),
    };
    let mut t = Table::new(["cost", "solver", "n_source", "n_target", "dim", "certificate_violation"]);
    t.push(vec![
        num(plan.cost),
        solver.to_string(),
        n_a.to_string(),
        n_b.to_string(),
        dim.to_string(),
        num(plan.certificate_violation),
    ]);
    run.set(
        "tolerances",
        json!({
            "assignment_tie": ASSIGNMENT_TIE,
            "certificate_violation_limit": CERTIFICATE_VIOLATION,
        }),
    );
    run.write_main(&t)?;
    run.write_side(".plan.csv", &plan_table(&plan))?;
    run.finish()?;
    Ok(())
}

pub fn grad(c: &Common) -> Result<(), Failure> {
    let mut run = new_run("grad", c);
    let (mu, nu) = clouds(c)?;
    let field = w2_gradient(&mu, &nu)?;
    let lhs = field.mean_square();
    let rhs = 4.0 * field.w2;
    let mut t = Table::new(["lhs", "rhs", "rel_err", "assignment_gap", "degenerate"]);
    t.push(vec![
        num(lhs),
        num(rhs),
        num((lhs - rhs).abs() / (1.0 + rhs)),
        num(field.assignment_gap),
        flag(field.is_degenerate()),
    ]);
    let d = mu.dim();
    let mut header = vec!["atom".to_string(), "target".to_string()];
    header.extend((0..d).map(|k| format!("x{k}")));
    header.extend((0..d).map(|k| format!("v{k}")));
    let mut f = Table::new(header);
    for i in 0..mu.len() {
        let mut row = vec![i.to_string(), field.permutation[i].to_string()];
        row.extend(mu.point(i).iter().map(|&v| num(v)));
        row.extend((0..d).map(|k| num(field.vectors[(i, k)])));
        f.push(row);
    }
    run.set("tolerances", json!({ "degenerate_gap": DEGENERATE_GAP }));
    run.write_main(&t)?;
    run.write_side(".field.csv", &f)?;
    run.finish()?;
    Ok(())
}

pub fn envelope(args: &EnvelopeArgs) -> Result<(), Failure> {
    let c = &args.common;
    check_tol(c)?;
    check_delta(args.delta)?;
    let mut run = new_run("envelope", c);
    let (x, nu) = clouds(c)?;
    let w2 = w2_assignment(&x, &nu)?.cost;
    let tol = c.tol.unwrap_or_else(|| default_tol(w2));
    let max_iter = c.max_iter.unwrap_or_else(|| default_max_iter(x.len()));
    let r = match envelope_value(&x, &nu, args.delta, tol, max_iter) {
        Ok(r) => r,
        Err(Error::NoConvergence(r)) => *r,
        Err(e) => return Err(e.into()),
    };
    let mut t = Table::new(["value", "w2", "upper_bound", "gap", "iterations", "converged"]);
    t.push(vec![
        num(r.value),
        num(r.w2),
        num(r.upper_bound),
        num(r.gap),
        r.iterations.to_string(),
        flag(r.converged),
    ]);
    let d = x.dim();
    let perm = r.plan_at_opt.permutation().expect("assignment plan").to_vec();
    let mut header = vec!["atom".to_string(), "target".to_string()];
    header.extend((0..d).map(|k| format!("x{k}")));
    header.extend((0..d).map(|k| format!("g{k}")));
    let mut g = Table::new(header);
    for (i, &target) in perm.iter().enumerate() {
        let mut row = vec![i.to_string(), target.to_string()];
        row.extend(r.maximizer.point(i).iter().map(|&v| num(v)));
        row.extend((0..d).map(|k| num(r.gradient[(i, k)])));
        g.push(row);
    }
    run.set("delta", json!(args.delta));
    run.set(
        "tolerances",
        json!({ "envelope_tol": tol, "max_iter": max_iter, "assignment_solves": r.assignment_solves }),
    );
    run.write_main(&t)?;
    run.write_side(".gradient.csv", &g)?;
    if c.emit_svg {
        let lower: Vec<(f64, f64)> =
            r.history.iter().enumerate().map(|(k, h)| (k as f64 + 1.0, h.lower)).collect();
        let upper: Vec<(f64, f64)> =
            r.history.iter().enumerate().map(|(k, h)| (k as f64 + 1.0, h.upper)).collect();
        run.write_svg(&line_chart(
            "envelope bounds per iteration",
            "iteration",
            "bound",
            &[
                Series { label: "lower".into(), points: lower },
                Series { label: "upper".into(), points: upper },
            ],
            false,
        ))?;
    }
    run.finish()?;
    if r.converged {
        Ok(())
    } else {
        Err(Failure::not_converged(format!(
            "gap {:e} after {} iterations",
            r.gap, r.iterations
        )))
    }
}

fn unconverged(deltas: impl Iterator<Item = (f64, bool)>) -> Result<(), Failure> {
    let bad: Vec<f64> = deltas.filter(|d| !d.1).map(|d| d.0).collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::not_converged(format!("rows with delta {bad:?} did not converge")))
    }
}

pub fn bounds_check(args: &SweepArgs) -> Result<(), Failure> {
    let c = &args.common;
    check_tol(c)?;
    let deltas = delta_list(args, &BOUNDS_DELTAS)?;
    let mut run = new_run("bounds-check", c);
    let (x, nu) = clouds(c)?;
    let rows: Vec<BoundsRow> = deltas
        .par_iter()
        .map(|&d| bounds_row(&x, &nu, d, c.tol, c.max_iter))
        .collect::<Result<_, _>>()?;
    let mut t = Table::new([
        "delta", "w2", "value", "upper", "gap", "lower_ok", "upper_ok", "converged",
    ]);
    for r in &rows {
        t.push(vec![
            num(r.delta),
            num(r.w2),
            num(r.value),
            num(r.upper),
            num(r.gap),
            flag(r.lower_ok),
            flag(r.upper_ok),
            flag(r.converged),
        ]);
    }
    let w2 = rows.first().map_or(0.0, |r| r.w2);
    run.set("deltas", json!(deltas));
    run.set(
        "tolerances",
        json!({
            "envelope_tol": c.tol.unwrap_or_else(|| default_tol(w2)),
            "max_iter": c.max_iter.unwrap_or_else(|| default_max_iter(x.len())),
        }),
    );
    run.write_main(&t)?;
    if c.emit_svg {
        let series = |label: &str, f: fn(&BoundsRow) -> f64| Series {
            label: label.into(),
            points: rows.iter().map(|r| (r.delta, f(r))).collect(),
        };
        run.write_svg(&line_chart(
            "sandwich bounds",
            "delta",
            "value",
            &[
                series("W2^2", |r| r.w2),
                series("envelope", |r| r.value),
                series("W2^2/(1-delta)", |r| r.upper),
            ],
            false,
        ))?;
    }
    run.finish()?;
    unconverged(rows.iter().map(|r| (r.delta, r.converged)))
}

pub fn equality_sweep(args: &SweepArgs) -> Result<(), Failure> {
    let c = &args.common;
    check_tol(c)?;
    if c.a.is_some() || c.b.is_some() {
        return Err(Failure::invalid("equality-sweep takes --gauss-a and --gauss-b, not clouds"));
    }
    let (ga, gb) = match (&c.gauss_a, &c.gauss_b) {
        (Some(a), Some(b)) => (gaussian_arg(a)?, gaussian_arg(b)?),
        _ => return Err(Failure::invalid("--gauss-a and --gauss-b are required")),
    };
    let threshold = equality_threshold(&ga, &gb)?;
    let default: Vec<f64> = [0.8 * threshold, 0.5 * threshold, 1e-3]
        .iter()
        .map(|d| d.clamp(1e-3, moreau_w2::tolerance::DELTA_MAX))
        .collect();
    let deltas = delta_list(args, &default)?;
    let n = c.n.unwrap_or(EQUALITY_N);
    let mut run = new_run("equality-sweep", c);
    let exact = gaussian_w2(&ga, &gb)?;
    // Both clouds on one stream; see `moreau_w2::equality_sweep`.
    let mu = sample_gaussian_stream(&ga, n, c.seed, 0)?;
    let nu = sample_gaussian_stream(&gb, n, c.seed, 0)?;
    let rows: Vec<SweepRow> = deltas
        .par_iter()
        .map(|&d| equality_row(&mu, &nu, d, c.tol, threshold, exact))
        .collect::<Result<_, _>>()?;
    let mut t = Table::new([
        "delta",
        "threshold",
        "envelope_value",
        "predicted",
        "w2",
        "gaussian_w2",
        "relative_deviation",
        "gap",
        "converged",
    ]);
    for r in &rows {
        t.push(vec![
            num(r.delta),
            num(r.threshold),
            num(r.envelope_value),
            num(r.predicted),
            num(r.w2),
            num(r.gaussian_w2),
            num(r.relative_deviation),
            num(r.gap),
            flag(r.converged),
        ]);
    }
    let w2 = rows.first().map_or(0.0, |r| r.w2);
    run.set("gauss_a_parsed", serde_json::from_str(&gaussian_to_json(&ga)).unwrap_or(Value::Null));
    run.set("gauss_b_parsed", serde_json::from_str(&gaussian_to_json(&gb)).unwrap_or(Value::Null));
    run.set("n", json!(n));
    run.set("deltas", json!(deltas));
    run.set("sampling", json!("both clouds drawn from stream 0 of the seed"));
    run.set(
        "tolerances",
        json!({
            "envelope_tol": c.tol.unwrap_or_else(|| default_tol(w2)),
            "max_iter": default_max_iter(n),
        }),
    );
    run.write_main(&t)?;
    if c.emit_svg {
        run.write_svg(&line_chart(
            "equality regime",
            "delta",
            "value",
            &[
                Series {
                    label: "envelope".into(),
                    points: rows.iter().map(|r| (r.delta, r.envelope_value)).collect(),
                },
                Series {
                    label: "W2^2/(1-delta)".into(),
                    points: rows.iter().map(|r| (r.delta, r.predicted)).collect(),
                },
            ],
            false,
        ))?;
    }
    run.finish()?;
    unconverged(rows.iter().map(|r| (r.delta, r.converged)))
}

pub fn grad_converge(args: &ConvergeArgs) -> Result<(), Failure> {
    let c = &args.sweep.common;
    check_tol(c)?;
    let deltas = delta_list(&args.sweep, &CONVERGE_DELTAS)?;
    if !(args.radius_scale >= 0.0 && args.radius_scale.is_finite() && args.radius_power.is_finite()) {
        return Err(Failure::invalid("--radius-scale must be nonnegative and --radius-power finite"));
    }
    let mut run = new_run("grad-converge", c);
    let (x0, nu) = clouds(c)?;
    let field = w2_gradient(&x0, &nu)?.require_unique()?;
    let p = Perturbation {
        scale: args.radius_scale,
        power: args.radius_power,
        seed: c.seed,
    };
    let rows = deltas
        .par_iter()
        .map(|&d| convergence_row(&x0, &nu, &field, d, &p))
        .collect::<Result<Vec<_>, _>>()?;
    let target = c.tol.unwrap_or(0.05 * field.rms());
    let final_below = rows.last().is_some_and(|r| r.gradient_error < target);
    let mut t = Table::new([
        "delta",
        "radius",
        "perturbation_norm",
        "gradient_error",
        "envelope_gap",
        "gradient_norm",
        "norm_bound",
        "norm_bound_ok",
        "converged",
    ]);
    for r in &rows {
        t.push(vec![
            num(r.delta),
            num(r.radius),
            num(r.perturbation_norm),
            num(r.gradient_error),
            num(r.envelope_gap),
            num(r.gradient_norm),
            num(r.norm_bound),
            flag(r.norm_bound_ok),
            flag(r.converged),
        ]);
    }
    run.set("deltas", json!(deltas));
    run.set(
        "perturbation",
        json!({ "scale": p.scale, "power": p.power, "seed": p.seed }),
    );
    run.set("reference_gradient_norm", json!(field.rms()));
    run.set("assignment_gap", json!(field.assignment_gap));
    run.set("final_error_below_tol", json!(final_below));
    run.set(
        "tolerances",
        json!({
            "final_error_tol": target,
            "envelope_tol": rows.iter().map(|r| r.envelope_tol).collect::<Vec<_>>(),
            "max_iter": default_max_iter(x0.len()),
            "degenerate_gap": DEGENERATE_GAP,
        }),
    );
    run.write_main(&t)?;
    if c.emit_svg {
        run.write_svg(&line_chart(
            "gradient error",
            "delta",
            "error",
            &[Series {
                label: "gradient error".into(),
                points: rows.iter().map(|r| (r.delta, r.gradient_error)).collect(),
            }],
            true,
        ))?;
    }
    run.finish()?;
    unconverged(rows.iter().map(|r| (r.delta, r.converged)))
}

pub fn functionals(args: &FunctionalArgs) -> Result<(), Failure> {
    let c = &args.common;
    let g = match (&c.gauss_a, &c.a) {
        (Some(s), None) => gaussian_arg(s)?,
        _ => return Err(Failure::invalid("functionals takes exactly --gauss-a")),
    };
    let f = match &args.map {
        Some(m) => parse_affine(&json_text(m)?)?,
        None => AffineMap::identity(g.dim()),
    };
    let op = operator_norm(&f.matrix);
    let h_max = args
        .h_max
        .unwrap_or(if op > 0.0 { 0.45 / op } else { 1.0 });
    if !(h_max > 0.0 && h_max.is_finite()) || args.h_count < 3 {
        return Err(Failure::invalid("--h-max must be positive and --h-count at least 3"));
    }
    let mut run = new_run("functionals", c);
    let report = functional_report(&g)?;
    let table = displacement_convexity_check(&g, &f, &symmetric_grid(h_max, args.h_count))?;
    let min_second = table
        .second_differences
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let mut t = Table::new(["quantity", "value"]);
    t.push(vec!["entropy".into(), num(report.entropy)]);
    t.push(vec!["fisher".into(), num(report.fisher)]);
    t.push(vec!["min_second_difference".into(), num(min_second)]);
    t.push(vec!["convex".into(), flag(table.convex)]);
    let mut side = Table::new(["h", "entropy", "second_difference"]);
    for (k, &(h, e)) in table.rows.iter().enumerate() {
        let sd = if k == 0 || k + 1 == table.rows.len() {
            String::new()
        } else {
            num(table.second_differences[k - 1])
        };
        side.push(vec![num(h), num(e), sd]);
    }
    run.set("map", json!(args.map));
    run.set("h_grid", json!({ "h_max": h_max, "count": args.h_count, "operator_norm": op }));
    run.set("tolerances", json!({ "convexity_tol": CONVEXITY_TOL }));
    run.write_main(&t)?;
    run.write_side(".convexity.csv", &side)?;
    if c.emit_svg {
        run.write_svg(&line_chart(
            "entropy along the push-forward",
            "h",
            "entropy",
            &[Series { label: "entropy".into(), points: table.rows.clone() }],
            false,
        ))?;
    }
    run.finish()?;
    Ok(())
}
