//! Command-line audits for Gaussian (Laplace) approximations of Bayesian
//! posteriors: single-dataset certificate reports, sample-size sweeps,
//! minimum-certified-n curves and truth-versus-bound comparisons.
//!
//! Exit codes: 0 success, 1 input error, 2 infeasible certificate,
//! 3 ground-truth oracle unavailable, 4 dominance check failed.

mod config;
mod pipeline;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use laplace_audit::certificates::{min_certified_n, optimize_radii, verify_assumptions, BoundTarget, Centric};
use laplace_audit::certificates::build_constants;
use laplace_audit::geometry::Geometry;
use laplace_audit::AuditError;

use config::{build_configured_model, build_generated_model, BoundChoice, CentricChoice, ModelConfig, Resolved};
use pipeline::{audit_model, ground_truth, truth_summary, AuditOutcome};

const SCHEMA_VERSION: u32 = 1;
const SWEEP_HEADER: &str = "\
# laplace-audit sweep schema v1
# columns: family,centric,n,status,delta,delta_bar,tv,w1,cov_ipm,mean_error_bound,cov_error_bound,truth_mean,truth_var,truth_tv,truth_w1,mean_crossed,var_crossed
family,centric,n,status,delta,delta_bar,tv,w1,cov_ipm,mean_error_bound,cov_error_bound,truth_mean,truth_var,truth_tv,truth_w1,mean_crossed,var_crossed";
const MIN_N_HEADER: &str = "\
# laplace-audit min-n schema v1
# columns: d,min_n,status
d,min_n,status";

#[derive(Parser)]
#[command(name = "laplace-audit", version, about = "Finite-sample certificates for Laplace approximations of Bayesian posteriors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Centring convention: map, mle or both.
    #[arg(long, global = true)]
    centric: Option<String>,
    /// Bound selection: tv, w1, cov or all.
    #[arg(long, global = true)]
    bounds: Option<String>,
    /// Output format: json or csv.
    #[arg(long, global = true)]
    format: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Audit one dataset: modes, constants, assumption checks, bounds.
    Audit,
    /// Evaluate bounds and ground truth over the configured n-grid.
    Sweep,
    /// Smallest certified sample size for each dimension in d_range.
    MinN,
    /// Side-by-side ground truth versus certified bounds.
    OracleCompare {
        /// Scale all bound values by 0.01 to exercise the dominance
        /// failure path.
        #[arg(long, hide = true)]
        debug_scale_bounds: bool,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                eprint!("{e}");
                std::process::exit(1);
            }
            print!("{e}");
            std::process::exit(0);
        }
    };
    std::process::exit(match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            classify(&e)
        }
    });
}

fn classify(e: &anyhow::Error) -> i32 {
    match e.downcast_ref::<AuditError>() {
        Some(AuditError::Infeasible(_)) => 2,
        Some(AuditError::Unavailable(_)) => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<i32> {
    let config_path = cli.config.as_deref().context("--config is required")?;
    let resolved = config::load(
        config_path,
        cli.seed,
        cli.centric.as_deref(),
        cli.bounds.as_deref(),
    )?;
    let format = cli.format.as_deref();
    let out = cli.out.as_deref();
    match cli.command {
        Command::Audit => cmd_audit(&resolved, out, format),
        Command::Sweep => cmd_sweep(&resolved, out, format),
        Command::MinN => cmd_min_n(&resolved, out, format),
        Command::OracleCompare { debug_scale_bounds } => {
            cmd_oracle_compare(&resolved, out, format, debug_scale_bounds)
        }
    }
}

fn centric_list(choice: CentricChoice) -> Vec<Centric> {
    match choice {
        CentricChoice::Map => vec![Centric::Map],
        CentricChoice::Mle => vec![Centric::Mle],
        CentricChoice::Both => vec![Centric::Mle, Centric::Map],
    }
}

fn centric_name(c: Centric) -> &'static str {
    match c {
        Centric::Map => "map",
        Centric::Mle => "mle",
    }
}

fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content)
            .with_context(|| format!("cannot write {}", path.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn require_format(format: Option<&str>, expected: &str, command: &str) -> Result<()> {
    if let Some(f) = format {
        if f != expected {
            bail!("{command} only supports --format {expected}");
        }
    }
    Ok(())
}

/// Smallest certified n for the configured generator at dimension `d`,
/// used both by `min-n` and as the hint attached to infeasible audits.
fn smallest_certified_n(resolved: &Resolved, d: usize) -> laplace_audit::Result<usize> {
    let mut certified = |n: usize| -> bool {
        let Ok(model) = build_generated_model(resolved, n, Some(d)) else { return false };
        let Ok(geom) = Geometry::analyze(&model) else { return false };
        let Ok(radii) = optimize_radii(&model, &geom, Centric::Map, BoundTarget::Tv) else {
            return false;
        };
        let Ok(cs) = build_constants(&model, &geom, Centric::Map, radii.delta, Some(radii.delta_bar))
        else {
            return false;
        };
        verify_assumptions(&model, &geom, &cs).checks.iter().all(|c| c.flag)
    };
    min_certified_n(&mut certified, 64, 10_000_000)
}

fn infeasible_with_hint(resolved: &Resolved, msg: String) -> anyhow::Error {
    let hint = if resolved.config.data.generate.is_some() {
        match smallest_certified_n(resolved, resolved.config.model.dimension()) {
            Ok(m) => format!("; minimum n with a certificate: {m}"),
            Err(_) => "; minimum n exceeds the search cap".to_string(),
        }
    } else {
        "; minimum n unknown for a fixed dataset".to_string()
    };
    anyhow::Error::new(AuditError::Infeasible(format!("{msg}{hint}")))
}

fn bound_json(b: &laplace_audit::bounds::BoundValue) -> serde_json::Value {
    json!({
        "total": b.total,
        "components": b.components.iter().map(|(k, v)| json!({"name": k, "value": v})).collect::<Vec<_>>(),
        "note": b.note,
    })
}

fn outcome_json(outcome: &AuditOutcome, bounds: BoundChoice) -> serde_json::Value {
    let g = &outcome.geom;
    let mode_json = |m: &laplace_audit::geometry::ModeSolve| {
        json!({
            "theta": m.theta.iter().copied().collect::<Vec<_>>(),
            "converged": m.converged,
            "grad_norm": m.grad_norm,
            "iterations": m.iterations,
        })
    };
    let curv_json = |c: &laplace_audit::geometry::CurvatureSummary| {
        json!({
            "lambda_min": c.lambda_min,
            "trace_inv": c.trace_inv,
            "logdet": c.logdet,
        })
    };
    let cs = &outcome.constants;
    let rep = &outcome.report;
    let want = |b: BoundChoice| bounds == BoundChoice::All || bounds == b;
    json!({
        "centric": centric_name(outcome.centric),
        "mode_mle": mode_json(&g.mode_mle),
        "mode_map": mode_json(&g.mode_map),
        "curvature_mle": curv_json(&g.curv_mle),
        "curvature_map": curv_json(&g.curv_map),
        "separation": g.separation,
        "radii": { "delta": outcome.delta, "delta_bar": outcome.delta_bar },
        "constants": {
            "m1": cs.m1, "m1_tilde": cs.m1_tilde, "m1_hat": cs.m1_hat,
            "m2": cs.m2, "m2_bar": cs.m2_bar,
            "kappa": cs.kappa, "kappa_bar": cs.kappa_bar,
        },
        "assumptions": outcome.assumptions.checks.iter().map(|c| json!({
            "name": c.name,
            "description": c.description,
            "flag": c.flag,
            "witness": c.witness,
        })).collect::<Vec<_>>(),
        "certified": outcome.certified,
        "bounds": {
            "tv": want(BoundChoice::Tv).then(|| bound_json(&rep.tv)),
            "w1": want(BoundChoice::W1).then(|| bound_json(&rep.w1)),
            "cov_ipm": want(BoundChoice::Cov).then(|| bound_json(&rep.cov_ipm)),
            "mean_error": rep.mean_error,
            "cov_error": rep.cov_error,
        },
    })
}

fn cmd_audit(resolved: &Resolved, out: Option<&Path>, format: Option<&str>) -> Result<i32> {
    require_format(format, "json", "audit")?;
    let model = build_configured_model(resolved)?;
    let mut results = Vec::new();
    let mut certified = true;
    for centric in centric_list(resolved.centric) {
        let outcome = audit_model(
            &model,
            centric,
            resolved.bounds.target(),
            resolved.config.run.radius.as_ref(),
        )
        .map_err(|e| match e {
            AuditError::Infeasible(msg) => infeasible_with_hint(resolved, msg),
            other => anyhow::Error::new(other),
        })?;
        certified &= outcome.certified;
        results.push(outcome_json(&outcome, resolved.bounds));
    }
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "family": resolved.config.model.family_name(),
        "d": model.d,
        "n": model.n,
        "seed": resolved.seed,
        "results": results,
    });
    emit(out, &format!("{}\n", serde_json::to_string_pretty(&report)?))?;
    Ok(if certified { 0 } else { 2 })
}

struct SweepRow {
    centric: Centric,
    n: usize,
    status: &'static str,
    delta: Option<f64>,
    delta_bar: Option<f64>,
    tv: Option<f64>,
    w1: Option<f64>,
    cov_ipm: Option<f64>,
    mean_error_bound: Option<f64>,
    cov_error_bound: Option<f64>,
    truth_mean: Option<f64>,
    truth_var: Option<f64>,
    truth_tv: Option<f64>,
    truth_w1: Option<f64>,
    mean_crossed: Option<bool>,
    var_crossed: Option<bool>,
}

fn infeasible_row(centric: Centric, n: usize) -> SweepRow {
    SweepRow {
        centric,
        n,
        status: "infeasible",
        delta: None,
        delta_bar: None,
        tv: None,
        w1: None,
        cov_ipm: None,
        mean_error_bound: None,
        cov_error_bound: None,
        truth_mean: None,
        truth_var: None,
        truth_tv: None,
        truth_w1: None,
        mean_crossed: None,
        var_crossed: None,
    }
}

fn sweep_point(resolved: &Resolved, n: usize) -> Result<Vec<SweepRow>> {
    let model = build_generated_model(resolved, n, None)?;
    let samples = resolved.config.run.samples.unwrap_or(20_000);
    let mut rows = Vec::new();
    for centric in centric_list(resolved.centric) {
        let outcome = match audit_model(
            &model,
            centric,
            resolved.bounds.target(),
            resolved.config.run.radius.as_ref(),
        ) {
            Ok(o) => o,
            Err(AuditError::Infeasible(_)) => {
                rows.push(infeasible_row(centric, n));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let truth = ground_truth(&model, &outcome.geom, centric, samples, resolved.seed).ok();
        let summary =
            truth.as_ref().map(|t| truth_summary(t, &outcome.geom, centric, n as f64));
        let rep = &outcome.report;
        rows.push(SweepRow {
            centric,
            n,
            status: "ok",
            delta: Some(outcome.delta),
            delta_bar: outcome.delta_bar,
            tv: Some(rep.tv.total),
            w1: Some(rep.w1.total),
            cov_ipm: Some(rep.cov_ipm.total),
            mean_error_bound: Some(rep.mean_error),
            cov_error_bound: Some(rep.cov_error),
            truth_mean: summary.as_ref().map(|s| s.mean_magnitude),
            truth_var: summary.as_ref().map(|s| s.cov_magnitude),
            truth_tv: truth.as_ref().map(|t| t.tv_vs_laplace).filter(|v| v.is_finite()),
            truth_w1: truth.as_ref().map(|t| t.w1_vs_laplace).filter(|v| v.is_finite()),
            mean_crossed: summary.as_ref().map(|s| rep.mean_error < s.mean_magnitude),
            var_crossed: summary.as_ref().map(|s| rep.cov_error < s.cov_magnitude),
        });
    }
    Ok(rows)
}

fn cell_f(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn cell_b(v: Option<bool>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn sweep_csv(family: &str, rows: &[SweepRow]) -> String {
    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for r in rows {
        csv.push_str(&format!(
            "{family},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            centric_name(r.centric),
            r.n,
            r.status,
            cell_f(r.delta),
            cell_f(r.delta_bar),
            cell_f(r.tv),
            cell_f(r.w1),
            cell_f(r.cov_ipm),
            cell_f(r.mean_error_bound),
            cell_f(r.cov_error_bound),
            cell_f(r.truth_mean),
            cell_f(r.truth_var),
            cell_f(r.truth_tv),
            cell_f(r.truth_w1),
            cell_b(r.mean_crossed),
            cell_b(r.var_crossed),
        ));
    }
    csv
}

fn sweep_json(family: &str, rows: &[SweepRow]) -> Result<String> {
    let rows: Vec<serde_json::Value> = rows
        .iter()
        .map(|r| {
            json!({
                "family": family,
                "centric": centric_name(r.centric),
                "n": r.n,
                "status": r.status,
                "delta": r.delta,
                "delta_bar": r.delta_bar,
                "tv": r.tv,
                "w1": r.w1,
                "cov_ipm": r.cov_ipm,
                "mean_error_bound": r.mean_error_bound,
                "cov_error_bound": r.cov_error_bound,
                "truth_mean": r.truth_mean,
                "truth_var": r.truth_var,
                "truth_tv": r.truth_tv,
                "truth_w1": r.truth_w1,
                "mean_crossed": r.mean_crossed,
                "var_crossed": r.var_crossed,
            })
        })
        .collect();
    let doc = json!({ "schema_version": SCHEMA_VERSION, "rows": rows });
    Ok(format!("{}\n", serde_json::to_string_pretty(&doc)?))
}

fn cmd_sweep(resolved: &Resolved, out: Option<&Path>, format: Option<&str>) -> Result<i32> {
    let grid = resolved
        .config
        .run
        .n_grid
        .as_ref()
        .context("sweep needs run.n_grid")?
        .clone();
    // Points run in parallel; output order follows the grid regardless
    // of completion order.
    let points: Vec<Result<Vec<SweepRow>>> =
        grid.par_iter().map(|&n| sweep_point(resolved, n)).collect();
    let mut rows = Vec::new();
    for point in points {
        rows.extend(point?);
    }
    let family = resolved.config.model.family_name();
    let content = match format.unwrap_or("csv") {
        "csv" => sweep_csv(family, &rows),
        "json" => sweep_json(family, &rows)?,
        other => bail!("unknown format {other:?} (expected json or csv)"),
    };
    emit(out, &content)?;
    Ok(0)
}

fn cmd_min_n(resolved: &Resolved, out: Option<&Path>, format: Option<&str>) -> Result<i32> {
    let [lo, hi] = resolved.config.run.d_range.context("min-n needs run.d_range")?;
    let scalar_family = resolved.config.model.dimension() == 1
        && !matches!(
            resolved.config.model,
            ModelConfig::LogisticT { .. } | ModelConfig::LogisticGaussian { .. }
        );
    if scalar_family && (lo != 1 || hi > 1) {
        bail!("this family is one-dimensional; use d_range = [1, 1]");
    }
    let dims: Vec<usize> = (lo..=hi).collect();
    let results: Vec<(usize, laplace_audit::Result<usize>)> = dims
        .par_iter()
        .map(|&d| (d, smallest_certified_n(resolved, d)))
        .collect();
    let content = match format.unwrap_or("csv") {
        "csv" => {
            let mut csv = String::from(MIN_N_HEADER);
            csv.push('\n');
            for (d, res) in &results {
                match res {
                    Ok(m) => csv.push_str(&format!("{d},{m},ok\n")),
                    Err(_) => csv.push_str(&format!("{d},,exceeds cap\n")),
                }
            }
            csv
        }
        "json" => {
            let rows: Vec<serde_json::Value> = results
                .iter()
                .map(|(d, res)| match res {
                    Ok(m) => json!({"d": d, "min_n": m, "status": "ok"}),
                    Err(_) => json!({"d": d, "min_n": null, "status": "exceeds cap"}),
                })
                .collect();
            format!(
                "{}\n",
                serde_json::to_string_pretty(&json!({
                    "schema_version": SCHEMA_VERSION,
                    "rows": rows,
                }))?
            )
        }
        other => bail!("unknown format {other:?} (expected json or csv)"),
    };
    emit(out, &content)?;
    Ok(0)
}

fn cmd_oracle_compare(
    resolved: &Resolved,
    out: Option<&Path>,
    format: Option<&str>,
    debug_scale_bounds: bool,
) -> Result<i32> {
    require_format(format, "json", "oracle-compare")?;
    let model = build_configured_model(resolved)?;
    let samples = resolved.config.run.samples.unwrap_or(20_000);
    let scale = if debug_scale_bounds { 0.01 } else { 1.0 };
    let mut results = Vec::new();
    let mut all_dominant = true;
    for centric in centric_list(resolved.centric) {
        let outcome = audit_model(
            &model,
            centric,
            resolved.bounds.target(),
            resolved.config.run.radius.as_ref(),
        )?;
        let truth = ground_truth(&model, &outcome.geom, centric, samples, resolved.seed)?;
        let summary = truth_summary(&truth, &outcome.geom, centric, model.n as f64);
        let rep = &outcome.report;
        let tv_bound = rep.tv.total * scale;
        let w1_bound = rep.w1.total * scale;
        let mean_bound = rep.mean_error * scale;
        let cov_bound = rep.cov_error * scale;
        let tv_ok = truth.tv_vs_laplace.is_finite().then(|| truth.tv_vs_laplace <= tv_bound);
        let w1_ok = truth.w1_vs_laplace.is_finite().then(|| truth.w1_vs_laplace <= w1_bound);
        let mean_ok = summary.mean_error <= mean_bound;
        let var_ok = summary.cov_error <= cov_bound;
        all_dominant &= tv_ok.unwrap_or(true) && w1_ok.unwrap_or(true) && mean_ok && var_ok;
        results.push(json!({
            "centric": centric_name(centric),
            "truth": {
                "method": format!("{:?}", truth.method),
                "mean": truth.mean.iter().copied().collect::<Vec<_>>(),
                "cov": truth.cov.iter().copied().collect::<Vec<_>>(),
                "tv": truth.tv_vs_laplace,
                "w1": truth.w1_vs_laplace,
                "mean_error": summary.mean_error,
                "cov_error": summary.cov_error,
                "error_estimate": truth.error_estimate,
                "ess": truth.ess,
            },
            "bound": {
                "tv": tv_bound,
                "w1": w1_bound,
                "mean_error": mean_bound,
                "cov_error": cov_bound,
            },
            "dominance": {
                "tv": tv_ok,
                "w1": w1_ok,
                "mean": mean_ok,
                "variance": var_ok,
            },
        }));
    }
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "family": resolved.config.model.family_name(),
        "d": model.d,
        "n": model.n,
        "seed": resolved.seed,
        "all_dominant": all_dominant,
        "results": results,
    });
    emit(out, &format!("{}\n", serde_json::to_string_pretty(&doc)?))?;
    Ok(if all_dominant { 0 } else { 4 })
}
