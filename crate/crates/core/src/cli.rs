//! `curvlab` command line.
//!
//! Exit codes: 0 success, 1 a checker or monitor found a counterexample,
//! 2 usage or input error. The resolved configuration of every run is
//! printed to stderr as one JSON line.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use crate::error::{CurvError, Result};
use crate::flow::{self, integrate, s_t_membership, FlowConfig, Method, StParams};
use crate::functionals::{
    bochner_min_eigenvalue, flag_pinching, min_complex_sectional, pinching_report, sectional_pinching,
};
use crate::gallery::GallerySpec;
use crate::inequalities::run_suite;
use crate::io::{operator_to_json, read_operator};
use crate::search::{SearchOptions, DEFAULT_BUDGET};

#[derive(Parser, Debug)]
#[command(name = "curvlab", version, about = "Curvature operator laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pinching constants, complex sectional curvature and Ricci data of an operator file.
    Report(ReportArgs),
    /// Run inequality checkers; exit 1 if any fails.
    Verify(VerifyArgs),
    /// Integrate the curvature ODE and write monitor rows as CSV.
    Flow(FlowArgs),
    /// Write a gallery operator as JSON.
    Example(ExampleArgs),
    /// Sample flag-pinched operators over a grid of targets.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit the report as JSON (otherwise `key: value` lines).
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Checker names, comma separated or repeated; `all` selects every applicable checker.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    suite: Vec<String>,
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Use this operator in every trial.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FlowArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "t-end", default_value_t = 0.1)]
    t_end: f64,
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    #[arg(long, default_value_t = 2.0)]
    factor: f64,
    #[arg(long)]
    normalize: bool,
    /// `rk4` or `rk4-adaptive`.
    #[arg(long, default_value = "rk4")]
    method: String,
    /// Search budget of the pinching and CSC monitors; 0 leaves those columns empty.
    #[arg(long, default_value_t = 0)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// With `--C`, `--C2`, `--C3`: check membership in S(t) at every row.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long = "C")]
    c: Option<f64>,
    #[arg(long = "C2")]
    c2: Option<f64>,
    #[arg(long = "C3")]
    c3: Option<f64>,
}

#[derive(Args, Debug)]
struct ExampleArgs {
    /// round | section4 | fubini_study | random_bianchi | random_flag_pinched
    #[arg(long)]
    name: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "lambda-target")]
    lambda_target: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// Comma-separated pinching targets; empty for a header-only file.
    #[arg(long = "lambda-grid", default_value = "0.15,0.2,0.25,0.3")]
    lambda_grid: String,
    /// Samples per grid value.
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 40_000)]
    budget: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run<I: IntoIterator<Item = OsString>>(args: I) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    configure_threads();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn configure_threads() {
    if let Some(k) = std::env::var("CURVLAB_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&k| k > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
}

fn resolved(cmd: &str, cfg: serde_json::Value) {
    eprintln!("{}", json!({ "command": cmd, "config": cfg }));
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(io::BufWriter::new(io::stdout())),
    })
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Report(a) => cmd_report(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Flow(a) => cmd_flow(a),
        Command::Example(a) => cmd_example(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

fn cmd_report(a: ReportArgs) -> Result<i32> {
    resolved(
        "report",
        json!({ "in": a.input, "budget": a.budget, "seed": a.seed, "json": a.json }),
    );
    let op = read_operator(&a.input, false)?;
    let report = pinching_report(&op, &SearchOptions::new(a.budget, a.seed))?;
    let mut out = output(None)?;
    if a.json {
        writeln!(out, "{}", serde_json::to_string(&report)?)?;
    } else {
        let opt = |v: Option<f64>| v.map_or("undefined".to_string(), |x| x.to_string());
        writeln!(out, "lambda_flag: {}", opt(report.lambda_flag))?;
        writeln!(out, "lambda_sec: {}", opt(report.lambda_sec))?;
        writeln!(out, "min_csc: {}", report.min_csc)?;
        writeln!(out, "min_isotropic: {}", opt(report.min_isotropic))?;
        writeln!(out, "scal: {}", report.scal)?;
        writeln!(out, "ric_min: {}", report.ric_min)?;
        writeln!(out, "ric_max: {}", report.ric_max)?;
        writeln!(out, "bochner_min: {}", report.bochner_min)?;
    }
    out.flush()?;
    Ok(0)
}

fn cmd_verify(a: VerifyArgs) -> Result<i32> {
    resolved(
        "verify",
        json!({ "suite": a.suite, "n": a.n, "trials": a.trials, "seed": a.seed, "tol": a.tol, "in": a.input }),
    );
    let fixed = match &a.input {
        Some(p) => Some(read_operator(p, false)?),
        None => None,
    };
    let reports = run_suite(&a.suite, a.n, a.trials, a.seed, a.tol, fixed.as_ref())?;
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "{}", serde_json::to_string(&reports)?)?;
    out.flush()?;
    Ok(if reports.iter().all(|r| r.pass) { 0 } else { 1 })
}

fn cmd_flow(a: FlowArgs) -> Result<i32> {
    let cfg = FlowConfig {
        t_end: a.t_end,
        dt: a.dt,
        method: a.method.parse::<Method>()?,
        factor: a.factor,
        normalize: a.normalize,
        monitor_budget: a.budget,
        seed: a.seed,
        allow_any_factor: false,
    };
    let params = match (a.eps, a.c, a.c2, a.c3) {
        (None, None, None, None) => None,
        (Some(eps), Some(c), Some(c2), Some(c3)) => Some(StParams { eps, c, c2, c3 }),
        _ => {
            return Err(CurvError::BadParams(
                "--eps, --C, --C2 and --C3 must be given together".into(),
            ))
        }
    };
    resolved(
        "flow",
        json!({ "in": a.input, "out": a.out, "flow": cfg, "membership": params }),
    );
    if let Some(p) = &params {
        p.validate()?;
    }
    let op = read_operator(&a.input, false)?;
    let traj = integrate(&op, &cfg)?;
    let out = output(a.out.as_deref())?;
    flow::write_csv(&traj, out)?;
    eprintln!("termination: {}", traj.termination.as_str());
    let mut code = 0;
    if let Some(p) = params {
        let opts = SearchOptions::new(if a.budget > 0 { a.budget } else { 20_000 }, a.seed);
        for (t, op, row) in &traj.steps {
            if !row.step_accepted {
                continue;
            }
            let m = s_t_membership(op, *t, &p, &opts)?;
            if !m.all() {
                eprintln!(
                    "S(t) violation at t = {t}: {}",
                    serde_json::to_string(&json!({ "membership": m, "operator": serde_json::from_str::<serde_json::Value>(&operator_to_json(op))? }))?
                );
                code = 1;
            }
        }
    }
    Ok(code)
}

fn cmd_example(a: ExampleArgs) -> Result<i32> {
    let spec = GallerySpec {
        name: a.name,
        n: a.n,
        m: a.m,
        seed: a.seed,
        lambda_target: a.lambda_target,
    };
    resolved("example", json!({ "spec": spec, "out": a.out }));
    let op = spec.build()?;
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "{}", operator_to_json(&op))?;
    out.flush()?;
    Ok(0)
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| {
            x.parse::<f64>()
                .map_err(|_| CurvError::BadParams(format!("bad grid value `{x}`")))
        })
        .collect()
}

fn cmd_sweep(a: SweepArgs) -> Result<i32> {
    let grid = parse_grid(&a.lambda_grid)?;
    resolved(
        "sweep",
        json!({ "n": a.n, "lambda_grid": grid, "trials": a.trials, "seed": a.seed, "budget": a.budget, "out": a.out }),
    );
    if a.n < 3 {
        return Err(CurvError::DimensionTooSmall { n: a.n, min: 3 });
    }
    let jobs: Vec<(usize, f64, u64)> = grid
        .iter()
        .enumerate()
        .flat_map(|(g, &lam)| (0..a.trials).map(move |k| (g, lam, (g * 1_000_003 + k) as u64)))
        .collect();
    let rows: Vec<Result<[String; 5]>> = jobs
        .par_iter()
        .map(|&(_, lam, k)| {
            let seed = a.seed.wrapping_mul(0x9E37_79B9).wrapping_add(k);
            let op = crate::gallery::random_flag_pinched(a.n, lam, seed)?;
            let opts = SearchOptions::new(a.budget, seed);
            let flag = flag_pinching(&op, &opts).ok().and_then(|r| r.value);
            let sec = sectional_pinching(&op, &opts).value;
            let csc = if a.n >= 4 {
                min_complex_sectional(&op, &opts).value.to_string()
            } else {
                "n/a".to_string()
            };
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            Ok([
                lam.to_string(),
                opt(flag),
                opt(sec),
                csc,
                bochner_min_eigenvalue(&op).to_string(),
            ])
        })
        .collect();
    let out = output(a.out.as_deref())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lambda_target", "lambda_flag", "lambda_sec", "min_csc", "bochner_min"])
        .map_err(flow::csv_err)?;
    for r in rows {
        w.write_record(r?).map_err(flow::csv_err)?;
    }
    w.flush()?;
    Ok(0)
}
