//! Experiment runner for the constrained-Hamiltonian integrator library.
//!
//! Selects a benchmark problem and an HBVM(k,s) method, then either runs a
//! dyadic convergence study (producing a convergence table) or a single
//! fixed-step propagation (producing a per-step series). Results are written
//! as CSV plus a JSON twin carrying the effective configuration and
//! wall-clock timings. Experiments are described by a JSON config file,
//! command-line flags, or both (flags win).
//!
//! Exit codes: 0 on success, 1 on numerical failure (outputs computed so far
//! are still written), 2 on configuration errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use hbvm_core::diagnostics::{
    convergence_study_with_reference, reference_solution, ConvergenceTable, DyadicSchedule,
    RateEntry, ReferenceConfig, StudyConfig, StudyError,
};
use hbvm_core::hbvm::{propagate, SolverConfig};
use hbvm_core::polybasis::build_tableau;
use hbvm_core::problems::{by_name, names, BenchmarkProblem};

#[derive(Parser)]
#[command(
    name = "hbvm",
    version,
    about = "Energy-conserving integrators for constrained Hamiltonian systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file and/or flags.
    Run(RunArgs),
    /// Print the catalog of benchmark problems.
    List,
    /// Print the version.
    Version,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration file (optional if flags fully specify
    /// the run).
    config: Option<PathBuf>,
    /// Problem name (see `hbvm list`).
    #[arg(long)]
    problem: Option<String>,
    /// Number of quadrature stages k (k >= s).
    #[arg(long)]
    k: Option<usize>,
    /// Number of fundamental stages s.
    #[arg(long)]
    s: Option<usize>,
    /// Fixed-step run with this step size (mutually exclusive with --dyadic).
    #[arg(long = "h", value_name = "H")]
    step: Option<f64>,
    /// Integration horizon (defaults to the problem's standard horizon).
    #[arg(long = "t-end", value_name = "T")]
    t_end: Option<f64>,
    /// Dyadic convergence study over rows i0..i1 (step i uses 2^i times the
    /// base number of steps).
    #[arg(long, value_name = "I0:I1")]
    dyadic: Option<String>,
    /// Output directory (default: config `outputs`, then $HBVM_OUT, then `.`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for study rows (default: all available cores).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
}

/// Configuration-class failure: exit status 2.
/// Run-time (numerical or I/O) failure: exit status 1.
#[derive(Debug)]
enum CliError {
    Config(String),
    Run(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => match run(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(CliError::Config(msg)) => {
                eprintln!("config error: {msg}");
                ExitCode::from(2)
            }
            Err(CliError::Run(msg)) => {
                eprintln!("error: {msg}");
                ExitCode::from(1)
            }
        },
        Command::List => {
            print!("{}", catalog());
            ExitCode::SUCCESS
        }
        Command::Version => {
            println!("hbvm {}", env!("CARGO_PKG_VERSION"));
            ExitCode::SUCCESS
        }
    }
}

// ---------------------------------------------------------------------------
// Config file schema.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    problem: Option<String>,
    k: Option<usize>,
    s: Option<usize>,
    schedule: Option<FileSchedule>,
    outputs: Option<String>,
    reference_overrides: Option<ReferenceOverrides>,
    solver: Option<SolverOverrides>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum FileSchedule {
    Dyadic {
        i_min: u32,
        i_max: u32,
        /// Step size of row 0, either a number or the formula "period/5".
        /// Defaults to 1.0 (conical-pendulum: period/5).
        base_h: Option<BaseH>,
        t_end: Option<f64>,
    },
    Fixed {
        h: f64,
        t_end: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum BaseH {
    Number(f64),
    Formula(String),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReferenceOverrides {
    k_ref: Option<usize>,
    s_ref: Option<usize>,
    refinement: Option<usize>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverOverrides {
    stop_tol: Option<f64>,
    max_iterations: Option<usize>,
    stagnation_window: Option<usize>,
}

fn load_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Config(format!(
            "{}: line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

// ---------------------------------------------------------------------------
// Flag/file merging.
// ---------------------------------------------------------------------------

enum ResolvedSchedule {
    Dyadic { schedule: DyadicSchedule, base_h: f64 },
    Fixed { h: f64, t_end: f64, n_steps: usize },
}

struct ResolvedRun {
    prob: BenchmarkProblem,
    k: usize,
    s: usize,
    schedule: ResolvedSchedule,
    out_dir: PathBuf,
    reference: ReferenceConfig,
    solver: SolverConfig,
    jobs: Option<usize>,
}

fn parse_dyadic_flag(text: &str) -> Result<(u32, u32), CliError> {
    let err = || {
        CliError::Config(format!(
            "--dyadic expects I0:I1 (e.g. 0:8), got `{text}`"
        ))
    };
    let (a, b) = text.split_once(':').ok_or_else(err)?;
    let i0 = a.trim().parse::<u32>().map_err(|_| err())?;
    let i1 = b.trim().parse::<u32>().map_err(|_| err())?;
    Ok((i0, i1))
}

fn default_base_h(prob: &BenchmarkProblem) -> f64 {
    match prob.known.period {
        Some(t) if prob.name == "conical-pendulum" => t / 5.0,
        _ => 1.0,
    }
}

fn resolve_base_h(spec: Option<BaseH>, prob: &BenchmarkProblem) -> Result<f64, CliError> {
    match spec {
        None => Ok(default_base_h(prob)),
        Some(BaseH::Number(x)) => {
            if x.is_finite() && x > 0.0 {
                Ok(x)
            } else {
                Err(CliError::Config(format!("base_h must be positive and finite, got {x}")))
            }
        }
        Some(BaseH::Formula(f)) => {
            if f.trim() == "period/5" {
                let period = prob.known.period.ok_or_else(|| {
                    CliError::Config(format!(
                        "problem `{}` has no known period; base_h \"period/5\" is unavailable",
                        prob.name
                    ))
                })?;
                Ok(period / 5.0)
            } else {
                Err(CliError::Config(format!(
                    "unsupported base_h formula `{f}` (only \"period/5\")"
                )))
            }
        }
    }
}

/// Number of steps covering `t_end` with step `h`, required to be an integer
/// up to a 1e-9 relative tolerance.
fn steps_for(t_end: f64, h: f64, what: &str) -> Result<usize, CliError> {
    if !(h.is_finite() && h > 0.0) {
        return Err(CliError::Config(format!("{what} must be positive and finite, got {h}")));
    }
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(CliError::Config(format!(
            "t_end must be positive and finite, got {t_end}"
        )));
    }
    let n = (t_end / h).round();
    if n < 1.0 || (n * h - t_end).abs() > 1e-9 * t_end.abs().max(1.0) {
        return Err(CliError::Config(format!(
            "{what} = {h} does not divide the horizon t_end = {t_end} into an integer number of steps"
        )));
    }
    Ok(n as usize)
}

fn resolve(args: &RunArgs) -> Result<ResolvedRun, CliError> {
    let file = match &args.config {
        Some(path) => Some(load_config(path)?),
        None => None,
    };
    let file_ref = file.as_ref();

    let problem_name = args
        .problem
        .clone()
        .or_else(|| file_ref.and_then(|f| f.problem.clone()))
        .ok_or_else(|| {
            CliError::Config("no problem selected (use --problem or a config file)".into())
        })?;
    let prob = by_name(&problem_name).map_err(|_| {
        CliError::Config(format!(
            "unknown problem `{problem_name}`; available: {}",
            names().join(", ")
        ))
    })?;

    let k = args
        .k
        .or_else(|| file_ref.and_then(|f| f.k))
        .ok_or_else(|| CliError::Config("k not specified (use --k or a config file)".into()))?;
    let s = args
        .s
        .or_else(|| file_ref.and_then(|f| f.s))
        .ok_or_else(|| CliError::Config("s not specified (use --s or a config file)".into()))?;
    if s < 1 || k < s {
        return Err(CliError::Config(format!(
            "method orders must satisfy k >= s >= 1, got k = {k}, s = {s}"
        )));
    }

    let dyadic_flag = match &args.dyadic {
        Some(text) => Some(parse_dyadic_flag(text)?),
        None => None,
    };
    if dyadic_flag.is_some() && args.step.is_some() {
        return Err(CliError::Config(
            "--dyadic and --h are mutually exclusive (a run is either a study or a fixed propagation)"
                .into(),
        ));
    }

    let file_schedule = file_ref.and_then(|f| f.schedule.clone());
    let schedule = if let Some((i0, i1)) = dyadic_flag {
        let (base_h, file_t_end) = match &file_schedule {
            Some(FileSchedule::Dyadic { base_h, t_end, .. }) => (base_h.clone(), *t_end),
            _ => (None, None),
        };
        build_dyadic(&prob, i0, i1, base_h, args.t_end.or(file_t_end))?
    } else if let Some(h) = args.step {
        let file_t_end = match &file_schedule {
            Some(FileSchedule::Fixed { t_end, .. }) => Some(*t_end),
            _ => None,
        };
        let t_end = args.t_end.or(file_t_end).unwrap_or(prob.default_horizon);
        let n_steps = steps_for(t_end, h, "h")?;
        ResolvedSchedule::Fixed { h, t_end, n_steps }
    } else {
        match file_schedule {
            Some(FileSchedule::Dyadic { i_min, i_max, base_h, t_end }) => {
                build_dyadic(&prob, i_min, i_max, base_h, args.t_end.or(t_end))?
            }
            Some(FileSchedule::Fixed { h, t_end }) => {
                let t_end = args.t_end.unwrap_or(t_end);
                let n_steps = steps_for(t_end, h, "h")?;
                ResolvedSchedule::Fixed { h, t_end, n_steps }
            }
            None => {
                return Err(CliError::Config(
                    "no schedule: provide one in the config file or via --dyadic / --h".into(),
                ))
            }
        }
    };

    let out_dir = args
        .out
        .clone()
        .or_else(|| file_ref.and_then(|f| f.outputs.clone()).map(PathBuf::from))
        .or_else(|| std::env::var_os("HBVM_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));

    let mut reference = ReferenceConfig::default();
    if let Some(over) = file_ref.and_then(|f| f.reference_overrides) {
        if let Some(k_ref) = over.k_ref {
            reference.k = k_ref;
        }
        if let Some(s_ref) = over.s_ref {
            reference.s = s_ref;
        }
        if let Some(refinement) = over.refinement {
            reference.refinement = refinement;
        }
    }
    if reference.s < 1 || reference.k < reference.s || reference.refinement < 1 {
        return Err(CliError::Config(format!(
            "reference overrides must satisfy k_ref >= s_ref >= 1 and refinement >= 1, got k_ref = {}, s_ref = {}, refinement = {}",
            reference.k, reference.s, reference.refinement
        )));
    }

    let mut solver = SolverConfig::default();
    if let Some(over) = file_ref.and_then(|f| f.solver) {
        if let Some(tol) = over.stop_tol {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(CliError::Config(format!(
                    "solver stop_tol must be positive and finite, got {tol}"
                )));
            }
            solver.stop_tol = Some(tol);
        }
        if let Some(n) = over.max_iterations {
            if n < 1 {
                return Err(CliError::Config("solver max_iterations must be >= 1".into()));
            }
            solver.max_iterations = n;
        }
        if let Some(w) = over.stagnation_window {
            if w < 1 {
                return Err(CliError::Config("solver stagnation_window must be >= 1".into()));
            }
            solver.stagnation_window = w;
        }
    }

    if args.jobs == Some(0) {
        return Err(CliError::Config("--jobs must be >= 1".into()));
    }

    Ok(ResolvedRun { prob, k, s, schedule, out_dir, reference, solver, jobs: args.jobs })
}

fn build_dyadic(
    prob: &BenchmarkProblem,
    i_min: u32,
    i_max: u32,
    base_h: Option<BaseH>,
    t_end: Option<f64>,
) -> Result<ResolvedSchedule, CliError> {
    let t_end = t_end.unwrap_or(prob.default_horizon);
    let base_h = resolve_base_h(base_h, prob)?;
    let base_steps = steps_for(t_end, base_h, "base_h")?;
    let schedule = DyadicSchedule::new(t_end, base_steps, i_min, i_max)
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(ResolvedSchedule::Dyadic { schedule, base_h })
}

// ---------------------------------------------------------------------------
// Experiment execution.
// ---------------------------------------------------------------------------

fn run(args: RunArgs) -> Result<(), CliError> {
    let resolved = resolve(&args)?;
    std::fs::create_dir_all(&resolved.out_dir).map_err(|e| {
        CliError::Run(format!(
            "cannot create output directory {}: {e}",
            resolved.out_dir.display()
        ))
    })?;
    match resolved.schedule {
        ResolvedSchedule::Dyadic { .. } => run_dyadic(&resolved),
        ResolvedSchedule::Fixed { .. } => run_fixed(&resolved),
    }
}

/// Runs the study inside a dedicated thread pool when `--jobs` is given.
#[cfg(feature = "parallel")]
fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Run(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_jobs<T>(_jobs: Option<usize>, f: impl FnOnce() -> T) -> Result<T, CliError> {
    Ok(f())
}

fn run_dyadic(resolved: &ResolvedRun) -> Result<(), CliError> {
    let ResolvedSchedule::Dyadic { schedule, base_h } = &resolved.schedule else {
        unreachable!("run_dyadic called with a fixed schedule");
    };
    let study = StudyConfig {
        reference: resolved.reference.clone(),
        solver: resolved.solver.clone(),
        ..StudyConfig::default()
    };

    let total_start = Instant::now();
    let n_finest = schedule.n_steps(schedule.i_max);
    let h_ref = schedule.t_end / (n_finest * resolved.reference.refinement.max(1)) as f64;
    let ref_start = Instant::now();
    let reference = reference_solution(
        &resolved.prob.system,
        &resolved.prob.initial_state,
        schedule.t_end,
        n_finest,
        &study.reference,
        &study.solver,
    )
    .map_err(|e| study_error(e, h_ref))?;
    let reference_seconds = ref_start.elapsed().as_secs_f64();

    let rows_start = Instant::now();
    let table = with_jobs(resolved.jobs, || {
        convergence_study_with_reference(
            &resolved.prob.system,
            &resolved.prob.initial_state,
            resolved.k,
            resolved.s,
            schedule,
            &study,
            &reference,
        )
    })?
    .map_err(|e| study_error(e, schedule.h(schedule.i_min)))?;
    let rows_seconds = rows_start.elapsed().as_secs_f64();

    let stem = format!(
        "{}_k{}s{}_dyadic{}-{}",
        resolved.prob.name, resolved.k, resolved.s, schedule.i_min, schedule.i_max
    );
    let csv_path = resolved.out_dir.join(format!("{stem}.csv"));
    let json_path = resolved.out_dir.join(format!("{stem}.json"));

    write_file(&csv_path, &dyadic_csv(&table))?;
    let config_echo = config_json(
        resolved,
        json!({
            "kind": "dyadic",
            "i_min": schedule.i_min,
            "i_max": schedule.i_max,
            "base_h": base_h,
            "base_steps": schedule.base_steps,
            "t_end": schedule.t_end,
        }),
    );
    let doc = json!({
        "config": config_echo,
        "rows": table.rows.iter().map(dyadic_row_json).collect::<Vec<_>>(),
        "failures": table
            .failures
            .iter()
            .map(|f| json!({"i": f.i, "h": f.h, "message": f.message}))
            .collect::<Vec<_>>(),
        "timings": {
            "reference_seconds": reference_seconds,
            "rows_seconds": rows_seconds,
            "total_seconds": total_start.elapsed().as_secs_f64(),
        },
    });
    write_file(&json_path, &pretty(&doc))?;
    println!("wrote {}", csv_path.display());
    println!("wrote {}", json_path.display());

    if table.failures.is_empty() {
        Ok(())
    } else {
        for f in &table.failures {
            eprintln!("row i = {} (h = {}) failed: {}", f.i, fmt_num(f.h), f.message);
        }
        Err(CliError::Run(format!(
            "{} of {} study rows failed; partial table written",
            table.failures.len(),
            table.rows.len() + table.failures.len()
        )))
    }
}

/// Maps a study error to the CLI error classes: invalid method/schedule
/// configuration exits 2, numerical breakdown (with the failing step) exits 1.
fn study_error(e: StudyError, h: f64) -> CliError {
    match e {
        StudyError::Basis(_) | StudyError::InvalidSchedule { .. } | StudyError::Model(_) => {
            CliError::Config(e.to_string())
        }
        other => CliError::Run(format!("h = {}: {other}", fmt_num(h))),
    }
}

fn run_fixed(resolved: &ResolvedRun) -> Result<(), CliError> {
    let ResolvedSchedule::Fixed { h, t_end, n_steps } = resolved.schedule else {
        unreachable!("run_fixed called with a dyadic schedule");
    };
    let tab = build_tableau(resolved.s, resolved.k)
        .map_err(|e| CliError::Config(e.to_string()))?;

    struct SeriesRow {
        t: f64,
        q: Vec<f64>,
        p: Vec<f64>,
        energy: f64,
        g_inf: f64,
        hidden_inf: f64,
        lambda: Vec<f64>,
        iterations: usize,
        converged: bool,
    }

    let mut rows: Vec<SeriesRow> = Vec::with_capacity(n_steps);
    let start = Instant::now();
    let outcome = propagate(
        &resolved.prob.system,
        &tab,
        &resolved.prob.initial_state,
        h,
        n_steps,
        &resolved.solver,
        |t, step| {
            rows.push(SeriesRow {
                t,
                q: step.q1.clone(),
                p: step.p1.clone(),
                energy: step.energy,
                g_inf: step.g_residual,
                hidden_inf: step.hidden_residual,
                lambda: step.lambda_bar.clone(),
                iterations: step.iterations,
                converged: step.converged,
            });
        },
    );
    let total_seconds = start.elapsed().as_secs_f64();

    let m = resolved.prob.system.dim();
    let nu = resolved.prob.system.num_constraints();
    let mut csv = String::from("t");
    for i in 0..m {
        csv.push_str(&format!(",q{i}"));
    }
    for i in 0..m {
        csv.push_str(&format!(",p{i}"));
    }
    csv.push_str(",H,g_inf,hidden_inf");
    for a in 0..nu {
        csv.push_str(&format!(",lambda{a}"));
    }
    csv.push_str(",iterations\n");
    for row in &rows {
        csv.push_str(&fmt_num(row.t));
        for x in row.q.iter().chain(row.p.iter()) {
            csv.push(',');
            csv.push_str(&fmt_num(*x));
        }
        csv.push_str(&format!(
            ",{},{},{}",
            fmt_num(row.energy),
            fmt_num(row.g_inf),
            fmt_num(row.hidden_inf)
        ));
        for x in &row.lambda {
            csv.push(',');
            csv.push_str(&fmt_num(*x));
        }
        csv.push_str(&format!(",{}\n", row.iterations));
    }

    let stem = format!(
        "{}_k{}s{}_h{}",
        resolved.prob.name, resolved.k, resolved.s, fmt_num(h)
    );
    let csv_path = resolved.out_dir.join(format!("{stem}.csv"));
    let json_path = resolved.out_dir.join(format!("{stem}.json"));
    write_file(&csv_path, &csv)?;

    let initial = &resolved.prob.initial_state;
    let doc = json!({
        "config": config_json(
            resolved,
            json!({"kind": "fixed", "h": h, "t_end": t_end, "n_steps": n_steps}),
        ),
        "initial": {
            "t": initial.t,
            "q": initial.q,
            "p": initial.p,
            "H": resolved.prob.system.hamiltonian(initial),
        },
        "rows": rows
            .iter()
            .map(|r| {
                json!({
                    "t": r.t,
                    "q": r.q,
                    "p": r.p,
                    "H": r.energy,
                    "g_inf": r.g_inf,
                    "hidden_inf": r.hidden_inf,
                    "lambda": r.lambda,
                    "iterations": r.iterations,
                    "converged": r.converged,
                })
            })
            .collect::<Vec<_>>(),
        "timings": {"total_seconds": total_seconds},
    });
    write_file(&json_path, &pretty(&doc))?;
    println!("wrote {}", csv_path.display());
    println!("wrote {}", json_path.display());

    match outcome {
        Ok(_) => Ok(()),
        Err(e) => Err(CliError::Run(format!(
            "h = {}: {e}; series written up to the failing step",
            fmt_num(h)
        ))),
    }
}

// ---------------------------------------------------------------------------
// Serialization helpers.
// ---------------------------------------------------------------------------

/// Shortest string that round-trips the value (17 significant digits never
/// needed more).
fn fmt_num(x: f64) -> String {
    format!("{x}")
}

fn dyadic_csv(table: &ConvergenceTable) -> String {
    let mut out =
        String::from("i,h,e_y,rate_y,e_lambda,rate_lambda,e_hid,rate_hid,e_g,e_H,rate_H\n");
    for row in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            row.i,
            fmt_num(row.h),
            fmt_num(row.metrics.e_y),
            row.rate_y,
            fmt_num(row.metrics.e_lambda),
            row.rate_lambda,
            fmt_num(row.metrics.e_hid),
            row.rate_hid,
            fmt_num(row.metrics.e_g),
            fmt_num(row.metrics.e_h),
            row.rate_h,
        ));
    }
    out
}

fn rate_json(rate: &RateEntry) -> Value {
    match rate {
        RateEntry::None => Value::Null,
        RateEntry::Value(v) => json!(v),
        RateEntry::RoundOff => json!("***"),
    }
}

fn dyadic_row_json(row: &hbvm_core::diagnostics::ConvergenceRow) -> Value {
    json!({
        "i": row.i,
        "h": row.h,
        "n_steps": row.n_steps,
        "e_y": row.metrics.e_y,
        "rate_y": rate_json(&row.rate_y),
        "e_lambda": row.metrics.e_lambda,
        "rate_lambda": rate_json(&row.rate_lambda),
        "e_hid": row.metrics.e_hid,
        "rate_hid": rate_json(&row.rate_hid),
        "e_g": row.metrics.e_g,
        "e_H": row.metrics.e_h,
        "rate_H": rate_json(&row.rate_h),
    })
}

fn config_json(resolved: &ResolvedRun, schedule: Value) -> Value {
    json!({
        "problem": resolved.prob.name,
        "k": resolved.k,
        "s": resolved.s,
        "schedule": schedule,
        "outputs": resolved.out_dir.display().to_string(),
        "reference": {
            "k": resolved.reference.k,
            "s": resolved.reference.s,
            "refinement": resolved.reference.refinement,
        },
        "solver": {
            "stop_tol": resolved.solver.stop_tol,
            "max_iterations": resolved.solver.max_iterations,
            "stagnation_window": resolved.solver.stagnation_window,
        },
        "jobs": resolved.jobs,
    })
}

fn pretty(doc: &Value) -> String {
    let mut text = serde_json::to_string_pretty(doc).expect("JSON serialization cannot fail");
    text.push('\n');
    text
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Run(format!("failed to write {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Problem catalog.
// ---------------------------------------------------------------------------

fn catalog() -> String {
    let mut out = String::new();
    for name in names() {
        let prob = by_name(name).expect("catalog problems must construct");
        out.push_str(&format!(
            "{} m={} ν={} horizon = {} H0 = {}",
            prob.name,
            prob.system.dim(),
            prob.system.num_constraints(),
            fmt_num(prob.default_horizon),
            fmt_num(prob.known.initial_energy),
        ));
        if let Some(period) = prob.known.period {
            out.push_str(&format!(" period = {}", fmt_num(period)));
        }
        if let Some(lambda) = prob.known.constant_lambda {
            out.push_str(&format!(" λ = {}", fmt_num(lambda)));
        }
        out.push('\n');
    }
    out
}
