//! `ngmres`: single solves, seeded sweeps, method comparisons and
//! diagnostics reports for the benchmark problems.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 when a
//! problem evaluation fails. Divergence and stagnation are ordinary outcomes.

use std::f64::consts::FRAC_PI_4;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ngmres::experiment::{write_history_csv, write_outputs, write_summary_csv, COMPARE_FILE};
use ngmres::{
    compare, diagnose, run, Error, Method, ProblemSpec, RunSpec, StoppingCriterion, X0Rule,
};

const DIAGNOSTICS_FILE: &str = "diagnostics.json";

#[derive(Parser, Debug)]
#[command(name = "ngmres", version, about = "Nonlinear GMRES experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve from one initial guess.
    Solve(RunArgs),
    /// Solve from many sampled initial guesses.
    Sweep(RunArgs),
    /// Run several methods from the same initial guess and align their histories.
    Compare(RunArgs),
    /// Solve once and report convergence factors and coefficient monitors as JSON.
    Diagnose {
        #[command(flatten)]
        run: RunArgs,
        /// Contraction factor for the q-factor bound; defaults to |q'(x*)|.
        #[arg(long)]
        rho: Option<f64>,
    },
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// JSON run specification; flags given alongside it take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem name: quadratic2d or trigonometric.
    #[arg(long)]
    problem: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    c1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    c2: Option<f64>,
    /// Size of the trigonometric system.
    #[arg(long)]
    s: Option<usize>,
    /// fp, ngmres or aa. `compare` accepts it repeatedly.
    #[arg(long)]
    method: Vec<Method>,
    /// Window size. `compare` pairs repeated values with `--method`.
    #[arg(long)]
    m: Vec<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Safeguard: restart the window when sum |beta| exceeds this.
    #[arg(long)]
    beta_guard: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Explicit initial guess, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    x0: Option<Vec<f64>>,
    /// Sample initial guesses on the sphere of this radius.
    #[arg(long)]
    radius: Option<f64>,
    /// Sphere center, comma separated; one value is broadcast.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    center: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Evaluation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite(_)
            | Error::NotASolution(_)
            | Error::DegenerateDenominator(_)
            | Error::MalformedSystem(_)
            | Error::NoConvergence(_)
            | Error::MissingSolution
            | Error::InsufficientHistory { .. } => Failure::Evaluation(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn load_config(path: &Path) -> CliResult<RunSpec> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
}

fn default_x0(problem: &ProblemSpec, seed: u64) -> X0Rule {
    match problem {
        ProblemSpec::Quadratic2d { .. } => X0Rule::Explicit {
            values: vec![-0.25, 0.25],
        },
        ProblemSpec::Trigonometric { .. } => X0Rule::Sphere {
            radius: 0.1,
            center: vec![FRAC_PI_4],
            seed,
        },
    }
}

fn resolve_problem(args: &RunArgs, base: Option<ProblemSpec>) -> CliResult<ProblemSpec> {
    let problem = match (&args.problem, base) {
        (Some(name), _) => ProblemSpec::from_name(name, args.c1, args.c2, args.s)?,
        (None, Some(ProblemSpec::Quadratic2d { c1, c2 })) => ProblemSpec::Quadratic2d {
            c1: args.c1.unwrap_or(c1),
            c2: args.c2.unwrap_or(c2),
        },
        (None, Some(ProblemSpec::Trigonometric { s })) => ProblemSpec::Trigonometric {
            s: args.s.unwrap_or(s),
        },
        (None, None) => ProblemSpec::from_name("quadratic2d", args.c1, args.c2, args.s)?,
    };
    let mismatched = match problem {
        ProblemSpec::Quadratic2d { .. } => args.s.is_some(),
        ProblemSpec::Trigonometric { .. } => args.c1.is_some() || args.c2.is_some(),
    };
    if mismatched {
        return Err(usage(format!(
            "parameter does not apply to {}",
            problem.name()
        )));
    }
    Ok(problem)
}

fn resolve_x0(args: &RunArgs, base: Option<X0Rule>, problem: &ProblemSpec) -> CliResult<X0Rule> {
    if let Some(values) = &args.x0 {
        if args.radius.is_some() || args.center.is_some() {
            return Err(usage("--x0 cannot be combined with --radius or --center"));
        }
        return Ok(X0Rule::Explicit {
            values: values.clone(),
        });
    }
    let base = base.unwrap_or_else(|| default_x0(problem, 0));
    let sampling = args.radius.is_some() || args.center.is_some() || args.seed.is_some();
    Ok(match base {
        X0Rule::Sphere {
            radius,
            center,
            seed,
        } => X0Rule::Sphere {
            radius: args.radius.unwrap_or(radius),
            center: args.center.clone().unwrap_or(center),
            seed: args.seed.unwrap_or(seed),
        },
        explicit if !sampling => explicit,
        _ => X0Rule::Sphere {
            radius: args
                .radius
                .ok_or_else(|| usage("sampling initial guesses requires --radius"))?,
            center: args.center.clone().unwrap_or_else(|| vec![0.0]),
            seed: args.seed.unwrap_or(0),
        },
    })
}

/// Merges the optional config file with the flags into one spec per method.
fn resolve_specs(args: &RunArgs) -> CliResult<Vec<RunSpec>> {
    let base = args.config.as_deref().map(load_config).transpose()?;
    let problem = resolve_problem(args, base.as_ref().map(|b| b.problem))?;
    let x0 = resolve_x0(args, base.as_ref().map(|b| b.x0.clone()), &problem)?;
    let base_stop = base.as_ref().map(|b| b.stop).unwrap_or_default();
    let stop = StoppingCriterion {
        tol: args.tol.unwrap_or(base_stop.tol),
        max_iters: args.max_iters.unwrap_or(base_stop.max_iters),
        ..base_stop
    };
    let trials = args.trials.or(base.as_ref().map(|b| b.trials)).unwrap_or(1);
    let beta_guard = args.beta_guard.or(base.as_ref().and_then(|b| b.beta_guard));
    let output = args
        .out
        .clone()
        .or(base.as_ref().and_then(|b| b.output.clone()));

    let methods = match (&args.method[..], &base) {
        ([], Some(b)) => vec![b.method],
        ([], None) => vec![Method::Ngmres],
        (ms, _) => ms.to_vec(),
    };
    let windows = match (&args.m[..], &base) {
        ([], Some(b)) => vec![b.m],
        ([], None) => vec![0],
        (ms, _) => ms.to_vec(),
    };
    let (methods, windows) = match (methods.len(), windows.len()) {
        (a, b) if a == b => (methods, windows),
        (_, 1) => (methods.clone(), vec![windows[0]; methods.len()]),
        (1, b) => (vec![methods[0]; b], windows),
        _ => return Err(usage("--m must be given once or once per --method")),
    };

    let specs = methods
        .into_iter()
        .zip(windows)
        .map(|(method, m)| RunSpec {
            problem,
            method,
            m,
            x0: x0.clone(),
            stop,
            trials,
            beta_guard,
            output: output.clone(),
        })
        .collect::<Vec<_>>();
    for s in &specs {
        s.validate()?;
    }
    Ok(specs)
}

fn single_spec(args: &RunArgs) -> CliResult<RunSpec> {
    let mut specs = resolve_specs(args)?;
    if specs.len() != 1 {
        return Err(usage(
            "this command takes a single --method; use `compare` for several",
        ));
    }
    Ok(specs.remove(0))
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    usage(format!("cannot write {}: {e}", path.display()))
}

fn cmd_run(args: &RunArgs, one_trial: bool) -> CliResult<()> {
    let mut spec = single_spec(args)?;
    if one_trial {
        spec.trials = 1;
    }
    let outcome = run(&spec)?;
    match &spec.output {
        Some(dir) => {
            let (history, summary) =
                write_outputs(&outcome, dir).map_err(|e| io_failure(dir, e))?;
            println!("{}", history.display());
            println!("{}", summary.display());
        }
        None => {
            if one_trial {
                write_history_csv(&outcome, io::stdout().lock())?;
            } else {
                write_summary_csv(&outcome, io::stdout().lock())?;
            }
        }
    }
    Ok(())
}

fn cmd_compare(args: &RunArgs) -> CliResult<()> {
    let specs = resolve_specs(args)?;
    let table = compare(&specs)?;
    match &specs[0].output {
        Some(dir) => {
            let path = dir.join(COMPARE_FILE);
            fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
            let file = fs::File::create(&path).map_err(|e| io_failure(&path, e))?;
            table.write_csv(file)?;
            println!("{}", path.display());
        }
        None => table.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_diagnose(args: &RunArgs, rho: Option<f64>) -> CliResult<()> {
    let mut spec = single_spec(args)?;
    spec.trials = 1;
    let outcome = run(&spec)?;
    let trial = &outcome.trials[0];
    let report = match rho {
        Some(r) => diagnose(&trial.history, Some(r))?,
        None => trial.report.clone(),
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Some(dir) = &spec.output {
        let path = dir.join(DIAGNOSTICS_FILE);
        fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
        fs::write(&path, format!("{json}\n")).map_err(|e| io_failure(&path, e))?;
    }
    let mut out = io::stdout().lock();
    writeln!(out, "{json}").map_err(|e| usage(e.to_string()))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Solve(args) => cmd_run(args, true),
        Command::Sweep(args) => cmd_run(args, false),
        Command::Compare(args) => cmd_compare(args),
        Command::Diagnose { run, rho } => cmd_diagnose(run, *rho),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Evaluation(msg)) => {
            eprintln!("evaluation failed: {msg}");
            ExitCode::from(2)
        }
    }
}
