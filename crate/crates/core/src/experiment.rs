//! Experiment harness: run specifications, seeded initial-guess sampling,
//! trial-parallel sweeps, side-by-side method comparison and CSV output.
//!
//! Every trial draws from its own ChaCha8 stream selected by
//! `(seed, trial_index)`, so results do not depend on scheduling order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{diagnose, DiagnosticsReport};
use crate::error::{Error, Result};
use crate::history::{IterationHistory, StoppingCriterion};
use crate::problem::{NonlinearProblem, StateVector};
use crate::problems::{contraction_at_solution, ProblemSpec};
use crate::solver::{solve, Method, SolverConfig};

pub const HISTORY_FILE: &str = "history.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const COMPARE_FILE: &str = "compare.csv";

/// Where a trial's initial guess comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum X0Rule {
    Explicit {
        values: Vec<f64>,
    },
    /// `center + radius * y / |y|` with `y` uniform on `(-1, 1)^n`.
    Sphere {
        radius: f64,
        /// One entry is broadcast to every coordinate.
        #[serde(default = "default_center")]
        center: Vec<f64>,
        #[serde(default)]
        seed: u64,
    },
}

fn default_center() -> Vec<f64> {
    vec![0.0]
}

fn default_trials() -> usize {
    1
}

impl X0Rule {
    pub fn validate(&self) -> Result<()> {
        match self {
            X0Rule::Explicit { values } => {
                if values.is_empty() {
                    return Err(Error::invalid("x0", "explicit x0 is empty"));
                }
            }
            X0Rule::Sphere { radius, center, .. } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::invalid("radius", "must be positive and finite"));
                }
                if center.is_empty() || !center.iter().all(|c| c.is_finite()) {
                    return Err(Error::invalid("center", "must be a nonempty finite vector"));
                }
            }
        }
        Ok(())
    }
}

/// Draws the initial guess for `trial_index` in dimension `dim`.
pub fn sample_x0(rule: &X0Rule, dim: usize, trial_index: usize) -> Result<StateVector> {
    rule.validate()?;
    match rule {
        X0Rule::Explicit { values } => {
            if values.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: values.len(),
                });
            }
            StateVector::new(values.clone())
        }
        X0Rule::Sphere {
            radius,
            center,
            seed,
        } => {
            let center_at = |i: usize| -> Result<f64> {
                match center.len() {
                    1 => Ok(center[0]),
                    n if n == dim => Ok(center[i]),
                    n => Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: n,
                    }),
                }
            };
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            rng.set_stream(trial_index as u64);
            let unit = Uniform::new(-1.0f64, 1.0).expect("valid range");
            let y = loop {
                let y: Vec<f64> = (0..dim).map(|_| unit.sample(&mut rng)).collect();
                let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                // (-1, 1) excludes -1; a zero draw has probability zero.
                if norm > 0.0 && y.iter().all(|v| *v > -1.0) {
                    break (y, norm);
                }
            };
            let (y, norm) = y;
            let x = y
                .iter()
                .enumerate()
                .map(|(i, v)| Ok(center_at(i)? + radius * v / norm))
                .collect::<Result<Vec<f64>>>()?;
            StateVector::new(x)
        }
    }
}

/// One experiment: a problem, a method and how to pick initial guesses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub problem: ProblemSpec,
    pub method: Method,
    #[serde(default)]
    pub m: usize,
    pub x0: X0Rule,
    #[serde(default)]
    pub stop: StoppingCriterion,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub beta_guard: Option<f64>,
    /// Output directory.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        self.stop.validate()?;
        self.x0.validate()?;
        if let X0Rule::Explicit { values } = &self.x0 {
            if values.len() != self.problem.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.problem.dim(),
                    actual: values.len(),
                });
            }
        }
        Ok(())
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.m).with_stop(self.stop);
        cfg.beta_guard = self.beta_guard;
        cfg
    }

    /// Column label such as `fp`, `ngmres(2)` or `aa(1)`.
    pub fn label(&self) -> String {
        match self.method {
            Method::Fp => "fp".to_string(),
            m => format!("{}({})", m.as_str(), self.m),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrialResult {
    pub trial: usize,
    pub history: IterationHistory,
    pub report: DiagnosticsReport,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub spec: RunSpec,
    /// `|q'(x*)|` when the problem has a known solution.
    pub contraction: Option<f64>,
    pub trials: Vec<TrialResult>,
}

impl RunOutcome {
    pub fn all_converged(&self) -> bool {
        self.trials.iter().all(|t| t.history.converged())
    }
}

fn solve_trial(
    problem: &NonlinearProblem,
    spec: &RunSpec,
    config: &SolverConfig,
    rho: Option<f64>,
    trial: usize,
) -> Result<TrialResult> {
    let x0 = sample_x0(&spec.x0, problem.dim(), trial)?;
    let history = solve(spec.method, problem, &x0, config)?;
    let report = diagnose(&history, rho)?;
    Ok(TrialResult {
        trial,
        history,
        report,
    })
}

/// Runs every trial of `spec`, in parallel, returning results in trial
/// order. Evaluation failures are errors; divergence is a terminal status.
pub fn run(spec: &RunSpec) -> Result<RunOutcome> {
    spec.validate()?;
    let problem = spec.problem.build()?;
    let config = spec.solver_config();
    let contraction = contraction_at_solution(&problem).ok();
    let rho = contraction.filter(|r| *r > 0.0 && *r < 1.0);
    let trials = (0..spec.trials)
        .into_par_iter()
        .map(|t| solve_trial(&problem, spec, &config, rho, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunOutcome {
        spec: spec.clone(),
        contraction,
        trials,
    })
}

/// Shortest round-trip formatting; `None` renders as an empty field.
fn fmt_num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// Per-iteration rows for every trial, merged in trial order.
pub fn write_history_csv<W: Write>(outcome: &RunOutcome, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "trial",
        "k",
        "res_norm",
        "q_factor",
        "root_factor",
        "sum_abs_beta",
        "ls_ratio",
    ])?;
    for t in &outcome.trials {
        for rec in &t.history.records {
            let factor = |v: &[f64]| rec.k.checked_sub(1).and_then(|i| v.get(i).copied());
            let has_beta = !rec.coefficients.is_empty();
            w.write_record([
                t.trial.to_string(),
                rec.k.to_string(),
                fmt_num(Some(rec.res_norm)),
                fmt_num(factor(&t.report.q_factors)),
                fmt_num(factor(&t.report.root_factors)),
                fmt_num(has_beta.then_some(rec.sum_abs_beta)),
                fmt_num(rec.ls_ratio),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per trial.
pub fn write_summary_csv<W: Write>(outcome: &RunOutcome, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "trial",
        "status",
        "iterations",
        "g_evals",
        "final_res_norm",
        "max_q_factor",
        "final_root_factor",
        "max_sum_abs_beta",
    ])?;
    for t in &outcome.trials {
        let h = &t.history;
        let max_q = t.report.q_factors.iter().copied().reduce(f64::max);
        w.write_record([
            t.trial.to_string(),
            h.status.to_string(),
            h.iterations().to_string(),
            h.g_eval_count.to_string(),
            fmt_num(Some(h.final_res_norm())),
            fmt_num(max_q),
            fmt_num(t.report.root_factors.last().copied()),
            fmt_num(Some(t.report.max_sum_abs_beta)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `history.csv` and `summary.csv` under `dir`.
pub fn write_outputs(outcome: &RunOutcome, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let history = dir.join(HISTORY_FILE);
    let summary = dir.join(SUMMARY_FILE);
    write_history_csv(outcome, fs::File::create(&history)?)?;
    write_summary_csv(outcome, fs::File::create(&summary)?)?;
    Ok((history, summary))
}

/// Residual norms of several methods aligned by iteration index.
#[derive(Clone, Debug, PartialEq)]
pub struct CompareTable {
    pub labels: Vec<String>,
    /// `columns[j][k]` is `|r_k|` of method `j`.
    pub columns: Vec<Vec<f64>>,
    pub statuses: Vec<crate::history::Status>,
}

impl CompareTable {
    pub fn rows(&self) -> usize {
        self.columns.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["k".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for k in 0..self.rows() {
            let mut row = vec![k.to_string()];
            row.extend(self.columns.iter().map(|c| fmt_num(c.get(k).copied())));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the first trial of each spec and aligns their residual histories.
/// All specs must share the problem and the initial-guess rule.
pub fn compare(specs: &[RunSpec]) -> Result<CompareTable> {
    let first = specs
        .first()
        .ok_or_else(|| Error::Incompatible("no specs given".into()))?;
    for s in &specs[1..] {
        if s.problem != first.problem {
            return Err(Error::Incompatible("specs use different problems".into()));
        }
        if s.x0 != first.x0 {
            return Err(Error::Incompatible("specs use different x0 rules".into()));
        }
    }
    let mut labels: Vec<String> = Vec::new();
    let mut columns = Vec::new();
    let mut statuses = Vec::new();
    for spec in specs {
        let single = RunSpec {
            trials: 1,
            ..spec.clone()
        };
        let outcome = run(&single)?;
        let history = &outcome.trials[0].history;
        let mut label = spec.label();
        if labels.contains(&label) {
            label = format!("{label}#{}", labels.len());
        }
        labels.push(label);
        columns.push(history.res_norms());
        statuses.push(history.status);
    }
    Ok(CompareTable {
        labels,
        columns,
        statuses,
    })
}
