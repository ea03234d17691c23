//! NGMRES(m), its single-column fast path, and the Anderson-acceleration
//! comparator. Both accelerators share one driver loop; they differ only in
//! how a step builds its least-squares system and combines the window.

mod anderson;
mod ngmres;
mod window;

use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use anderson::anderson_step;
pub use ngmres::ngmres_step;
pub use window::{Window, WindowEntry};

use crate::error::{Error, Result};
use crate::fixed_point::fixed_point_solve_with;
use crate::history::{IterationHistory, IterationRecord, Status, StoppingCriterion, Terminator};
use crate::leastsq::DEFAULT_RANK_TOL;
use crate::problem::{CountingEvaluator, NonlinearProblem, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Plain fixed-point iteration.
    Fp,
    Ngmres,
    /// Anderson acceleration.
    Aa,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Fp => "fp",
            Method::Ngmres => "ngmres",
            Method::Aa => "aa",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fp" => Ok(Method::Fp),
            "ngmres" => Ok(Method::Ngmres),
            "aa" | "anderson" => Ok(Method::Aa),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Window size; the window holds up to `m + 1` iterates.
    pub m: usize,
    pub stop: StoppingCriterion,
    pub rank_tol: f64,
    /// Restart threshold on `sum |beta|`. `None` only monitors.
    pub beta_guard: Option<f64>,
    /// Use the closed-form coefficient when `m == 0` (NGMRES only).
    pub use_closed_form_when_m0: bool,
    /// Store `x_k` in every record.
    pub record_iterates: bool,
    /// Pin every coefficient to zero, which reduces either accelerator to
    /// plain fixed-point iteration. Diagnostic use only.
    pub freeze_coefficients: bool,
}

impl SolverConfig {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            stop: StoppingCriterion::default(),
            rank_tol: DEFAULT_RANK_TOL,
            beta_guard: None,
            use_closed_form_when_m0: true,
            record_iterates: false,
            freeze_coefficients: false,
        }
    }

    pub fn with_stop(mut self, stop: StoppingCriterion) -> Self {
        self.stop = stop;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.stop.validate()?;
        if !(self.rank_tol > 0.0 && self.rank_tol.is_finite()) {
            return Err(Error::invalid("rank_tol", "must be positive and finite"));
        }
        if let Some(guard) = self.beta_guard {
            if !(guard > 0.0) {
                return Err(Error::invalid("beta_guard", "must be positive"));
            }
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::new(0)
    }
}

/// Counted evaluation failures that end a run as diverged rather than
/// propagating as errors.
fn is_divergence(e: &Error) -> bool {
    matches!(e, Error::NonFinite(_))
}

type StepFn = fn(
    &mut CountingEvaluator<'_>,
    &Window,
    usize,
    &SolverConfig,
) -> Result<(DVector<f64>, IterationRecord)>;

fn accelerated_solve(
    problem: &NonlinearProblem,
    x0: &StateVector,
    config: &SolverConfig,
    step: StepFn,
) -> Result<IterationHistory> {
    config.validate()?;
    if x0.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            actual: x0.len(),
        });
    }
    let mut eval = CountingEvaluator::new(problem);
    let mut term = Terminator::new(config.stop, true);
    let mut window = Window::for_window_size(config.m);
    let mut records = Vec::new();

    let x_init = x0.as_dvector().clone();
    let g_init = eval.g(&x_init)?;
    window.push(WindowEntry::new(x_init, g_init));

    let mut k = 0;
    let status = loop {
        let current = window.newest().expect("window holds the current iterate");
        let res = current.g.norm();
        let snapshot = if config.record_iterates {
            Some(StateVector::from_dvector(current.x.clone())?)
        } else {
            None
        };
        let bare = |k| IterationRecord {
            x: snapshot.clone(),
            ..IterationRecord::new(k, res)
        };

        if let Some(status) = term.check(k, res) {
            records.push(bare(k));
            break status;
        }

        let (x_next, mut rec) = match step(&mut eval, &window, k, config) {
            Ok(out) => out,
            Err(e) if is_divergence(&e) => {
                records.push(bare(k));
                break Status::Diverged;
            }
            Err(e) => return Err(e),
        };
        rec.x = snapshot.clone();

        let g_next = match eval.g(&x_next) {
            Ok(g) if x_next.iter().all(|v| v.is_finite()) && g.norm().is_finite() => g,
            Ok(_) => {
                records.push(rec);
                break Status::Diverged;
            }
            Err(e) if is_divergence(&e) => {
                records.push(rec);
                break Status::Diverged;
            }
            Err(e) => return Err(e),
        };

        if let Some(guard) = config.beta_guard {
            if rec.sum_abs_beta > guard {
                window.clear();
                rec.restarted = true;
                term.reset_progress();
            }
        }
        records.push(rec);
        window.push(WindowEntry::new(x_next, g_next));
        k += 1;
    };

    let final_x = window
        .newest()
        .map(|e| e.x.clone())
        .expect("window holds the current iterate");
    Ok(IterationHistory {
        records,
        status,
        g_eval_count: eval.count,
        final_x: StateVector::from_dvector(final_x)?,
    })
}

/// Runs NGMRES(`config.m`) from `x0`.
pub fn ngmres_solve(
    problem: &NonlinearProblem,
    x0: &StateVector,
    config: &SolverConfig,
) -> Result<IterationHistory> {
    accelerated_solve(problem, x0, config, ngmres::step_counted)
}

/// Runs Anderson acceleration with window `config.m` from `x0`.
pub fn anderson_solve(
    problem: &NonlinearProblem,
    x0: &StateVector,
    config: &SolverConfig,
) -> Result<IterationHistory> {
    accelerated_solve(problem, x0, config, anderson::step_counted)
}

/// Dispatches on `method`; `Fp` ignores everything but the stopping rule
/// and `record_iterates`.
pub fn solve(
    method: Method,
    problem: &NonlinearProblem,
    x0: &StateVector,
    config: &SolverConfig,
) -> Result<IterationHistory> {
    match method {
        Method::Fp => fixed_point_solve_with(problem, x0, &config.stop, config.record_iterates),
        Method::Ngmres => ngmres_solve(problem, x0, config),
        Method::Aa => anderson_solve(problem, x0, config),
    }
}

/// `|b + D beta| / |b|`, defined as 1 when `b = 0`.
pub(crate) fn ls_ratio(optimum_norm: f64, rhs_norm: f64) -> f64 {
    if rhs_norm == 0.0 {
        1.0
    } else {
        optimum_norm / rhs_norm
    }
}
