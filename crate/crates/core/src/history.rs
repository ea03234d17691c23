//! Per-iteration records, terminal status and stopping rules shared by
//! every solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::StateVector;

/// Consecutive non-improving iterations before a run is declared stagnated.
pub const STAGNATION_WINDOW: usize = 50;
/// Relative decrease of the best residual norm that counts as progress.
pub const STAGNATION_FACTOR: f64 = 1.0 - 1e-12;

/// When to stop iterating.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingCriterion {
    /// Converged once `|r_k|_2 <= tol`.
    pub tol: f64,
    pub max_iters: usize,
    /// Abort as diverged once `|r_k|_2` exceeds this.
    pub divergence_cap: f64,
}

impl Default for StoppingCriterion {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            max_iters: 300,
            divergence_cap: 1e8,
        }
    }
}

impl StoppingCriterion {
    pub fn new(tol: f64, max_iters: usize) -> Result<Self> {
        let stop = Self {
            tol,
            max_iters,
            ..Self::default()
        };
        stop.validate()?;
        Ok(stop)
    }

    pub fn with_divergence_cap(mut self, cap: f64) -> Result<Self> {
        self.divergence_cap = cap;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::invalid("tol", "must be positive and finite"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be positive"));
        }
        if !(self.divergence_cap > self.tol) {
            return Err(Error::invalid(
                "divergence_cap",
                "must exceed the convergence tolerance",
            ));
        }
        Ok(())
    }
}

/// How a run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIters,
    Diverged,
    Stagnated,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIters => "max_iters",
            Status::Diverged => "diverged",
            Status::Stagnated => "stagnated",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// State of iteration `k`: the residual norm at `x_k` and the coefficients
/// used to step from `x_k` to `x_{k+1}` (empty for plain fixed-point
/// iteration and for the terminal record).
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub res_norm: f64,
    pub coefficients: Vec<f64>,
    pub sum_abs_beta: f64,
    /// `|b + D beta| / |b|` at the least-squares optimum.
    pub ls_ratio: Option<f64>,
    pub x: Option<StateVector>,
    /// The window was cleared after this step because `sum |beta|`
    /// exceeded the configured guard.
    pub restarted: bool,
}

impl IterationRecord {
    pub fn new(k: usize, res_norm: f64) -> Self {
        Self {
            k,
            res_norm,
            coefficients: Vec::new(),
            sum_abs_beta: 0.0,
            ls_ratio: None,
            x: None,
            restarted: false,
        }
    }

    pub fn with_coefficients(mut self, beta: Vec<f64>, ls_ratio: f64) -> Self {
        self.sum_abs_beta = beta.iter().map(|b| b.abs()).sum();
        self.coefficients = beta;
        self.ls_ratio = Some(ls_ratio);
        self
    }
}

/// Full record of a solve.
#[derive(Clone, Debug)]
pub struct IterationHistory {
    pub records: Vec<IterationRecord>,
    pub status: Status,
    pub g_eval_count: usize,
    /// Last finite iterate reached.
    pub final_x: StateVector,
}

impl IterationHistory {
    /// Number of iterations performed, i.e. the index of the last record.
    pub fn iterations(&self) -> usize {
        self.records.len() - 1
    }

    pub fn res_norms(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.res_norm).collect()
    }

    pub fn final_res_norm(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.res_norm)
    }

    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

/// Tracks the terminal conditions common to all solvers.
#[derive(Debug)]
pub(crate) struct Terminator {
    stop: StoppingCriterion,
    detect_stagnation: bool,
    best: f64,
    since_improvement: usize,
}

impl Terminator {
    pub(crate) fn new(stop: StoppingCriterion, detect_stagnation: bool) -> Self {
        Self {
            stop,
            detect_stagnation,
            best: f64::INFINITY,
            since_improvement: 0,
        }
    }

    /// Checks record `k` with residual norm `res`.
    pub(crate) fn check(&mut self, k: usize, res: f64) -> Option<Status> {
        if res <= self.stop.tol {
            return Some(Status::Converged);
        }
        if !res.is_finite() || res > self.stop.divergence_cap {
            return Some(Status::Diverged);
        }
        if self.detect_stagnation {
            if res < self.best * STAGNATION_FACTOR {
                self.best = res;
                self.since_improvement = 0;
            } else {
                self.since_improvement += 1;
                if self.since_improvement >= STAGNATION_WINDOW {
                    return Some(Status::Stagnated);
                }
            }
        }
        if k >= self.stop.max_iters {
            return Some(Status::MaxIters);
        }
        None
    }

    /// Forgets the stagnation baseline, used after a window restart.
    pub(crate) fn reset_progress(&mut self) {
        self.since_improvement = 0;
    }
}
