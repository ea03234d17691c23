//! Plain fixed-point iteration `x_{k+1} = q(x_k)`, the baseline every
//! accelerated method is compared against.

use crate::error::{Error, Result};
use crate::history::{IterationHistory, IterationRecord, Status, StoppingCriterion, Terminator};
use crate::problem::{CountingEvaluator, NonlinearProblem, StateVector};

pub fn fixed_point_solve(
    problem: &NonlinearProblem,
    x0: &StateVector,
    stop: &StoppingCriterion,
) -> Result<IterationHistory> {
    fixed_point_solve_with(problem, x0, stop, false)
}

/// As [`fixed_point_solve`], optionally storing every iterate in its record.
///
/// Uses one `g` evaluation per iteration: `q(x_k) = x_k - g(x_k)` reuses the
/// residual already computed for the convergence test.
pub fn fixed_point_solve_with(
    problem: &NonlinearProblem,
    x0: &StateVector,
    stop: &StoppingCriterion,
    record_iterates: bool,
) -> Result<IterationHistory> {
    stop.validate()?;
    if x0.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            actual: x0.len(),
        });
    }
    let mut eval = CountingEvaluator::new(problem);
    let mut term = Terminator::new(*stop, false);
    let mut records = Vec::new();

    let mut x = x0.as_dvector().clone();
    let mut g = eval.g(&x)?;
    let mut k = 0;
    let status = loop {
        let res = g.norm();
        let mut rec = IterationRecord::new(k, res);
        if record_iterates {
            rec.x = Some(StateVector::from_dvector(x.clone())?);
        }
        records.push(rec);
        if let Some(status) = term.check(k, res) {
            break status;
        }
        let next = &x - &g;
        match eval.g(&next) {
            Ok(g_next) if next.iter().all(|v| v.is_finite()) && g_next.norm().is_finite() => {
                x = next;
                g = g_next;
                k += 1;
            }
            // The last finite record stays the terminal one.
            _ => break Status::Diverged,
        }
    };

    Ok(IterationHistory {
        records,
        status,
        g_eval_count: eval.count,
        final_x: StateVector::from_dvector(x)?,
    })
}
