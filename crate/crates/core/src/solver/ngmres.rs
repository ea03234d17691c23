use nalgebra::DVector;

use super::{ls_ratio, SolverConfig, Window};
use crate::error::{Error, Result};
use crate::history::IterationRecord;
use crate::leastsq::{beta0_closed_form, solve_ls, LsSystem};
use crate::problem::{CountingEvaluator, NonlinearProblem};

/// One NGMRES step from the newest window entry `x_k`:
///
/// ```text
/// x_{k+1} = q(x_k) + sum_i beta_i (q(x_k) - x_{k-i})
/// beta    = argmin | g(q(x_k)) + sum_i beta_i (g(q(x_k)) - g(x_{k-i})) |
/// ```
///
/// Returns `x_{k+1}` and record `k`. Costs one evaluation of `g`, at
/// `q(x_k)`; window residuals are reused from the cache.
pub fn ngmres_step(
    problem: &NonlinearProblem,
    window: &Window,
    k: usize,
    config: &SolverConfig,
) -> Result<(DVector<f64>, IterationRecord)> {
    step_counted(&mut CountingEvaluator::new(problem), window, k, config)
}

pub(super) fn step_counted(
    eval: &mut CountingEvaluator<'_>,
    window: &Window,
    k: usize,
    config: &SolverConfig,
) -> Result<(DVector<f64>, IterationRecord)> {
    let current = window
        .newest()
        .ok_or_else(|| Error::MalformedSystem("empty window".into()))?;
    let q = &current.q;
    let b = eval.g(q)?;
    let b_norm = b.norm();

    let (beta, optimum_norm) = if config.freeze_coefficients {
        (vec![0.0; window.len()], b_norm)
    } else if window.len() == 1 && config.use_closed_form_when_m0 && config.m == 0 {
        match beta0_closed_form(&b, &current.g) {
            Ok(beta0) => {
                let opt = (&b + (&b - &current.g) * beta0).norm();
                (vec![beta0], opt)
            }
            Err(Error::DegenerateDenominator(_)) => (vec![0.0], b_norm),
            Err(e) => return Err(e),
        }
    } else {
        let columns: Vec<DVector<f64>> = window.iter().map(|e| &b - &e.g).collect();
        let sol = solve_ls(&LsSystem::new(b, &columns)?, config.rank_tol)?;
        (sol.beta, sol.optimum_norm)
    };

    let mut x_next = q.clone();
    for (beta_i, entry) in beta.iter().zip(window.iter()) {
        if *beta_i != 0.0 {
            x_next += (q - &entry.x) * *beta_i;
        }
    }
    let record = IterationRecord::new(k, current.g.norm())
        .with_coefficients(beta, ls_ratio(optimum_norm, b_norm));
    Ok((x_next, record))
}
