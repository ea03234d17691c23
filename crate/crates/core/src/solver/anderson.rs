use nalgebra::DVector;

use super::{ls_ratio, SolverConfig, Window};
use crate::error::{Error, Result};
use crate::history::IterationRecord;
use crate::leastsq::{solve_ls, LsSystem};
use crate::problem::{CountingEvaluator, NonlinearProblem};

/// One Anderson-acceleration step from the newest window entry `x_k`:
///
/// ```text
/// x_{k+1} = q(x_k) + sum_i beta_i (q(x_k) - q(x_{k-i}))
/// beta    = argmin | g(x_k) + sum_i beta_i (g(x_k) - g(x_{k-i})) |
/// ```
///
/// The `i = 0` column is identically zero, so a window of `m + 1` entries
/// carries `m` effective differences and `m = 0` reduces to fixed-point
/// iteration. Needs no fresh `g` evaluation.
pub fn anderson_step(
    problem: &NonlinearProblem,
    window: &Window,
    k: usize,
    config: &SolverConfig,
) -> Result<(DVector<f64>, IterationRecord)> {
    step_counted(&mut CountingEvaluator::new(problem), window, k, config)
}

pub(super) fn step_counted(
    _eval: &mut CountingEvaluator<'_>,
    window: &Window,
    k: usize,
    config: &SolverConfig,
) -> Result<(DVector<f64>, IterationRecord)> {
    let current = window
        .newest()
        .ok_or_else(|| Error::MalformedSystem("empty window".into()))?;
    let b = &current.g;
    let b_norm = b.norm();

    let (beta, optimum_norm) = if config.freeze_coefficients {
        (vec![0.0; window.len()], b_norm)
    } else {
        let columns: Vec<DVector<f64>> = window.iter().map(|e| b - &e.g).collect();
        let sol = solve_ls(&LsSystem::new(b.clone(), &columns)?, config.rank_tol)?;
        (sol.beta, sol.optimum_norm)
    };

    let q = &current.q;
    let mut x_next = q.clone();
    for (beta_i, entry) in beta.iter().zip(window.iter()) {
        if *beta_i != 0.0 {
            x_next += (q - &entry.q) * *beta_i;
        }
    }
    let record =
        IterationRecord::new(k, b_norm).with_coefficients(beta, ls_ratio(optimum_norm, b_norm));
    Ok((x_next, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::WindowEntry;

    #[test]
    fn step_at_solution_stays_put() {
        let p = NonlinearProblem::from_fixed_point_map(2, |x| x * 0.5).unwrap();
        let mut w = Window::for_window_size(2);
        for x in [DVector::from_vec(vec![1.0, 1.0]), DVector::zeros(2)] {
            let g = p.eval_g(&x).unwrap();
            w.push(WindowEntry::new(x, g));
        }
        let (x1, _) = anderson_step(&p, &w, 1, &SolverConfig::new(2)).unwrap();
        assert_eq!(x1, DVector::zeros(2));
    }

    #[test]
    fn single_entry_window_is_a_fixed_point_step() {
        let p = NonlinearProblem::from_fixed_point_map(2, |x| x.map(|v| 0.5 * v + 0.1 * v * v))
            .unwrap();
        let x = DVector::from_vec(vec![0.3, -0.2]);
        let mut w = Window::for_window_size(0);
        w.push(WindowEntry::new(x.clone(), p.eval_g(&x).unwrap()));
        let (x1, rec) = anderson_step(&p, &w, 0, &SolverConfig::new(0)).unwrap();
        assert_eq!(rec.coefficients.len(), 1);
        assert!(x1.iter().all(|v| v.is_finite()));
        assert_eq!(x1, p.eval_q(&x).unwrap());
    }

    #[test]
    fn linear_two_dimensional_map_solved_after_window_fills() {
        // For linear q on R^2, AA with two differences is exact.
        let p = NonlinearProblem::from_fixed_point_map(2, |x| {
            DVector::from_vec(vec![
                0.6 * x[0] + 0.2 * x[1] + 1.0,
                -0.1 * x[0] + 0.3 * x[1],
            ])
        })
        .unwrap();
        let mut w = Window::for_window_size(2);
        let mut x = DVector::from_vec(vec![0.0, 0.0]);
        for k in 0..3 {
            let g = p.eval_g(&x).unwrap();
            w.push(WindowEntry::new(x.clone(), g));
            let (next, _) = anderson_step(&p, &w, k, &SolverConfig::new(2)).unwrap();
            x = next;
        }
        assert!(p.eval_g(&x).unwrap().norm() < 1e-12);
    }
}
