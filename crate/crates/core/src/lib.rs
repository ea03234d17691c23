//! Windowed nonlinear GMRES, NGMRES(m), for accelerating fixed-point
//! iterations `x_{k+1} = q(x_k)` with `q(x) = x - g(x)`.
//!
//! Each NGMRES step combines `q(x_k)` with the last `min(k, m) + 1`
//! iterates,
//!
//! ```text
//! x_{k+1} = q(x_k) + sum_i beta_i (q(x_k) - x_{k-i}),
//! ```
//!
//! choosing `beta` to minimize `|g(q(x_k)) + sum_i beta_i (g(q(x_k)) - g(x_{k-i}))|_2`.
//!
//! The crate provides:
//!
//! * [`problem`] and [`fixed_point`]: the problem abstraction and the plain
//!   fixed-point baseline.
//! * [`leastsq`]: the rank-aware coefficient solver and the `m = 0` closed form.
//! * [`solver`]: NGMRES(m) and an Anderson-acceleration comparator.
//! * [`problems`]: benchmark systems, a finite-difference Jacobian and a
//!   power-iteration spectral norm.
//! * [`diagnostics`]: convergence factors, the NGMRES(0) q-factor bound and
//!   coefficient monitors.
//! * [`experiment`]: seeded sweeps, comparisons and CSV output used by the
//!   `ngmres` command-line tool.
//!
//! ```
//! use ngmres::{make_quadratic_2d, ngmres_solve, Quadratic2DParams, SolverConfig, StateVector};
//!
//! let problem = make_quadratic_2d(Quadratic2DParams::CASE_1).unwrap();
//! let x0 = StateVector::new(vec![-0.25, 0.25]).unwrap();
//! let history = ngmres_solve(&problem, &x0, &SolverConfig::new(0)).unwrap();
//! assert!(history.converged());
//! ```

pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod fixed_point;
pub mod history;
pub mod leastsq;
pub mod problem;
pub mod problems;
pub mod solver;

pub use diagnostics::{
    assumption_monitor, diagnose, eta_bound, lemma_sandwich_check, q_factors, root_factors,
    DiagnosticsReport, EtaBound,
};
pub use error::{Error, Result};
pub use experiment::{compare, run, sample_x0, CompareTable, RunOutcome, RunSpec, X0Rule};
pub use fixed_point::{fixed_point_solve, fixed_point_solve_with};
pub use history::{IterationHistory, IterationRecord, Status, StoppingCriterion};
pub use leastsq::{beta0_closed_form, solve_ls, LsSolution, LsSystem};
pub use problem::{fixed_point_step, residual, NonlinearProblem, StateVector};
pub use problems::{
    jacobian_fd, make_quadratic_2d, make_trigonometric, operator_norm, ProblemSpec,
    Quadratic2DParams, TrigParams,
};
pub use solver::{
    anderson_solve, anderson_step, ngmres_solve, ngmres_step, solve, Method, SolverConfig, Window,
    WindowEntry,
};
