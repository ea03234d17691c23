//! Benchmark problems, a central-difference Jacobian oracle, and the
//! spectral norm used to read off local contraction factors.

use std::f64::consts::FRAC_PI_4;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{NonlinearProblem, StateVector};

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-6;
/// Relative stopping tolerance for power iteration.
pub const POWER_ITERATION_TOL: f64 = 1e-10;
pub const POWER_ITERATION_CAP: usize = 10_000;

/// Coefficients of the two-dimensional quadratic map
///
/// ```text
/// q(z1, z2) = [ c1/2 (z1 + z1^2 + z2^2),  c2/2 (z1^2 + z2) ]
/// ```
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadratic2DParams {
    pub c1: f64,
    pub c2: f64,
}

impl Quadratic2DParams {
    /// Contraction factor `|q'(0)| = 2/5`, inside the NGMRES(0) q-linear regime.
    pub const CASE_1: Self = Self {
        c1: 0.8,
        c2: 2.0 / 3.0,
    };
    /// `|q'(0)| = 1/2`.
    pub const CASE_2: Self = Self { c1: 1.0, c2: 1.0 };
    /// `|q'(0)| = 1`: plain fixed-point iteration diverges.
    pub const CASE_3: Self = Self { c1: 1.0, c2: 2.0 };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrigParams {
    /// System size.
    pub s: usize,
}

pub fn make_quadratic_2d(p: Quadratic2DParams) -> Result<NonlinearProblem> {
    let Quadratic2DParams { c1, c2 } = p;
    if !(c1.is_finite() && c2.is_finite()) {
        return Err(Error::invalid("c1/c2", "must be finite"));
    }
    let problem = NonlinearProblem::from_fixed_point_map(2, move |x| {
        let (z1, z2) = (x[0], x[1]);
        DVector::from_vec(vec![
            0.5 * c1 * (z1 + z1 * z1 + z2 * z2),
            0.5 * c2 * (z1 * z1 + z2),
        ])
    })?
    .with_name("quadratic2d")
    .with_q_jacobian(move |x| {
        let (z1, z2) = (x[0], x[1]);
        DMatrix::from_row_slice(2, 2, &[c1 * z1 + 0.5 * c1, c1 * z2, c2 * z1, 0.5 * c2])
    });
    problem.with_known_solution(StateVector::zeros(2)?)
}

/// The calibrated trigonometric system on `R^s`:
///
/// ```text
/// g_i(x) = s - sum_j cos z_j + i (1 - cos z_i) - sin z_i,   i = 1..s
/// g(x)   = (g_i(x) - g_i(x*)) / s,   x* = (pi/4, ..., pi/4)
/// ```
pub fn make_trigonometric(p: TrigParams) -> Result<NonlinearProblem> {
    let s = p.s;
    if s == 0 {
        return Err(Error::invalid("s", "must be at least 1"));
    }
    let sf = s as f64;
    let raw = move |x: &DVector<f64>| -> DVector<f64> {
        let cos_sum: f64 = x.iter().map(|z| z.cos()).sum();
        DVector::from_iterator(
            s,
            x.iter().enumerate().map(|(idx, z)| {
                let i = (idx + 1) as f64;
                sf - cos_sum + i * (1.0 - z.cos()) - z.sin()
            }),
        )
    };
    let x_star = DVector::from_element(s, FRAC_PI_4);
    let offset = raw(&x_star);

    let problem = NonlinearProblem::new(s, move |x| (raw(x) - &offset) / sf)?
        .with_name("trigonometric")
        .with_q_jacobian(move |x| {
            // dg_i/dz_j = (sin z_j + [i == j] (i sin z_i - cos z_i)) / s
            let mut jac = DMatrix::from_fn(s, s, |_, j| -x[j].sin() / sf);
            for idx in 0..s {
                let i = (idx + 1) as f64;
                let z = x[idx];
                jac[(idx, idx)] += 1.0 - (i * z.sin() - z.cos()) / sf;
            }
            jac
        });
    problem.with_known_solution(StateVector::from_dvector(x_star)?)
}

/// Central-difference Jacobian of `q`; column `j` is
/// `(q(x + h e_j) - q(x - h e_j)) / 2h`.
pub fn jacobian_fd(problem: &NonlinearProblem, x: &StateVector, h: f64) -> Result<DMatrix<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("h", "must be positive and finite"));
    }
    let n = problem.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: x.len(),
        });
    }
    let mut jac = DMatrix::zeros(n, n);
    let mut probe = x.as_dvector().clone();
    for j in 0..n {
        let xj = probe[j];
        probe[j] = xj + h;
        let plus = problem.eval_q(&probe)?;
        probe[j] = xj - h;
        let minus = problem.eval_q(&probe)?;
        probe[j] = xj;
        jac.set_column(j, &((plus - minus) / (2.0 * h)));
    }
    Ok(jac)
}

/// Spectral norm by power iteration on `M^T M`.
pub fn operator_norm(m: &DMatrix<f64>) -> Result<f64> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    let n = m.ncols();
    if n == 0 || m.nrows() == 0 {
        return Ok(0.0);
    }
    // Deterministic start with no special alignment to coordinate axes.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.5 / (i + 1) as f64);
    v.normalize_mut();
    let mut sigma = (m * &v).norm();
    if sigma == 0.0 {
        // The start vector lies in the null space; restart from the
        // largest column's coordinate axis.
        let (j, best) = m
            .column_iter()
            .map(|c| c.norm())
            .enumerate()
            .fold((0, 0.0), |a, (i, c)| if c > a.1 { (i, c) } else { a });
        if best == 0.0 {
            return Ok(0.0);
        }
        v = DVector::zeros(n);
        v[j] = 1.0;
        sigma = best;
    }
    // The iterated operator is squared every sweep so nearly equal leading
    // singular values still separate quickly, and the stop test is the
    // eigen-residual, which cannot stall early on a small gap.
    let b = m.transpose() * m;
    let mut p = b.clone();
    for _ in 0..POWER_ITERATION_CAP {
        let w = &p * &v;
        let w_norm = w.norm();
        if w_norm == 0.0 {
            return Ok(sigma);
        }
        v = w / w_norm;
        let bv = &b * &v;
        let theta = v.dot(&bv);
        sigma = theta.max(0.0).sqrt();
        if (bv - &v * theta).norm() <= POWER_ITERATION_TOL * theta {
            return Ok(sigma);
        }
        p = &p * &p;
        let scale = p.amax();
        if scale > 0.0 {
            p /= scale;
        }
    }
    Err(Error::NoConvergence(POWER_ITERATION_CAP))
}

/// `|q'(x*)|_2` from the analytic Jacobian when available, otherwise from
/// central differences.
pub fn contraction_at_solution(problem: &NonlinearProblem) -> Result<f64> {
    let x_star = problem.known_solution().ok_or(Error::MissingSolution)?;
    let jac = match problem.q_jacobian(x_star) {
        Some(j) => j?,
        None => jacobian_fd(problem, x_star, DEFAULT_FD_STEP)?,
    };
    operator_norm(&jac)
}

/// Registry entry: a problem name plus its parameters, as it appears in
/// JSON run configurations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum ProblemSpec {
    Quadratic2d { c1: f64, c2: f64 },
    Trigonometric { s: usize },
}

impl ProblemSpec {
    pub const NAMES: [&'static str; 2] = ["quadratic2d", "trigonometric"];

    /// Resolves a registry name. Missing parameters fall back to the
    /// first benchmark case (`c1 = 4/5, c2 = 2/3`) and `s = 100`.
    pub fn from_name(
        name: &str,
        c1: Option<f64>,
        c2: Option<f64>,
        s: Option<usize>,
    ) -> Result<Self> {
        match name {
            "quadratic2d" => Ok(ProblemSpec::Quadratic2d {
                c1: c1.unwrap_or(Quadratic2DParams::CASE_1.c1),
                c2: c2.unwrap_or(Quadratic2DParams::CASE_1.c2),
            }),
            "trigonometric" => Ok(ProblemSpec::Trigonometric {
                s: s.unwrap_or(100),
            }),
            other => Err(Error::UnknownProblem(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::Quadratic2d { .. } => "quadratic2d",
            ProblemSpec::Trigonometric { .. } => "trigonometric",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ProblemSpec::Quadratic2d { .. } => 2,
            ProblemSpec::Trigonometric { s } => *s,
        }
    }

    pub fn build(&self) -> Result<NonlinearProblem> {
        match *self {
            ProblemSpec::Quadratic2d { c1, c2 } => make_quadratic_2d(Quadratic2DParams { c1, c2 }),
            ProblemSpec::Trigonometric { s } => make_trigonometric(TrigParams { s }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{fixed_point_step, residual};
    use approx::assert_relative_eq;

    fn sv(v: &[f64]) -> StateVector {
        StateVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn quadratic_residual_and_step_examples() {
        let p = make_quadratic_2d(Quadratic2DParams { c1: 1.0, c2: 1.0 }).unwrap();
        assert_eq!(
            residual(&p, &sv(&[0.0, 0.0])).unwrap().to_vec(),
            vec![0.0, 0.0]
        );
        assert_eq!(
            residual(&p, &sv(&[1.0, 1.0])).unwrap().to_vec(),
            vec![-0.5, 0.0]
        );
        assert_eq!(
            fixed_point_step(&p, &sv(&[1.0, 1.0])).unwrap().to_vec(),
            vec![1.5, 1.0]
        );

        let p = make_quadratic_2d(Quadratic2DParams::CASE_1).unwrap();
        let q = fixed_point_step(&p, &sv(&[0.1, 0.0])).unwrap();
        assert_relative_eq!(q[0], 0.044, epsilon = 1e-15);
        assert_relative_eq!(q[1], 0.01 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn quadratic_rejects_non_finite_params() {
        assert!(make_quadratic_2d(Quadratic2DParams {
            c1: f64::NAN,
            c2: 1.0
        })
        .is_err());
    }

    #[test]
    fn contraction_factors_of_the_three_cases() {
        let cases = [
            (Quadratic2DParams::CASE_1, 0.4),
            (Quadratic2DParams::CASE_2, 0.5),
            (Quadratic2DParams::CASE_3, 1.0),
        ];
        for (params, expected) in cases {
            let p = make_quadratic_2d(params).unwrap();
            assert_relative_eq!(
                contraction_at_solution(&p).unwrap(),
                expected,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn trig_solution_is_exact_root() {
        for s in [1, 5, 100] {
            let p = make_trigonometric(TrigParams { s }).unwrap();
            let r = residual(&p, p.known_solution().unwrap()).unwrap();
            assert!(r.amax() <= 1e-14);
        }
        assert!(make_trigonometric(TrigParams { s: 0 }).is_err());
    }

    #[test]
    fn trig_single_variable_closed_form() {
        let p = make_trigonometric(TrigParams { s: 1 }).unwrap();
        let half_sqrt2 = 2f64.sqrt() / 2.0;
        for z in [-1.0, 0.0, 0.3, 2.0] {
            let expected = 2.0 - 2.0 * f64::cos(z) - f64::sin(z) - (2.0 - 3.0 * half_sqrt2);
            let got = residual(&p, &sv(&[z])).unwrap()[0];
            assert_relative_eq!(got, expected, epsilon = 1e-14);
        }
        let at_star = 2.0 - 2.0 * FRAC_PI_4.cos() - FRAC_PI_4.sin() - (2.0 - 3.0 * half_sqrt2);
        assert!(at_star.abs() < 1e-15);
    }

    #[test]
    fn fd_recovers_quadratic_jacobian_at_origin() {
        let p = make_quadratic_2d(Quadratic2DParams { c1: 1.0, c2: 1.0 }).unwrap();
        let j = jacobian_fd(&p, &sv(&[0.0, 0.0]), 1e-6).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]);
        assert!((j - expected).amax() <= 1e-8);
    }

    #[test]
    fn fd_exact_for_linear_maps() {
        let a = DMatrix::from_row_slice(3, 3, &[0.3, -1.2, 0.7, 2.1, 0.05, -0.4, -0.9, 1.6, 0.2]);
        let a2 = a.clone();
        let p = NonlinearProblem::from_fixed_point_map(3, move |x| &a2 * x).unwrap();
        let j = jacobian_fd(&p, &sv(&[0.04, -0.01, 0.025]), 1e-6).unwrap();
        assert!((j - a).amax() <= 1e-10);
    }

    #[test]
    fn fd_matches_hand_derived_trig_jacobian() {
        let s = 5;
        let p = make_trigonometric(TrigParams { s }).unwrap();
        let x = sv(&[0.80, 0.75, 0.79, 0.70, 0.85]);
        // Independent hand derivation: q' = I - g', g'_{ij} = (sin z_j + d_ij (i sin z_i - cos z_i)) / s.
        let expected = DMatrix::from_fn(s, s, |i, j| {
            let mut g = x[j].sin();
            if i == j {
                g += (i + 1) as f64 * x[i].sin() - x[i].cos();
            }
            (if i == j { 1.0 } else { 0.0 }) - g / s as f64
        });
        let fd = jacobian_fd(&p, &x, 1e-6).unwrap();
        assert!((&fd - &expected).amax() <= 1e-6);
        let analytic = p.q_jacobian(&x).unwrap().unwrap();
        assert!((&analytic - &expected).amax() <= 1e-14);
    }

    #[test]
    fn fd_rejects_bad_step() {
        let p = make_quadratic_2d(Quadratic2DParams::CASE_1).unwrap();
        assert!(jacobian_fd(&p, &sv(&[0.0, 0.0]), 0.0).is_err());
    }

    #[test]
    fn operator_norm_examples() {
        assert_relative_eq!(
            operator_norm(&DMatrix::identity(2, 2)).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![0.4, 1.0 / 3.0]));
        assert_relative_eq!(operator_norm(&d).unwrap(), 0.4, epsilon = 1e-10);
        assert_eq!(operator_norm(&DMatrix::zeros(3, 3)).unwrap(), 0.0);
        // Start vector orthogonal to the range of M^T.
        let m = DMatrix::from_row_slice(2, 2, &[1.5, -1.0, 0.0, 0.0]);
        assert_relative_eq!(
            operator_norm(&m).unwrap(),
            (1.5f64 * 1.5 + 1.0).sqrt(),
            epsilon = 1e-10
        );
        assert!(operator_norm(&DMatrix::from_element(1, 1, f64::NAN)).is_err());
    }

    #[test]
    fn operator_norm_nearly_equal_singular_values() {
        for second in [0.9, 0.999, 0.99999, -0.9999999, 1.0] {
            let d = DMatrix::from_diagonal(&DVector::from_vec(vec![second, 1.0, 0.3]));
            assert_relative_eq!(operator_norm(&d).unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn operator_norm_agrees_with_svd() {
        let m = DMatrix::from_fn(6, 4, |i, j| {
            ((i * 7 + j * 3) % 5) as f64 - 1.7 + 0.1 * i as f64
        });
        let svd_max = m.clone().svd(false, false).singular_values.max();
        assert_relative_eq!(operator_norm(&m).unwrap(), svd_max, max_relative = 1e-9);
    }

    #[test]
    fn registry_round_trip() {
        let spec: ProblemSpec =
            serde_json::from_str(r#"{"name":"quadratic2d","c1":1.0,"c2":2.0}"#).unwrap();
        assert_eq!(spec, ProblemSpec::Quadratic2d { c1: 1.0, c2: 2.0 });
        let spec: ProblemSpec = serde_json::from_str(r#"{"name":"trigonometric","s":7}"#).unwrap();
        assert_eq!(spec.build().unwrap().dim(), 7);
        assert!(ProblemSpec::from_name("rosenbrock", None, None, None).is_err());
        assert_eq!(
            ProblemSpec::from_name("trigonometric", None, None, None).unwrap(),
            ProblemSpec::Trigonometric { s: 100 }
        );
    }
}
