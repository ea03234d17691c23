//! Problem abstraction: the residual map `g`, its fixed-point map
//! `q(x) = x - g(x)`, and the vector type iterates live in.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest `|g(x*)|` accepted when registering a known solution.
pub const KNOWN_SOLUTION_TOL: f64 = 1e-12;

/// A finite real vector of fixed length `n >= 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(DVector<f64>);

impl StateVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        Self::from_dvector(DVector::from_vec(entries))
    }

    pub fn from_dvector(v: DVector<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::EmptyVector);
        }
        if !v.iter().all(|e| e.is_finite()) {
            return Err(Error::NonFinite("state vector"));
        }
        Ok(Self(v))
    }

    /// Constant vector `value * 1`.
    pub fn filled(n: usize, value: f64) -> Result<Self> {
        Self::from_dvector(DVector::from_element(n, value))
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::filled(n, 0.0)
    }

    pub fn as_dvector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.iter().copied().collect()
    }
}

impl Deref for StateVector {
    type Target = DVector<f64>;

    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for StateVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

type VectorMap = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
type MatrixMap = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;

/// A nonlinear system `g(x) = 0` on `R^n`, solved through the fixed-point
/// map `q(x) = x - g(x)`.
///
/// Evaluators are pure closures shared behind `Arc`, so a problem can be
/// cloned cheaply and used from concurrent trial runners.
#[derive(Clone)]
pub struct NonlinearProblem {
    name: String,
    dim: usize,
    g: Arc<VectorMap>,
    known_solution: Option<StateVector>,
    q_jacobian: Option<Arc<MatrixMap>>,
}

impl fmt::Debug for NonlinearProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearProblem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("known_solution", &self.known_solution)
            .field("q_jacobian", &self.q_jacobian.is_some())
            .finish()
    }
}

impl NonlinearProblem {
    pub fn new<G>(dim: usize, g: G) -> Result<Self>
    where
        G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(Error::EmptyVector);
        }
        Ok(Self {
            name: String::from("custom"),
            dim,
            g: Arc::new(g),
            known_solution: None,
            q_jacobian: None,
        })
    }

    /// Builds a problem from the fixed-point map `q` directly, setting
    /// `g(x) = x - q(x)`.
    pub fn from_fixed_point_map<Q>(dim: usize, q: Q) -> Result<Self>
    where
        Q: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Self::new(dim, move |x| x - q(x))
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Registers `x*`. Rejected unless `|g(x*)|_2 <= 1e-12`.
    pub fn with_known_solution(mut self, x_star: StateVector) -> Result<Self> {
        let g = self.eval_g(&x_star)?;
        let norm = g.norm();
        if norm > KNOWN_SOLUTION_TOL {
            return Err(Error::NotASolution(norm));
        }
        self.known_solution = Some(x_star);
        Ok(self)
    }

    /// Registers the analytic Jacobian of `q`.
    pub fn with_q_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.q_jacobian = Some(Arc::new(jac));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn known_solution(&self) -> Option<&StateVector> {
        self.known_solution.as_ref()
    }

    pub fn has_q_jacobian(&self) -> bool {
        self.q_jacobian.is_some()
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Evaluates `g(x)`, checking dimension on the way in and out and
    /// rejecting non-finite results.
    pub fn eval_g(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        let g = (self.g)(x);
        if g.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: g.len(),
            });
        }
        if !g.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("residual evaluation"));
        }
        Ok(g)
    }

    /// Evaluates `q(x) = x - g(x)`.
    pub fn eval_q(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(x - self.eval_g(x)?)
    }

    /// Analytic Jacobian of `q` at `x`, if one was registered.
    pub fn q_jacobian(&self, x: &DVector<f64>) -> Option<Result<DMatrix<f64>>> {
        let jac = self.q_jacobian.as_ref()?;
        Some(self.check_dim(x).and_then(|_| {
            let j = jac(x);
            if j.nrows() != self.dim || j.ncols() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    actual: j.nrows().max(j.ncols()),
                });
            }
            if !j.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("jacobian evaluation"));
            }
            Ok(j)
        }))
    }
}

/// Wraps a problem and counts `g` evaluations for cost reporting.
pub(crate) struct CountingEvaluator<'a> {
    problem: &'a NonlinearProblem,
    pub(crate) count: usize,
}

impl<'a> CountingEvaluator<'a> {
    pub(crate) fn new(problem: &'a NonlinearProblem) -> Self {
        Self { problem, count: 0 }
    }

    pub(crate) fn g(&mut self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.count += 1;
        self.problem.eval_g(x)
    }
}

/// The residual `r(x) = g(x) = x - q(x)`.
pub fn residual(problem: &NonlinearProblem, x: &StateVector) -> Result<StateVector> {
    problem.eval_g(x).map(StateVector)
}

/// One plain fixed-point step, `q(x) = x - g(x)`.
pub fn fixed_point_step(problem: &NonlinearProblem, x: &StateVector) -> Result<StateVector> {
    let next = problem.eval_q(x)?;
    StateVector::from_dvector(next)
}
