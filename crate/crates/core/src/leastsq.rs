//! Dense least-squares kernel for the per-step coefficient problem
//!
//! ```text
//! min_beta | b + D beta |_2
//! ```
//!
//! solved through a column-pivoted Householder QR with rank truncation,
//! followed by a second orthogonal factorization of the retained rows so
//! that rank-deficient systems return the minimum-norm minimizer (a
//! complete orthogonal decomposition). Also holds the closed form for the
//! single-column case.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default relative column-norm threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;
/// Relative zero test for the closed-form denominator, scaled by
/// `|rq| + |r|`.
pub const DEGENERATE_REL_TOL: f64 = 1e-14;

/// Right-hand side `b` and the columns of `D`.
#[derive(Clone, Debug, PartialEq)]
pub struct LsSystem {
    rhs: DVector<f64>,
    columns: DMatrix<f64>,
}

impl LsSystem {
    pub fn new(rhs: DVector<f64>, columns: &[DVector<f64>]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::MalformedSystem(
                "at least one column required".into(),
            ));
        }
        if let Some(bad) = columns.iter().find(|c| c.len() != rhs.len()) {
            return Err(Error::DimensionMismatch {
                expected: rhs.len(),
                actual: bad.len(),
            });
        }
        Self::from_matrix(rhs, DMatrix::from_columns(columns))
    }

    pub fn from_matrix(rhs: DVector<f64>, columns: DMatrix<f64>) -> Result<Self> {
        if rhs.is_empty() {
            return Err(Error::EmptyVector);
        }
        if columns.ncols() == 0 {
            return Err(Error::MalformedSystem(
                "at least one column required".into(),
            ));
        }
        if columns.nrows() != rhs.len() {
            return Err(Error::DimensionMismatch {
                expected: rhs.len(),
                actual: columns.nrows(),
            });
        }
        if !rhs.iter().chain(columns.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("least-squares system"));
        }
        Ok(Self { rhs, columns })
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.rhs
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn ncols(&self) -> usize {
        self.columns.ncols()
    }

    /// `|b + D beta|_2`.
    pub fn residual_norm(&self, beta: &[f64]) -> f64 {
        let beta = DVector::from_column_slice(beta);
        (&self.rhs + &self.columns * beta).norm()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LsSolution {
    pub beta: Vec<f64>,
    /// `|b + D beta|_2`, recomputed from `beta`.
    pub optimum_norm: f64,
    pub rank: usize,
}

/// A Householder reflector `I - tau v v^T` acting on rows `offset..`.
struct Reflector {
    offset: usize,
    v: DVector<f64>,
    tau: f64,
}

impl Reflector {
    /// Builds the reflector mapping `x` onto `alpha e_1`, returning it with
    /// `alpha`. `x` must be nonzero.
    fn annihilate(offset: usize, x: DVector<f64>) -> (Self, f64) {
        let norm = x.norm();
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x;
        v[0] -= alpha;
        let vtv = v.norm_squared();
        let tau = if vtv == 0.0 { 0.0 } else { 2.0 / vtv };
        (Self { offset, v, tau }, alpha)
    }

    fn apply_to_column(&self, m: &mut DMatrix<f64>, col: usize) {
        let len = self.v.len();
        let mut dot = 0.0;
        for i in 0..len {
            dot += self.v[i] * m[(self.offset + i, col)];
        }
        let s = self.tau * dot;
        for i in 0..len {
            m[(self.offset + i, col)] -= s * self.v[i];
        }
    }

    fn apply_to_vector(&self, x: &mut DVector<f64>) {
        let seg = x.rows(self.offset, self.v.len());
        let s = self.tau * self.v.dot(&seg);
        x.rows_mut(self.offset, self.v.len()).axpy(-s, &self.v, 1.0);
    }
}

/// Householder QR of `a` without pivoting, in place: on return the upper
/// triangle of the leading `ncols` rows holds `R`. Requires
/// `nrows >= ncols` and full column rank.
fn householder_qr(a: &mut DMatrix<f64>) -> Vec<Reflector> {
    let (rows, cols) = a.shape();
    let mut reflectors = Vec::with_capacity(cols);
    for j in 0..cols.min(rows) {
        let x = a.view((j, j), (rows - j, 1)).column(0).into_owned();
        if x.norm() == 0.0 {
            continue;
        }
        let (h, alpha) = Reflector::annihilate(j, x);
        for c in (j + 1)..cols {
            h.apply_to_column(a, c);
        }
        a[(j, j)] = alpha;
        for i in (j + 1)..rows {
            a[(i, j)] = 0.0;
        }
        reflectors.push(h);
    }
    reflectors
}

/// Solves `min |b + D beta|_2`, returning the minimum-norm minimizer.
///
/// Column `j` of the pivoted factorization is retained while its remaining
/// norm exceeds `rank_tol * max_i |D e_i|`; a zero `D` has rank 0 and
/// yields `beta = 0`.
pub fn solve_ls(system: &LsSystem, rank_tol: f64) -> Result<LsSolution> {
    if !(rank_tol > 0.0 && rank_tol.is_finite()) {
        return Err(Error::invalid("rank_tol", "must be positive and finite"));
    }
    let b = &system.rhs;
    let d = &system.columns;
    let (rows, cols) = d.shape();

    let max_col_norm = d.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let threshold = rank_tol * max_col_norm;

    let mut a = d.clone();
    let mut qtb = b.clone();
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut rank = 0;

    if max_col_norm > 0.0 {
        for j in 0..rows.min(cols) {
            let (pivot, pivot_norm) = (j..cols)
                .map(|c| (c, a.view((j, c), (rows - j, 1)).norm()))
                .fold(
                    (j, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
            if pivot_norm <= threshold {
                break;
            }
            if pivot != j {
                a.swap_columns(j, pivot);
                perm.swap(j, pivot);
            }
            let x = a.view((j, j), (rows - j, 1)).column(0).into_owned();
            let (h, alpha) = Reflector::annihilate(j, x);
            for c in (j + 1)..cols {
                h.apply_to_column(&mut a, c);
            }
            h.apply_to_vector(&mut qtb);
            a[(j, j)] = alpha;
            for i in (j + 1)..rows {
                a[(i, j)] = 0.0;
            }
            rank = j + 1;
        }
    }

    let mut beta = vec![0.0; cols];
    if rank > 0 {
        // [R11 R12] y = -c1 has the minimum-norm solution y = Z1 w where
        // [R11 R12]^T = Z [S; 0] and S^T w = -c1.
        let mut t = a.view((0, 0), (rank, cols)).transpose();
        let reflectors = householder_qr(&mut t);
        let mut w = DVector::zeros(cols);
        for i in 0..rank {
            let mut acc = -qtb[i];
            for l in 0..i {
                acc -= t[(l, i)] * w[l];
            }
            w[i] = acc / t[(i, i)];
        }
        for h in reflectors.iter().rev() {
            h.apply_to_vector(&mut w);
        }
        for (i, &p) in perm.iter().enumerate() {
            beta[p] = w[i];
        }
    }

    let mut optimum_norm = system.residual_norm(&beta);
    let b_norm = b.norm();
    if !optimum_norm.is_finite() || optimum_norm > b_norm {
        // beta = 0 is always feasible.
        beta.iter_mut().for_each(|v| *v = 0.0);
        optimum_norm = b_norm;
    }
    Ok(LsSolution {
        beta,
        optimum_norm,
        rank,
    })
}

/// Minimizer of `|rq + beta (rq - r)|_2` for a single column:
/// `beta = -rq^T (rq - r) / |rq - r|^2`.
pub fn beta0_closed_form(rq: &DVector<f64>, r: &DVector<f64>) -> Result<f64> {
    if rq.len() != r.len() {
        return Err(Error::DimensionMismatch {
            expected: rq.len(),
            actual: r.len(),
        });
    }
    let diff = rq - r;
    let denom = diff.norm_squared();
    let scale = DEGENERATE_REL_TOL * (rq.norm() + r.norm());
    if denom.sqrt() <= scale || denom == 0.0 {
        return Err(Error::DegenerateDenominator(denom.sqrt()));
    }
    Ok(-rq.dot(&diff) / denom)
}
