//! Convergence factors, the NGMRES(0) q-factor bound, and monitors for the
//! assumptions the convergence theory places on the coefficient problem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::IterationHistory;
use crate::problem::{residual, NonlinearProblem, StateVector};

/// Upper end of the contraction factors for which `eta < 1`: `sqrt(2) - 1`.
pub const ETA_THRESHOLD: f64 = std::f64::consts::SQRT_2 - 1.0;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    /// `|r_k| / |r_{k-1}|` for `k >= 1`.
    pub q_factors: Vec<f64>,
    /// `|r_k|^(1/k)` for `k >= 1`.
    pub root_factors: Vec<f64>,
    /// Empirical bound on `sum |beta|`.
    pub max_sum_abs_beta: f64,
    pub max_ls_ratio: f64,
    pub eta_bound: Option<f64>,
    /// Every q-factor is at most `eta_bound`.
    pub q_bound_satisfied: Option<bool>,
}

/// Leading run of strictly positive norms; the first zero ends it.
fn usable_prefix(norms: &[f64]) -> Result<&[f64]> {
    if norms.len() < 2 {
        return Err(Error::InsufficientHistory {
            needed: 2,
            have: norms.len(),
        });
    }
    let end = norms.iter().position(|r| *r <= 0.0).unwrap_or(norms.len());
    Ok(&norms[..end])
}

pub fn q_factors_from_norms(norms: &[f64]) -> Result<Vec<f64>> {
    let usable = usable_prefix(norms)?;
    Ok(usable.windows(2).map(|w| w[1] / w[0]).collect())
}

pub fn root_factors_from_norms(norms: &[f64]) -> Result<Vec<f64>> {
    let usable = usable_prefix(norms)?;
    Ok(usable
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, r)| r.powf(1.0 / k as f64))
        .collect())
}

pub fn q_factors(history: &IterationHistory) -> Result<Vec<f64>> {
    q_factors_from_norms(&history.res_norms())
}

pub fn root_factors(history: &IterationHistory) -> Result<Vec<f64>> {
    root_factors_from_norms(&history.res_norms())
}

/// `eta = rho (1 + rho) / (1 - rho)` with a flag telling whether
/// `rho < sqrt(2) - 1`, i.e. whether `eta < 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EtaBound {
    pub eta: f64,
    pub valid: bool,
}

pub fn eta_bound(rho: f64) -> Result<EtaBound> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid("rho", "must lie in (0, 1)"));
    }
    Ok(EtaBound {
        eta: rho * (1.0 + rho) / (1.0 - rho),
        valid: rho < ETA_THRESHOLD,
    })
}

/// Checks `(1 - rho) |x - x*| <= |r(x)| <= (1 + rho) |x - x*|`.
///
/// The bracket is only guaranteed near `x*`; far away it may fail.
pub fn lemma_sandwich_check(problem: &NonlinearProblem, x: &StateVector, rho: f64) -> Result<bool> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid("rho", "must lie in (0, 1)"));
    }
    let x_star = problem.known_solution().ok_or(Error::MissingSolution)?;
    let err = (x.as_dvector() - x_star.as_dvector()).norm();
    let res = residual(problem, x)?.norm();
    Ok((1.0 - rho) * err <= res && res <= (1.0 + rho) * err)
}

/// `(max_k sum |beta^(k)|, max_k ls_ratio_k)`; records without a ratio are
/// skipped and an empty maximum is 0.
pub fn assumption_monitor(history: &IterationHistory) -> (f64, f64) {
    history.records.iter().fold((0.0, 0.0), |(beta, ratio), r| {
        (
            f64::max(beta, r.sum_abs_beta),
            r.ls_ratio.map_or(ratio, |l| f64::max(ratio, l)),
        )
    })
}

/// Whether `|r_k| <= rate^k |r_0|` holds at every record.
pub fn r_linear_envelope_holds(history: &IterationHistory, rate: f64) -> bool {
    let norms = history.res_norms();
    let r0 = norms[0];
    norms
        .iter()
        .enumerate()
        .all(|(k, r)| *r <= rate.powi(k as i32) * r0)
}

/// Assembles the full report. With `rho` given, also evaluates the
/// q-factor bound against the observed factors.
pub fn diagnose(history: &IterationHistory, rho: Option<f64>) -> Result<DiagnosticsReport> {
    let norms = history.res_norms();
    let (q, root) = if norms.len() >= 2 {
        (
            q_factors_from_norms(&norms)?,
            root_factors_from_norms(&norms)?,
        )
    } else {
        (Vec::new(), Vec::new())
    };
    let (max_sum_abs_beta, max_ls_ratio) = assumption_monitor(history);
    let eta = rho.map(eta_bound).transpose()?.map(|b| b.eta);
    let q_bound_satisfied = eta.map(|eta| q.iter().all(|f| *f <= eta));
    Ok(DiagnosticsReport {
        q_factors: q,
        root_factors: root,
        max_sum_abs_beta,
        max_ls_ratio,
        eta_bound: eta,
        q_bound_satisfied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::{IterationRecord, Status};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn history_from(records: Vec<IterationRecord>) -> IterationHistory {
        IterationHistory {
            records,
            status: Status::Converged,
            g_eval_count: 0,
            final_x: StateVector::zeros(1).unwrap(),
        }
    }

    #[test]
    fn factor_examples() {
        assert_eq!(
            q_factors_from_norms(&[1.0, 0.5, 0.25]).unwrap(),
            vec![0.5, 0.5]
        );
        assert_eq!(
            root_factors_from_norms(&[1.0, 0.5, 0.25]).unwrap(),
            vec![0.5, 0.5]
        );
        assert_eq!(
            root_factors_from_norms(&[1.0, 1.0, 1.0]).unwrap(),
            vec![1.0, 1.0]
        );
        assert!(q_factors_from_norms(&[1.0, 0.0, 0.0]).unwrap().is_empty());
        assert_eq!(
            q_factors_from_norms(&[1.0, 0.5, 0.0, 3.0]).unwrap(),
            vec![0.5]
        );
        assert!(matches!(
            q_factors_from_norms(&[1.0]),
            Err(Error::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn root_factors_of_geometric_decay() {
        let rate: f64 = 0.7;
        let norms: Vec<f64> = (0..60).map(|k| rate.powi(k)).collect();
        let roots = root_factors_from_norms(&norms).unwrap();
        for (idx, f) in roots.iter().enumerate() {
            let k = idx + 1;
            if k >= 20 {
                assert!((f - rate).abs() <= 0.05 * rate);
            }
        }
    }

    #[test]
    fn eta_examples() {
        let b = eta_bound(ETA_THRESHOLD).unwrap();
        assert_relative_eq!(b.eta, 1.0, epsilon = 1e-15);
        assert!(!b.valid);
        let b = eta_bound(0.4).unwrap();
        assert_relative_eq!(b.eta, 14.0 / 15.0, epsilon = 1e-15);
        assert!(b.valid);
        assert!(eta_bound(1e-12).unwrap().eta < 1e-11);
        assert!(eta_bound(0.0).is_err());
        assert!(eta_bound(1.0).is_err());
    }

    #[test]
    fn monitor_examples() {
        let h = history_from(vec![
            IterationRecord::new(0, 1.0).with_coefficients(vec![0.2], 0.5),
            IterationRecord::new(1, 0.5).with_coefficients(vec![-0.3, 0.1], 0.8),
            IterationRecord::new(2, 0.1),
        ]);
        let (beta, ratio) = assumption_monitor(&h);
        assert_relative_eq!(beta, 0.4, epsilon = 1e-15);
        assert_eq!(ratio, 0.8);

        let zeros = history_from(vec![
            IterationRecord::new(0, 1.0).with_coefficients(vec![0.0, 0.0], 1.0)
        ]);
        assert_eq!(assumption_monitor(&zeros).0, 0.0);
    }

    #[test]
    fn diagnose_reports_bound() {
        let h = history_from(
            [1.0, 0.5, 0.2, 0.05]
                .iter()
                .enumerate()
                .map(|(k, r)| IterationRecord::new(k, *r))
                .collect(),
        );
        let rep = diagnose(&h, Some(0.4)).unwrap();
        assert_eq!(rep.q_factors.len(), 3);
        assert_eq!(rep.root_factors.len(), 3);
        assert_eq!(rep.q_bound_satisfied, Some(true));
        assert!(r_linear_envelope_holds(&h, 0.65));
        assert!(!r_linear_envelope_holds(&h, 0.4));
        let rep = diagnose(&h, None).unwrap();
        assert_eq!(rep.eta_bound, None);
    }

    #[test]
    fn sandwich_requires_solution() {
        let p = NonlinearProblem::from_fixed_point_map(1, |x| x * 0.5).unwrap();
        let x = StateVector::new(vec![0.1]).unwrap();
        assert_eq!(
            lemma_sandwich_check(&p, &x, 0.5),
            Err(Error::MissingSolution)
        );
        let p = p
            .with_known_solution(StateVector::zeros(1).unwrap())
            .unwrap();
        assert!(lemma_sandwich_check(&p, &x, 0.5).unwrap());
        assert!(lemma_sandwich_check(&p, &StateVector::zeros(1).unwrap(), 0.5).unwrap());
        assert!(lemma_sandwich_check(&p, &x, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn root_and_q_factors_consistent(norms in prop::collection::vec(1e-8f64..10.0, 2..40)) {
            let q = q_factors_from_norms(&norms).unwrap();
            let root = root_factors_from_norms(&norms).unwrap();
            prop_assert_eq!(q.len(), norms.len() - 1);
            prop_assert_eq!(root.len(), norms.len() - 1);
            let mut prod = norms[0];
            for (idx, f) in q.iter().enumerate() {
                prod *= f;
                let k = (idx + 1) as f64;
                let expected = prod.powf(1.0 / k);
                prop_assert!((root[idx] - expected).abs() <= 1e-10 * expected);
            }
        }

        #[test]
        fn eta_monotone_below_threshold(a in 1e-6f64..ETA_THRESHOLD, b in 1e-6f64..ETA_THRESHOLD) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(lo < hi);
            prop_assert!(eta_bound(lo).unwrap().eta < eta_bound(hi).unwrap().eta);
            prop_assert!(eta_bound(hi).unwrap().eta < 1.0);
        }
    }
}
