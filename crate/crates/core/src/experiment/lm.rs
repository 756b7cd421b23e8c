//! Small Levenberg–Marquardt driver for the weighted fits in this module.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Weighted residuals r = (model − data)/σ and their Jacobian at `p`.
pub(crate) trait Problem {
    fn n_params(&self) -> usize;
    fn evaluate(&self, p: &[f64]) -> (DVector<f64>, DMatrix<f64>);
    /// Hard constraints such as positive widths; rejected steps shrink.
    fn feasible(&self, _p: &[f64]) -> bool {
        true
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Fit {
    pub params: Vec<f64>,
    /// (JᵀJ)⁻¹ at the optimum, not yet scaled by the reduced χ².
    pub covariance: DMatrix<f64>,
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
}

impl Fit {
    pub fn chi2_reduced(&self) -> f64 {
        if self.dof == 0 {
            0.0
        } else {
            self.chi2 / self.dof as f64
        }
    }

    /// Standard errors, inflated by √χ²_red when the scatter exceeds the
    /// assumed noise model and never deflated below it.
    pub fn std_errors(&self) -> Vec<f64> {
        let s = self.chi2_reduced().max(1.0);
        (0..self.params.len()).map(|i| (self.covariance[(i, i)].max(0.0) * s).sqrt()).collect()
    }
}

pub(crate) fn minimize(problem: &impl Problem, p0: &[f64], max_iter: usize) -> Result<Fit> {
    let n = problem.n_params();
    assert_eq!(p0.len(), n);
    if !problem.feasible(p0) {
        return Err(Error::invalid("initial guess violates the fit constraints"));
    }
    let mut p = p0.to_vec();
    let (mut r, mut j) = problem.evaluate(&p);
    if r.len() < n {
        return Err(Error::invalid(format!("{} data points cannot determine {n} parameters", r.len())));
    }
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let jt = j.transpose();
        let a = &jt * &j;
        let g = &jt * &r;
        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = a.clone();
            for i in 0..n {
                damped[(i, i)] += lambda * a[(i, i)].max(1e-300);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            if !trial.iter().all(|x| x.is_finite()) || !problem.feasible(&trial) {
                lambda *= 10.0;
                continue;
            }
            let (r_t, j_t) = problem.evaluate(&trial);
            let cost_t = r_t.norm_squared();
            if cost_t.is_finite() && cost_t <= cost {
                let small_step = step.iter().zip(&trial).all(|(d, x)| d.abs() <= 1e-12 * (x.abs() + 1e-12));
                let small_gain = cost - cost_t <= 1e-15 * cost;
                p = trial;
                r = r_t;
                j = j_t;
                cost = cost_t;
                lambda = (lambda * 0.1).max(1e-12);
                accepted = true;
                converged = small_step || small_gain || cost == 0.0;
                break;
            }
            lambda *= 10.0;
        }
        // No descent even with a tiny step: the minimum is resolved to roundoff.
        if !accepted {
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence(format!("least-squares fit did not settle in {max_iter} iterations")));
    }
    let jtj = j.transpose() * &j;
    let covariance = invert_spd(&jtj)
        .ok_or_else(|| Error::Numerical("fit parameters are not identifiable (singular normal matrix)".into()))?;
    Ok(Fit { params: p, covariance, chi2: cost, dof: r.len() - n, iterations })
}

/// Inverse of a symmetric positive definite matrix after diagonal equilibration.
fn invert_spd(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let d: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    if d.iter().any(|&x| !(x > 0.0)) {
        return None;
    }
    let s: Vec<f64> = d.iter().map(|x| 1.0 / x.sqrt()).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| a[(i, j)] * s[i] * s[j]);
    let inv = scaled.cholesky()?.inverse();
    Some(DMatrix::from_fn(n, n, |i, j| inv[(i, j)] * s[i] * s[j]))
}
