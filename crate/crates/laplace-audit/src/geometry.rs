//! Mode finding and local curvature.
//!
//! [`find_mode`] maximises the log-likelihood or the unnormalised
//! log-posterior with a damped Newton ascent (Cholesky-verified Newton step,
//! steepest-ascent fallback, Armijo backtracking). [`curvature`] summarises
//! the per-observation precision `J = -Hessian / n` at a mode, and
//! [`shifted_pair`] builds the curvature matrices shifted by one third of
//! the third-derivative slack, `J +- (radius * M / 3) I`, which bracket the
//! Hessian over the certificate ball.

use nalgebra::{DMatrix, DVector};

use crate::error::{AuditError, Result};
use crate::model::ModelDescriptor;

/// Which objective a mode search maximises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Likelihood,
    Posterior,
}

/// Result of a mode search.
#[derive(Debug, Clone)]
pub struct ModeSolve {
    pub theta: DVector<f64>,
    pub objective: Objective,
    pub converged: bool,
    pub grad_norm: f64,
    pub iterations: usize,
}

/// Curvature summary at a mode: `j = -Hessian / n` with its smallest
/// eigenvalue, the trace of its inverse, and its log-determinant.
#[derive(Debug, Clone)]
pub struct CurvatureSummary {
    pub j: DMatrix<f64>,
    pub lambda_min: f64,
    pub trace_inv: f64,
    pub logdet: f64,
}

/// Curvature matrices shifted by `radius * m / 3` in both directions.
#[derive(Debug, Clone)]
pub struct ShiftedPair {
    pub j_plus: DMatrix<f64>,
    pub j_minus: DMatrix<f64>,
    eig_plus: Vec<f64>,
    eig_minus: Vec<f64>,
}

/// Mode searches and curvature for both centring conventions.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub mode_mle: ModeSolve,
    pub mode_map: ModeSolve,
    pub curv_mle: CurvatureSummary,
    pub curv_map: CurvatureSummary,
    /// `||theta_hat - theta_bar||`, the distance between the two modes.
    pub separation: f64,
}

const MAX_ITER: usize = 200;
const DIVERGE_NORM: f64 = 1e6;
const ARMIJO_C: f64 = 1e-4;

/// Maximise the chosen objective from `init`. Convergence means the
/// gradient norm falls below `1e-8 * max(1, ||theta||)`; iterates wandering
/// beyond norm `1e6` are treated as evidence that no interior maximum
/// exists.
pub fn find_mode(
    model: &ModelDescriptor,
    objective: Objective,
    init: &DVector<f64>,
) -> Result<ModeSolve> {
    let eval = |t: &DVector<f64>| match objective {
        Objective::Likelihood => model.loglik(t),
        Objective::Posterior => model.logpost(t),
    };
    let mut theta = init.clone();
    let mut cur = eval(&theta);
    if !cur.value.is_finite() {
        return Err(AuditError::ModeSearch(
            "mode search started outside the parameter support".into(),
        ));
    }
    for iter in 0..MAX_ITER {
        let grad_norm = cur.grad.norm();
        if grad_norm <= 1e-8 * theta.norm().max(1.0) {
            // Guard against flat ridges: with separable logistic data the
            // gradient decays to zero along a ray even though the objective
            // keeps increasing, so probe far out along the ray before
            // accepting the point as an interior maximum.
            if theta.norm() >= 1.0 && eval(&theta.scale(10.0)).value >= cur.value {
                return Err(AuditError::ModeSearch(
                    "no interior maximum found: the objective does not decay away from the \
                     candidate point (logistic data may be separable)"
                        .into(),
                ));
            }
            return Ok(ModeSolve { theta, objective, converged: true, grad_norm, iterations: iter });
        }
        if theta.norm() > DIVERGE_NORM {
            return Err(AuditError::ModeSearch(
                "no interior maximum found: iterates diverged (the objective may increase \
                 without bound, e.g. separable logistic data)"
                    .into(),
            ));
        }
        // Newton direction when the negated Hessian is positive definite,
        // otherwise plain gradient ascent.
        let mut dir = match (-&cur.hess).cholesky() {
            Some(ch) => ch.solve(&cur.grad),
            None => cur.grad.clone(),
        };
        if cur.grad.dot(&dir) <= 0.0 {
            dir = cur.grad.clone();
        }
        // Armijo backtracking line search on the ascent direction.
        let slope = cur.grad.dot(&dir);
        // Newton-decrement stop: the achievable objective gain is below
        // floating-point resolution, so the gradient criterion above can
        // never be reached by further (rounding-noise) steps.
        if slope <= 8.0 * f64::EPSILON * cur.value.abs().max(1.0) {
            let grad_norm = cur.grad.norm();
            if theta.norm() >= 1.0 && eval(&theta.scale(10.0)).value >= cur.value {
                return Err(AuditError::ModeSearch(
                    "no interior maximum found: the objective does not decay away from the \
                     candidate point (logistic data may be separable)"
                        .into(),
                ));
            }
            return Ok(ModeSolve { theta, objective, converged: true, grad_norm, iterations: iter });
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &theta + dir.scale(step);
            let next = eval(&cand);
            if next.value.is_finite() && next.value >= cur.value + ARMIJO_C * step * slope {
                theta = cand;
                cur = next;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // The line search stalled; report the best point found.
            return Ok(ModeSolve {
                grad_norm: cur.grad.norm(),
                theta,
                objective,
                converged: false,
                iterations: iter + 1,
            });
        }
    }
    let grad_norm = cur.grad.norm();
    let converged = grad_norm <= 1e-8 * theta.norm().max(1.0);
    Ok(ModeSolve { theta, objective, converged, grad_norm, iterations: MAX_ITER })
}

/// Per-observation precision at a mode: `J = -Hessian / n`, which must be
/// positive definite.
pub fn curvature(model: &ModelDescriptor, mode: &ModeSolve) -> Result<CurvatureSummary> {
    let eval = match mode.objective {
        Objective::Likelihood => model.loglik(&mode.theta),
        Objective::Posterior => model.logpost(&mode.theta),
    };
    let j = -eval.hess / model.n as f64;
    let eigs = j.clone().symmetric_eigen().eigenvalues;
    let lambda_min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(lambda_min > 0.0) {
        return Err(AuditError::NotPositiveDefinite(format!(
            "Hessian not positive definite at the mode (smallest eigenvalue of J is {lambda_min})"
        )));
    }
    Ok(CurvatureSummary {
        j,
        lambda_min,
        trace_inv: eigs.iter().map(|v| 1.0 / v).sum(),
        logdet: eigs.iter().map(|v| v.ln()).sum(),
    })
}

/// Shift `j` by `radius * m / 3` in both directions.
pub fn shifted_pair(j: &DMatrix<f64>, radius: f64, m: f64) -> ShiftedPair {
    let shift = radius * m / 3.0;
    let d = j.nrows();
    let eye = DMatrix::identity(d, d);
    let j_plus = j + eye.scale(shift);
    let j_minus = j - eye.scale(shift);
    let eig = |m: &DMatrix<f64>| -> Vec<f64> {
        m.clone().symmetric_eigen().eigenvalues.iter().cloned().collect()
    };
    let eig_plus = eig(&j_plus);
    let eig_minus = eig(&j_minus);
    ShiftedPair { j_plus, j_minus, eig_plus, eig_minus }
}

impl ShiftedPair {
    pub fn lambda_min_plus(&self) -> f64 {
        self.eig_plus.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn lambda_min_minus(&self) -> f64 {
        self.eig_minus.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn trace_inv_plus(&self) -> Result<f64> {
        spectral_sum(&self.eig_plus, "upward-shifted curvature", |v| 1.0 / v)
    }

    pub fn trace_inv_minus(&self) -> Result<f64> {
        spectral_sum(&self.eig_minus, "downward-shifted curvature", |v| 1.0 / v)
    }

    pub fn logdet_plus(&self) -> Result<f64> {
        spectral_sum(&self.eig_plus, "upward-shifted curvature", |v| v.ln())
    }

    pub fn logdet_minus(&self) -> Result<f64> {
        spectral_sum(&self.eig_minus, "downward-shifted curvature", |v| v.ln())
    }
}

fn spectral_sum(eigs: &[f64], what: &str, f: impl Fn(f64) -> f64) -> Result<f64> {
    let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(AuditError::NotPositiveDefinite(format!(
            "{what} is not positive definite (smallest eigenvalue {min})"
        )));
    }
    Ok(eigs.iter().map(|&v| f(v)).sum())
}

impl Geometry {
    /// Locate both modes and summarise curvature at each.
    pub fn analyze(model: &ModelDescriptor) -> Result<Geometry> {
        let mode_mle = find_mode(model, Objective::Likelihood, &model.init_mle)?;
        let mode_map = find_mode(model, Objective::Posterior, &model.init_map)?;
        if !mode_mle.converged {
            return Err(AuditError::ModeSearch(format!(
                "likelihood mode search did not converge (gradient norm {:.3e})",
                mode_mle.grad_norm
            )));
        }
        if !mode_map.converged {
            return Err(AuditError::ModeSearch(format!(
                "posterior mode search did not converge (gradient norm {:.3e})",
                mode_map.grad_norm
            )));
        }
        let curv_mle = curvature(model, &mode_mle)?;
        let curv_map = curvature(model, &mode_map)?;
        let separation = (&mode_mle.theta - &mode_map.theta).norm();
        Ok(Geometry { mode_mle, mode_map, curv_mle, curv_map, separation })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{logistic_gaussian_model, poisson_gamma_model};
    use approx::assert_relative_eq;

    #[test]
    fn poisson_modes_and_curvature() {
        let m = poisson_gamma_model(&[2.0, 3.0, 7.0], 0.1, 3.0).unwrap();
        let g = Geometry::analyze(&m).unwrap();
        assert_relative_eq!(g.mode_mle.theta[0], 4.0, epsilon = 1e-8);
        assert_relative_eq!(g.mode_map.theta[0], 1.85, epsilon = 1e-8);
        assert_relative_eq!(g.curv_mle.j[(0, 0)], 0.25, epsilon = 1e-8);
        assert_relative_eq!(g.curv_map.j[(0, 0)], 36.0 / 33.3, epsilon = 1e-8);
        assert_relative_eq!(g.separation, 2.15, epsilon = 1e-7);
    }

    #[test]
    fn mode_search_is_init_independent() {
        let m = poisson_gamma_model(&[2.0, 3.0, 7.0], 0.1, 3.0).unwrap();
        for start in [0.5, 1.0, 3.0, 9.0, 40.0] {
            let s = find_mode(&m, Objective::Likelihood, &DVector::from_element(1, start)).unwrap();
            assert!(s.converged);
            assert_relative_eq!(s.theta[0], 4.0, epsilon = 1e-7);
        }
    }

    #[test]
    fn separable_logistic_data_diverges() {
        // All-positive labels with positive features: the likelihood
        // increases without bound along theta -> +inf.
        let m = logistic_gaussian_model(&[vec![1.0], vec![2.0]], &[1.0, 1.0]).unwrap();
        let err = find_mode(&m, Objective::Likelihood, &DVector::zeros(1)).unwrap_err();
        assert!(err.to_string().contains("no interior maximum"), "{err}");
        // The posterior still has a mode thanks to the Gaussian prior.
        let s = find_mode(&m, Objective::Posterior, &DVector::zeros(1)).unwrap();
        assert!(s.converged);
    }

    #[test]
    fn shifted_pair_brackets_and_reports_spectra() {
        let j = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 2.0]);
        let sp = shifted_pair(&j, 0.6, 1.0);
        // Eigenvalues shift by exactly 0.2 in each direction.
        let base = j.symmetric_eigen().eigenvalues;
        let lo = base.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_relative_eq!(sp.lambda_min_plus(), lo + 0.2, epsilon = 1e-12);
        assert_relative_eq!(sp.lambda_min_minus(), lo - 0.2, epsilon = 1e-12);
        assert!(sp.trace_inv_plus().unwrap() < sp.trace_inv_minus().unwrap());
        assert!(sp.logdet_plus().unwrap() > sp.logdet_minus().unwrap());
    }

    #[test]
    fn shifted_pair_flags_indefinite_lower_shift() {
        let j = DMatrix::identity(2, 2);
        let sp = shifted_pair(&j, 3.0, 1.5); // shift 1.5 > 1
        assert!(sp.trace_inv_minus().is_err());
        assert!(sp.logdet_minus().is_err());
        assert!(sp.trace_inv_plus().is_ok());
    }
}
