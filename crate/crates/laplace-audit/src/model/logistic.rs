//! Logistic regression with a multivariate Student-t or standard Gaussian
//! prior on the coefficients.
//!
//! For features `X_k in R^d` and labels `Y_k in {-1, +1}`:
//! `L_n(theta) = -sum softplus(-Y_k X_k' theta)`, which is globally concave
//! with Hessian `-sum X_k X_k' p_k (1 - p_k)` for `p_k = sigmoid(X_k' theta)`.
//!
//! Third derivatives: `|sigmoid''| <= 1 / (6 sqrt(3))` everywhere, so
//! `sup ||L_n'''(theta)||_op / n <= sum ||X_k||^3 / (6 sqrt(3) n) = M2`
//! uniformly over `theta`. This absolute-value bound ignores the sign
//! cancellation in `sum sigmoid''(X_k' theta)(X_k' u)^3` and is therefore
//! conservative; the grid-scan method in the certificates module can
//! produce much smaller (heuristic) values, padded here by the global
//! fourth-derivative bound `sum ||X_k||^4 / (8 n)` from
//! `|sigmoid'''| <= 1/8`.
//!
//! The t prior `t_nu(mu, Sigma)` supplies closed-form envelope constants
//! over a ball `B(c, r)`:
//! * `M1_tilde` is the density peak,
//! * `M1_hat = [1 + (2 r^2 + 2 ||c - mu||^2) / (nu lambda_min(Sigma))]^{(nu+d)/2} / M1_tilde`,
//! * `M1 = (nu + d)(r + ||c - mu||) / (nu lambda_min(Sigma))`,
//!
//! and a posterior third-derivative bound (valid for `r <= 1`)
//! `M2 + 3 (nu+d) ||A||^2 (1 + ||c - mu||) / (nu^2 n)
//!     + 2 (nu+d) ||A||^3 (1 + ||c - mu||)^3 / (nu^3 n)`
//! with `A = Sigma^{-1} + diag(Sigma^{-1})`.
//!
//! The Gaussian variant uses the standard normal prior, whose log-density
//! Hessian is constant, so the posterior third-derivative bound equals the
//! likelihood one.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use super::{LogDensityEval, ModelDescriptor, PriorEnvelope};
use crate::error::{AuditError, Result};

const LN_2PI: f64 = 1.8378770664093453;

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

struct LogisticLik {
    x: Vec<DVector<f64>>,
    y: Vec<f64>,
    d: usize,
    /// `sum ||X_k||^3 / (6 sqrt(3) n)`: uniform third-derivative bound.
    m2: f64,
    /// `sum ||X_k||^4 / (8 n)`: uniform fourth-derivative bound.
    m3: f64,
}

impl LogisticLik {
    fn new(x: &[Vec<f64>], y: &[f64]) -> Result<Arc<Self>> {
        if x.is_empty() || x.len() != y.len() {
            return Err(AuditError::Invalid(
                "logistic data needs matching, non-empty features and labels".into(),
            ));
        }
        let d = x[0].len();
        if d == 0 {
            return Err(AuditError::Invalid("feature rows are empty".into()));
        }
        let mut rows = Vec::with_capacity(x.len());
        for (i, row) in x.iter().enumerate() {
            if row.len() != d {
                return Err(AuditError::Invalid(format!(
                    "row {}: expected {d} features, found {}",
                    i + 1,
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(AuditError::Invalid(format!("row {}: non-finite feature", i + 1)));
            }
            rows.push(DVector::from_column_slice(row));
        }
        if y.iter().any(|v| *v != 1.0 && *v != -1.0) {
            return Err(AuditError::Invalid("labels must be +1 or -1".into()));
        }
        let n = x.len() as f64;
        let m2 = rows.iter().map(|r| r.norm().powi(3)).sum::<f64>() / (6.0 * 3.0_f64.sqrt() * n);
        let m3 = rows.iter().map(|r| r.norm().powi(4)).sum::<f64>() / (8.0 * n);
        Ok(Arc::new(LogisticLik { x: rows, y: y.to_vec(), d, m2, m3 }))
    }

    fn eval(&self, theta: &DVector<f64>) -> LogDensityEval {
        let d = self.d;
        let mut value = 0.0;
        let mut grad = DVector::zeros(d);
        let mut hess = DMatrix::zeros(d, d);
        for (xk, &yk) in self.x.iter().zip(&self.y) {
            let z = xk.dot(theta);
            value -= softplus(-yk * z);
            let p = sigmoid(z);
            grad.axpy(yk * sigmoid(-yk * z), xk, 1.0);
            hess.ger(-p * (1.0 - p), xk, xk, 1.0);
        }
        LogDensityEval { value, grad, hess }
    }
}

fn lik_closure(lik: Arc<LogisticLik>) -> Box<dyn Fn(&DVector<f64>) -> LogDensityEval + Send + Sync> {
    Box::new(move |theta| lik.eval(theta))
}

/// Logistic regression with a `t_nu(mu, Sigma)` prior, `nu > 1` and `Sigma`
/// symmetric positive definite.
pub fn logistic_t_model(
    x: &[Vec<f64>],
    y: &[f64],
    mu: &[f64],
    sigma: &DMatrix<f64>,
    nu: f64,
) -> Result<ModelDescriptor> {
    let lik = LogisticLik::new(x, y)?;
    let d = lik.d;
    let n = lik.x.len();
    let nf = n as f64;
    if !(nu > 1.0) {
        return Err(AuditError::Invalid(format!(
            "t prior needs nu > 1 for integrable tails, got {nu}"
        )));
    }
    if mu.len() != d || sigma.nrows() != d || sigma.ncols() != d {
        return Err(AuditError::Invalid(format!(
            "prior location/scale must match dimension {d}"
        )));
    }
    let mu = DVector::from_column_slice(mu);
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| AuditError::NotPositiveDefinite("prior scale matrix is not positive definite".into()))?;
    let logdet_sigma = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let sigma_inv = chol.inverse();
    let eigs = sigma.clone().symmetric_eigen().eigenvalues;
    let lambda_min_sigma = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    // A = Sigma^{-1} + diag(Sigma^{-1}), the matrix whose operator norm
    // enters the posterior third-derivative bound.
    let mut a = sigma_inv.clone();
    for i in 0..d {
        a[(i, i)] += sigma_inv[(i, i)];
    }
    let a_norm = a
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max);

    let df = d as f64;
    // log of the density peak: Gamma((nu+d)/2) / (Gamma(nu/2) (nu pi)^{d/2} |Sigma|^{1/2}).
    let log_peak = ln_gamma((nu + df) / 2.0)
        - ln_gamma(nu / 2.0)
        - (df / 2.0) * (nu * std::f64::consts::PI).ln()
        - 0.5 * logdet_sigma;

    let logprior_fn = {
        let mu = mu.clone();
        let sigma_inv = sigma_inv.clone();
        Box::new(move |theta: &DVector<f64>| {
            let v = theta - &mu;
            let siv = &sigma_inv * &v;
            let q = v.dot(&siv);
            let value = log_peak - ((nu + df) / 2.0) * (1.0 + q / nu).ln();
            let scale = (nu + df) / (nu + q);
            let grad = siv.scale(-scale);
            // Hessian of the log-density: -(nu+d) [Sigma^{-1}/(nu+q)
            //   - 2 Sigma^{-1} v v' Sigma^{-1} / (nu+q)^2].
            let mut hess = sigma_inv.scale(-scale);
            hess.ger(2.0 * (nu + df) / ((nu + q) * (nu + q)), &siv, &siv, 1.0);
            LogDensityEval { value, grad, hess }
        })
    };

    let m2 = lik.m2;
    let third_deriv_lik_fn: Box<dyn Fn(&DVector<f64>, f64) -> Result<f64> + Send + Sync> =
        Box::new(move |_: &DVector<f64>, _: f64| Ok(m2));

    let third_deriv_post_fn = {
        let mu = mu.clone();
        Box::new(move |center: &DVector<f64>, radius: f64| {
            if radius > 1.0 {
                return Err(AuditError::Unavailable(format!(
                    "posterior third-derivative bound for the t prior requires radius <= 1, got {radius}"
                )));
            }
            let reach = 1.0 + (center - &mu).norm();
            Ok(m2
                + 3.0 * (nu + df) * a_norm * a_norm * reach / (nu * nu * nf)
                + 2.0 * (nu + df) * a_norm.powi(3) * reach.powi(3) / (nu.powi(3) * nf))
        })
    };

    let prior_envelope_fn = {
        let mu = mu.clone();
        Box::new(move |center: &DVector<f64>, radius: f64| {
            let sep = (center - &mu).norm();
            let grow = 1.0 + (2.0 * radius * radius + 2.0 * sep * sep) / (nu * lambda_min_sigma);
            Ok(PriorEnvelope {
                m1: (nu + df) * (radius + sep) / (nu * lambda_min_sigma),
                m1_tilde: log_peak.exp(),
                m1_hat: (-log_peak + ((nu + df) / 2.0) * grow.ln()).exp(),
            })
        })
    };

    let prior_tail_moment_fn = {
        let mu = mu.clone();
        let tr_sigma: f64 = sigma.diagonal().iter().sum();
        Box::new(move |center: &DVector<f64>, _excl: f64, p: u32| {
            let sep = (&mu - center).norm();
            let p2 = if nu > 2.0 {
                Some(tr_sigma * nu / (nu - 2.0) + sep * sep)
            } else {
                None
            };
            match p {
                2 => p2.ok_or_else(|| {
                    AuditError::Unavailable(
                        "second tail moment infinite: t prior needs nu > 2".into(),
                    )
                }),
                1 => {
                    // E||theta - mu|| <= sqrt(tr Sigma) sqrt(nu/2)
                    //   Gamma((nu-1)/2) / Gamma(nu/2), finite for nu > 1.
                    let first = tr_sigma.sqrt() * (nu / 2.0).sqrt()
                        * (ln_gamma((nu - 1.0) / 2.0) - ln_gamma(nu / 2.0)).exp()
                        + sep;
                    Ok(match p2 {
                        Some(v) => first.min(v.sqrt()),
                        None => first,
                    })
                }
                _ => Err(AuditError::Invalid(format!(
                    "tail moment order must be 1 or 2, got {p}"
                ))),
            }
        })
    };

    Ok(ModelDescriptor {
        family: "logistic-t".into(),
        d,
        n,
        support_lower: None,
        concave_loglik: true,
        init_mle: DVector::zeros(d),
        init_map: DVector::zeros(d),
        conjugate: None,
        fourth_deriv_bound: Some(lik.m3),
        loglik_fn: lik_closure(lik),
        logprior_fn,
        third_deriv_lik_fn: Some(third_deriv_lik_fn),
        third_deriv_post_fn: Some(third_deriv_post_fn),
        prior_envelope_fn: Some(prior_envelope_fn),
        prior_tail_moment_fn: Some(prior_tail_moment_fn),
        optimality_gap_fn: None,
    })
}

/// Logistic regression with a standard Gaussian prior `N(0, I_d)`.
pub fn logistic_gaussian_model(x: &[Vec<f64>], y: &[f64]) -> Result<ModelDescriptor> {
    let lik = LogisticLik::new(x, y)?;
    let d = lik.d;
    let n = lik.x.len();
    let df = d as f64;

    let logprior_fn = Box::new(move |theta: &DVector<f64>| LogDensityEval {
        value: -0.5 * df * LN_2PI - 0.5 * theta.norm_squared(),
        grad: -theta.clone(),
        hess: -DMatrix::identity(d, d),
    });

    // The Gaussian prior's log-density Hessian is constant, so the
    // posterior bound coincides with the likelihood one.
    let m2 = lik.m2;
    let flat_bound = move |_: &DVector<f64>, _: f64| -> Result<f64> { Ok(m2) };

    let prior_envelope_fn = Box::new(move |center: &DVector<f64>, radius: f64| {
        let c = center.norm();
        let near = (c - radius).max(0.0);
        Ok(PriorEnvelope {
            m1: c + radius,
            m1_tilde: (-0.5 * df * LN_2PI - 0.5 * near * near).exp(),
            m1_hat: (0.5 * df * LN_2PI + 0.5 * (c + radius).powi(2)).exp(),
        })
    });

    let prior_tail_moment_fn = Box::new(move |center: &DVector<f64>, _excl: f64, p: u32| {
        let p2 = df + center.norm_squared();
        match p {
            1 => Ok(p2.sqrt()),
            2 => Ok(p2),
            _ => Err(AuditError::Invalid(format!(
                "tail moment order must be 1 or 2, got {p}"
            ))),
        }
    });

    Ok(ModelDescriptor {
        family: "logistic-gaussian".into(),
        d,
        n,
        support_lower: None,
        concave_loglik: true,
        init_mle: DVector::zeros(d),
        init_map: DVector::zeros(d),
        conjugate: None,
        fourth_deriv_bound: Some(lik.m3),
        loglik_fn: lik_closure(lik),
        logprior_fn,
        third_deriv_lik_fn: Some(Box::new(flat_bound)),
        third_deriv_post_fn: Some(Box::new(flat_bound)),
        prior_envelope_fn: Some(prior_envelope_fn),
        prior_tail_moment_fn: Some(prior_tail_moment_fn),
        optimality_gap_fn: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy_data() -> (Vec<Vec<f64>>, Vec<f64>) {
        (
            vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![0.5, -0.5], vec![-1.0, 1.0]],
            vec![1.0, -1.0, 1.0, -1.0],
        )
    }

    fn t_model() -> ModelDescriptor {
        let (x, y) = toy_data();
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        logistic_t_model(&x, &y, &[0.1, -0.2], &sigma, 4.0).unwrap()
    }

    #[test]
    fn third_derivative_bound_example() {
        // Two rows with norms 1 and 2: (1 + 8) / (6 sqrt(3) * 2).
        let m = logistic_gaussian_model(&[vec![1.0, 0.0], vec![0.0, 2.0]], &[1.0, -1.0]).unwrap();
        let c = DVector::zeros(2);
        assert_relative_eq!(
            m.third_deriv_bound_lik(&c, 0.3).unwrap(),
            9.0 / (12.0 * 3.0_f64.sqrt()),
            epsilon = 1e-14
        );
        // Fourth-derivative pad: (1 + 16) / (8 * 2).
        assert_relative_eq!(m.fourth_deriv_bound.unwrap(), 17.0 / 16.0, epsilon = 1e-14);
    }

    #[test]
    fn loglik_derivatives_match_finite_differences() {
        let m = t_model();
        let theta = DVector::from_column_slice(&[0.3, -0.7]);
        let e = m.loglik(&theta);
        let h = 1e-6;
        for i in 0..2 {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (m.loglik(&up).value - m.loglik(&dn).value) / (2.0 * h);
            assert_relative_eq!(e.grad[i], fd, max_relative = 1e-5, epsilon = 1e-9);
            for j in 0..2 {
                let fd_h = (m.loglik(&up).grad[j] - m.loglik(&dn).grad[j]) / (2.0 * h);
                assert_relative_eq!(e.hess[(j, i)], fd_h, max_relative = 1e-5, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn t_prior_derivatives_match_finite_differences() {
        // Non-diagonal scale matrix exercises the full matrix calculus.
        let m = t_model();
        let theta = DVector::from_column_slice(&[0.8, 0.4]);
        let e = m.logprior(&theta);
        let h = 1e-6;
        for i in 0..2 {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (m.logprior(&up).value - m.logprior(&dn).value) / (2.0 * h);
            assert_relative_eq!(e.grad[i], fd, max_relative = 1e-5, epsilon = 1e-9);
            for j in 0..2 {
                let fd_h = (m.logprior(&up).grad[j] - m.logprior(&dn).grad[j]) / (2.0 * h);
                assert_relative_eq!(e.hess[(j, i)], fd_h, max_relative = 1e-5, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn t_prior_integrates_to_one_in_1d() {
        // Sanity-check the normalising constant by quadrature in d = 1.
        let m = logistic_t_model(&[vec![1.0]], &[1.0], &[0.5], &DMatrix::from_element(1, 1, 2.0), 3.0)
            .unwrap();
        let f = |t: f64| m.logprior(&DVector::from_element(1, t)).value.exp();
        // Split at the peak neighbourhood so the seed panels resolve it,
        // and go far out to capture the heavy nu = 3 tails.
        let mass = crate::quad::adaptive_simpson(&f, -500.0, -10.0, 1e-10)
            + crate::quad::adaptive_simpson(&f, -10.0, 10.0, 1e-10)
            + crate::quad::adaptive_simpson(&f, 10.0, 500.0, 1e-10);
        assert_relative_eq!(mass, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn t_envelope_dominates_sampled_points() {
        let m = t_model();
        let center = DVector::from_column_slice(&[0.4, 0.1]);
        let radius = 0.9;
        let env = m.prior_envelope(&center, radius).unwrap();
        for i in 0..200 {
            let ang = i as f64 * 0.31;
            let r = radius * ((i % 10) as f64 / 10.0);
            let theta = DVector::from_column_slice(&[
                center[0] + r * ang.cos(),
                center[1] + r * ang.sin(),
            ]);
            let e = m.logprior(&theta);
            assert!(env.m1_tilde >= e.value.exp() * (1.0 - 1e-12));
            assert!(env.m1_hat >= (-e.value).exp() * (1.0 - 1e-12));
            assert!(env.m1 >= e.grad.norm() * (1.0 - 1e-12));
        }
    }

    #[test]
    fn gaussian_envelope_dominates_sampled_points() {
        let (x, y) = toy_data();
        let m = logistic_gaussian_model(&x, &y).unwrap();
        let center = DVector::from_column_slice(&[1.0, -0.5]);
        let radius = 0.8;
        let env = m.prior_envelope(&center, radius).unwrap();
        for i in 0..200 {
            let ang = i as f64 * 0.37;
            let r = radius * ((i % 7) as f64 / 7.0);
            let theta = DVector::from_column_slice(&[
                center[0] + r * ang.cos(),
                center[1] + r * ang.sin(),
            ]);
            let e = m.logprior(&theta);
            assert!(env.m1_tilde >= e.value.exp() * (1.0 - 1e-12));
            assert!(env.m1_hat >= (-e.value).exp() * (1.0 - 1e-12));
            assert!(env.m1 >= e.grad.norm() * (1.0 - 1e-12));
        }
    }

    #[test]
    fn t_posterior_third_bound_needs_small_radius() {
        let m = t_model();
        let c = DVector::zeros(2);
        assert!(m.third_deriv_bound_post(&c, 0.5).unwrap() > m.third_deriv_bound_lik(&c, 0.5).unwrap());
        assert!(m.third_deriv_bound_post(&c, 1.5).is_err());
    }

    #[test]
    fn tail_moments_by_degrees_of_freedom() {
        let (x, y) = toy_data();
        let sigma = DMatrix::identity(2, 2);
        let m4 = logistic_t_model(&x, &y, &[0.0, 0.0], &sigma, 4.0).unwrap();
        let c = DVector::from_column_slice(&[1.0, 0.0]);
        // nu = 4: tr(Sigma) nu / (nu - 2) + ||mu - c||^2 = 4 + 1.
        assert_relative_eq!(m4.prior_tail_moment(&c, 0.5, 2).unwrap(), 5.0, epsilon = 1e-12);
        assert!(m4.prior_tail_moment(&c, 0.5, 1).unwrap() <= 5.0_f64.sqrt());
        let m15 = logistic_t_model(&x, &y, &[0.0, 0.0], &sigma, 1.5).unwrap();
        assert!(m15.prior_tail_moment(&c, 0.5, 2).is_err());
        assert!(m15.prior_tail_moment(&c, 0.5, 1).is_ok());
    }

    #[test]
    fn gaussian_prior_second_moment() {
        let (x, y) = toy_data();
        let m = logistic_gaussian_model(&x, &y).unwrap();
        let c = DVector::from_column_slice(&[1.0, 1.0]);
        assert_relative_eq!(m.prior_tail_moment(&c, 0.3, 2).unwrap(), 4.0, epsilon = 1e-12);
    }
}
