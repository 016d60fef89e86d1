//! Poisson likelihood with a gamma prior on the mean.
//!
//! For counts `X_1..X_n` with mean `theta > 0`:
//! `L_n(theta) = -n theta + (sum X) ln theta - sum ln Gamma(X_k + 1)`,
//! prior `Gamma(alpha, beta)` with `alpha < 1` (decreasing density), and
//! conjugate posterior `Gamma(alpha + sum X, beta + n)`.
//!
//! Analytic oracles over a ball `[lo, hi] = [c - r, c + r]` with `lo > 0`:
//! * likelihood third derivative: `|L_n'''| = 2 (sum X) / theta^3`, maximal
//!   at `lo`, divided by `n`;
//! * posterior third derivative: `2 |sum X + alpha - 1| / lo^3 / n`;
//! * prior envelope for the decreasing gamma density:
//!   `M1_tilde = pi(lo)`, `M1_hat = 1 / pi(hi)`, and
//!   `M1 = sup|pi'| * sup(1/pi) = pi(lo)/pi(hi) * ((1 - alpha) + beta lo)/lo`;
//! * truncated prior moments are bounded by the full-space moments of the
//!   gamma prior about the given center;
//! * the log-likelihood drop outside a ball around the sample mean is
//!   attained at the ball's endpoints because `L_n` is unimodal.

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use super::{out_of_support, two_endpoint_gap};
use super::{ConjugatePosterior, LogDensityEval, ModelDescriptor, PriorEnvelope};
use crate::error::{AuditError, Result};

/// Build a Poisson-gamma model from count data and prior shape
/// `alpha` in `(0, 1)` and rate `beta > 0`.
pub fn poisson_gamma_model(data: &[f64], alpha: f64, beta: f64) -> Result<ModelDescriptor> {
    if data.is_empty() {
        return Err(AuditError::Invalid("empty dataset".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(AuditError::Invalid(format!(
            "gamma prior shape must lie in (0, 1) for a decreasing density, got {alpha}"
        )));
    }
    if !(beta > 0.0) {
        return Err(AuditError::Invalid(format!(
            "gamma prior rate must be positive, got {beta}"
        )));
    }
    if data.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(AuditError::Invalid(
            "Poisson counts must be finite and non-negative".into(),
        ));
    }
    let n = data.len();
    let nf = n as f64;
    let sum_x: f64 = data.iter().sum();
    let sum_lgamma: f64 = data.iter().map(|x| ln_gamma(x + 1.0)).sum();
    if sum_x <= 0.0 {
        return Err(AuditError::Invalid(
            "all counts are zero; the likelihood has no interior maximum".into(),
        ));
    }

    let mle = sum_x / nf;
    let map = (sum_x + alpha - 1.0) / (nf + beta);
    let map_init = if map > 0.0 { map } else { mle };

    let log_prior_norm = alpha * beta.ln() - ln_gamma(alpha);
    let log_prior = move |t: f64| log_prior_norm + (alpha - 1.0) * t.ln() - beta * t;

    let loglik_scalar = move |t: f64| -nf * t + sum_x * t.ln() - sum_lgamma;

    let loglik_fn = Box::new(move |theta: &DVector<f64>| {
        let t = theta[0];
        if t <= 0.0 {
            return out_of_support(1);
        }
        LogDensityEval {
            value: loglik_scalar(t),
            grad: DVector::from_element(1, -nf + sum_x / t),
            hess: DMatrix::from_element(1, 1, -sum_x / (t * t)),
        }
    });

    let logprior_fn = Box::new(move |theta: &DVector<f64>| {
        let t = theta[0];
        if t <= 0.0 {
            return out_of_support(1);
        }
        LogDensityEval {
            value: log_prior(t),
            grad: DVector::from_element(1, (alpha - 1.0) / t - beta),
            hess: DMatrix::from_element(1, 1, -(alpha - 1.0) / (t * t)),
        }
    });

    let ball = |center: &DVector<f64>, radius: f64| -> Result<(f64, f64)> {
        let (lo, hi) = (center[0] - radius, center[0] + radius);
        if lo <= 0.0 {
            return Err(AuditError::Invalid(format!(
                "ball [{lo}, {hi}] touches the support boundary theta = 0"
            )));
        }
        Ok((lo, hi))
    };

    let third_deriv_lik_fn = Box::new(move |center: &DVector<f64>, radius: f64| {
        let (lo, _) = ball(center, radius)?;
        Ok(2.0 * sum_x / (nf * lo.powi(3)))
    });

    let third_deriv_post_fn = Box::new(move |center: &DVector<f64>, radius: f64| {
        let (lo, _) = ball(center, radius)?;
        Ok(2.0 * (sum_x + alpha - 1.0).abs() / (nf * lo.powi(3)))
    });

    let prior_envelope_fn = Box::new(move |center: &DVector<f64>, radius: f64| {
        let (lo, hi) = ball(center, radius)?;
        let (lp_lo, lp_hi) = (log_prior(lo), log_prior(hi));
        Ok(PriorEnvelope {
            m1: (lp_lo - lp_hi).exp() * ((1.0 - alpha) + beta * lo) / lo,
            m1_tilde: lp_lo.exp(),
            m1_hat: (-lp_hi).exp(),
        })
    });

    // Full-space second moment of the prior about the center dominates any
    // truncated tail moment; the first tail moment is bounded by its root.
    let prior_tail_moment_fn = Box::new(move |center: &DVector<f64>, _excl: f64, p: u32| {
        let mean = alpha / beta;
        let var = alpha / (beta * beta);
        let p2 = var + (mean - center[0]).powi(2);
        match p {
            1 => Ok(p2.sqrt()),
            2 => Ok(p2),
            _ => Err(AuditError::Invalid(format!(
                "tail moment order must be 1 or 2, got {p}"
            ))),
        }
    });

    let optimality_gap_fn = Box::new(move |r: f64| {
        two_endpoint_gap(&loglik_scalar, mle, r, Some(0.0), nf)
    });

    Ok(ModelDescriptor {
        family: "poisson-gamma".into(),
        d: 1,
        n,
        support_lower: Some(0.0),
        concave_loglik: true,
        init_mle: DVector::from_element(1, mle),
        init_map: DVector::from_element(1, map_init),
        conjugate: Some(ConjugatePosterior::Gamma {
            shape: alpha + sum_x,
            rate: beta + nf,
        }),
        fourth_deriv_bound: None,
        loglik_fn,
        logprior_fn,
        third_deriv_lik_fn: Some(third_deriv_lik_fn),
        third_deriv_post_fn: Some(third_deriv_post_fn),
        prior_envelope_fn: Some(prior_envelope_fn),
        prior_tail_moment_fn: Some(prior_tail_moment_fn),
        optimality_gap_fn: Some(optimality_gap_fn),
    })
}
