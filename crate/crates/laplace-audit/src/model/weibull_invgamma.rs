//! Weibull likelihood (known shape) with an inverse-gamma prior on the
//! scale-like parameter.
//!
//! For observations `X_1..X_n > 0` with known shape `k` and parameter
//! `theta > 0` (the mean of `X^k`):
//! `L_n(theta) = n ln k - n ln theta + (k - 1) sum ln X - s / theta`,
//! where `s = sum X_k^k`, so the maximum-likelihood estimate is
//! `theta_hat = s / n`. The prior is `InvGamma(alpha, beta)` and the
//! conjugate posterior is `InvGamma(alpha + n, beta + s)`.
//!
//! Third derivatives have the closed form `2 (3 s - n theta) / theta^4`
//! (likelihood) and `2 (3 (s + beta) - (n + alpha + 1) theta) / theta^4`
//! (posterior); their absolute value over an interval is maximal at an
//! endpoint or at the interior critical point `4 s / n` (resp.
//! `4 (s + beta) / (n + alpha + 1)`). The prior score
//! `pi'/pi = beta / theta^2 - (alpha + 1) / theta` is likewise extremal at
//! an endpoint or at `2 beta / (alpha + 1)`.

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use super::{out_of_support, two_endpoint_gap};
use super::{ConjugatePosterior, LogDensityEval, ModelDescriptor, PriorEnvelope};
use crate::error::{AuditError, Result};

/// Build a Weibull model with known shape `k` and an
/// `InvGamma(alpha, beta)` prior on the scale-like parameter.
pub fn weibull_invgamma_model(data: &[f64], k: f64, alpha: f64, beta: f64) -> Result<ModelDescriptor> {
    if data.is_empty() {
        return Err(AuditError::Invalid("empty dataset".into()));
    }
    if !(k > 0.0) {
        return Err(AuditError::Invalid(format!(
            "Weibull shape must be positive, got {k}"
        )));
    }
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(AuditError::Invalid(format!(
            "inverse-gamma prior parameters must be positive, got shape {alpha}, scale {beta}"
        )));
    }
    if data.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(AuditError::Invalid(
            "Weibull observations must be finite and positive".into(),
        ));
    }
    let n = data.len();
    let nf = n as f64;
    let s: f64 = data.iter().map(|x| x.powf(k)).sum();
    let sum_ln: f64 = data.iter().map(|x| x.ln()).sum();

    let mle = s / nf;
    let map = (beta + s) / (nf + alpha + 1.0);

    let lik_const = nf * k.ln() + (k - 1.0) * sum_ln;
    let loglik_scalar = move |t: f64| lik_const - nf * t.ln() - s / t;

    let log_prior_norm = alpha * beta.ln() - ln_gamma(alpha);
    let log_prior = move |t: f64| log_prior_norm - (alpha + 1.0) * t.ln() - beta / t;
    let prior_score = move |t: f64| beta / (t * t) - (alpha + 1.0) / t;

    let loglik_fn = Box::new(move |theta: &DVector<f64>| {
        let t = theta[0];
        if t <= 0.0 {
            return out_of_support(1);
        }
        LogDensityEval {
            value: loglik_scalar(t),
            grad: DVector::from_element(1, -nf / t + s / (t * t)),
            hess: DMatrix::from_element(1, 1, nf / (t * t) - 2.0 * s / t.powi(3)),
        }
    });

    let logprior_fn = Box::new(move |theta: &DVector<f64>| {
        let t = theta[0];
        if t <= 0.0 {
            return out_of_support(1);
        }
        LogDensityEval {
            value: log_prior(t),
            grad: DVector::from_element(1, prior_score(t)),
            hess: DMatrix::from_element(1, 1, (alpha + 1.0) / (t * t) - 2.0 * beta / t.powi(3)),
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

    // sup over [lo, hi] of |2 (3 s_eff - n_eff theta) / theta^4| / n, where
    // the interior critical point of the absolute value is 4 s_eff / n_eff.
    let third_sup = move |lo: f64, hi: f64, s_eff: f64, n_eff: f64| -> f64 {
        let h = |t: f64| (2.0 * (3.0 * s_eff - n_eff * t) / t.powi(4)).abs();
        let mut sup = h(lo).max(h(hi));
        let crit = 4.0 * s_eff / n_eff;
        if crit > lo && crit < hi {
            sup = sup.max(h(crit));
        }
        sup / nf
    };

    let third_deriv_lik_fn = Box::new(move |center: &DVector<f64>, radius: f64| {
        let (lo, hi) = ball(center, radius)?;
        Ok(third_sup(lo, hi, s, nf))
    });

    let third_deriv_post_fn = Box::new(move |center: &DVector<f64>, radius: f64| {
        let (lo, hi) = ball(center, radius)?;
        Ok(third_sup(lo, hi, s + beta, nf + alpha + 1.0))
    });

    let prior_envelope_fn = Box::new(move |center: &DVector<f64>, radius: f64| {
        let (lo, hi) = ball(center, radius)?;
        // The density is unimodal with mode beta / (alpha + 1): its maximum
        // over [lo, hi] sits at the clamped mode, its minimum at an endpoint.
        let mode = (beta / (alpha + 1.0)).clamp(lo, hi);
        let m1_tilde = log_prior(mode).exp();
        let m1_hat = (-log_prior(lo)).exp().max((-log_prior(hi)).exp());
        let mut m1 = prior_score(lo).abs().max(prior_score(hi).abs());
        let crit = 2.0 * beta / (alpha + 1.0);
        if crit > lo && crit < hi {
            m1 = m1.max(prior_score(crit).abs());
        }
        Ok(PriorEnvelope { m1, m1_tilde, m1_hat })
    });

    let prior_tail_moment_fn = Box::new(move |center: &DVector<f64>, _excl: f64, p: u32| {
        let c = center[0];
        let mean = if alpha > 1.0 { beta / (alpha - 1.0) } else { f64::INFINITY };
        match p {
            2 => {
                if alpha <= 2.0 {
                    return Err(AuditError::Unavailable(
                        "second tail moment infinite: inverse-gamma prior needs shape > 2".into(),
                    ));
                }
                let var = beta * beta / ((alpha - 1.0).powi(2) * (alpha - 2.0));
                Ok(var + (mean - c).powi(2))
            }
            1 => {
                // E|theta - c| <= E theta + c since theta > 0; tighten with
                // the root of the second moment when that exists.
                if !mean.is_finite() {
                    return Err(AuditError::Unavailable(
                        "first tail moment infinite: inverse-gamma prior needs shape > 1".into(),
                    ));
                }
                let linear = mean + c.abs();
                if alpha > 2.0 {
                    let var = beta * beta / ((alpha - 1.0).powi(2) * (alpha - 2.0));
                    Ok(linear.min((var + (mean - c).powi(2)).sqrt()))
                } else {
                    Ok(linear)
                }
            }
            _ => Err(AuditError::Invalid(format!(
                "tail moment order must be 1 or 2, got {p}"
            ))),
        }
    });

    let optimality_gap_fn = Box::new(move |r: f64| {
        two_endpoint_gap(&loglik_scalar, mle, r, Some(0.0), nf)
    });

    Ok(ModelDescriptor {
        family: "weibull-invgamma".into(),
        d: 1,
        n,
        support_lower: Some(0.0),
        concave_loglik: false,
        init_mle: DVector::from_element(1, mle),
        init_map: DVector::from_element(1, map),
        conjugate: Some(ConjugatePosterior::InvGamma {
            shape: alpha + nf,
            scale: beta + s,
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
