//! Statistical model descriptors.
//!
//! A [`ModelDescriptor`] packages everything the rest of the crate needs to
//! audit a Bayesian posterior at finite sample size: cheap evaluators for the
//! log-likelihood `L_n` (value, gradient, Hessian) and the log-prior
//! (value, gradient, Hessian), plus optional analytic oracles for the
//! constants that enter the error certificates:
//!
//! * a bound on the operator norm of the third derivative tensor of
//!   `L_n / n` (likelihood) and of `(L_n + log pi) / n` (posterior) over a
//!   ball,
//! * prior envelope constants `M1 = sup ||pi' / pi||`, `M1_tilde = sup pi`,
//!   `M1_hat = sup 1 / pi` over a ball,
//! * truncated prior moments `int_{||v - c|| > r} ||v - c||^p pi(v) dv`,
//! * the log-likelihood drop `kappa(r) = -sup_{||t - mode|| > r} (L_n(t) -
//!   L_n(mode)) / n` outside a ball around the maximum-likelihood estimate.
//!
//! The 1-D families additionally carry their conjugate posterior so that
//! exact ground truth is available for validation.

use nalgebra::{DMatrix, DVector};

use crate::error::{AuditError, Result};

pub mod dataset;
mod logistic;
mod poisson_gamma;
mod weibull_invgamma;

pub use dataset::{gen_exponential, gen_logistic, gen_weibull, Dataset};
pub use logistic::{logistic_gaussian_model, logistic_t_model};
pub use poisson_gamma::poisson_gamma_model;
pub use weibull_invgamma::weibull_invgamma_model;

/// Value, gradient and Hessian of a log-density at a point.
#[derive(Debug, Clone)]
pub struct LogDensityEval {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

/// Envelope constants of the prior density over a ball `B(center, radius)`:
/// `m1 = sup ||pi'/pi||`, `m1_tilde = sup pi`, `m1_hat = sup 1/pi`.
#[derive(Debug, Clone, Copy)]
pub struct PriorEnvelope {
    pub m1: f64,
    pub m1_tilde: f64,
    pub m1_hat: f64,
}

/// Conjugate posterior family attached to a model, when one exists.
#[derive(Debug, Clone, Copy)]
pub enum ConjugatePosterior {
    /// `Gamma(shape, rate)` posterior for a Poisson mean with a gamma prior.
    Gamma { shape: f64, rate: f64 },
    /// `InvGamma(shape, scale)` posterior for a Weibull scale with an
    /// inverse-gamma prior.
    InvGamma { shape: f64, scale: f64 },
}

type EvalFn = Box<dyn Fn(&DVector<f64>) -> LogDensityEval + Send + Sync>;
type BallBoundFn = Box<dyn Fn(&DVector<f64>, f64) -> Result<f64> + Send + Sync>;
type EnvelopeFn = Box<dyn Fn(&DVector<f64>, f64) -> Result<PriorEnvelope> + Send + Sync>;
type TailMomentFn = Box<dyn Fn(&DVector<f64>, f64, u32) -> Result<f64> + Send + Sync>;
type GapFn = Box<dyn Fn(f64) -> Result<f64> + Send + Sync>;

/// A statistical model with evaluators and optional analytic oracles.
///
/// Build one with the family constructors ([`poisson_gamma_model`],
/// [`weibull_invgamma_model`], [`logistic_t_model`],
/// [`logistic_gaussian_model`]).
pub struct ModelDescriptor {
    /// Human-readable family name, e.g. `"poisson-gamma"`.
    pub family: String,
    /// Parameter dimension.
    pub d: usize,
    /// Sample size.
    pub n: usize,
    /// Lower edge of the parameter support for 1-D positive-parameter
    /// families; `None` for full-space parameters.
    pub support_lower: Option<f64>,
    /// Whether the log-likelihood is globally concave on its support.
    pub concave_loglik: bool,
    /// Starting point for the maximum-likelihood search.
    pub init_mle: DVector<f64>,
    /// Starting point for the posterior-mode search.
    pub init_map: DVector<f64>,
    /// Conjugate posterior, when the family admits one.
    pub conjugate: Option<ConjugatePosterior>,
    /// Optional global bound on the fourth derivative of `L_n / n`, used to
    /// pad grid-based third-derivative scans.
    pub fourth_deriv_bound: Option<f64>,

    pub(crate) loglik_fn: EvalFn,
    pub(crate) logprior_fn: EvalFn,
    pub(crate) third_deriv_lik_fn: Option<BallBoundFn>,
    pub(crate) third_deriv_post_fn: Option<BallBoundFn>,
    pub(crate) prior_envelope_fn: Option<EnvelopeFn>,
    pub(crate) prior_tail_moment_fn: Option<TailMomentFn>,
    pub(crate) optimality_gap_fn: Option<GapFn>,
}

impl std::fmt::Debug for ModelDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelDescriptor")
            .field("family", &self.family)
            .field("d", &self.d)
            .field("n", &self.n)
            .field("support_lower", &self.support_lower)
            .field("concave_loglik", &self.concave_loglik)
            .finish_non_exhaustive()
    }
}

impl ModelDescriptor {
    /// Log-likelihood `L_n(theta)` with gradient and Hessian.
    ///
    /// Outside the parameter support the value is `-inf` with zero
    /// derivatives.
    pub fn loglik(&self, theta: &DVector<f64>) -> LogDensityEval {
        (self.loglik_fn)(theta)
    }

    /// Log-prior with gradient and Hessian; `-inf` outside the support.
    pub fn logprior(&self, theta: &DVector<f64>) -> LogDensityEval {
        (self.logprior_fn)(theta)
    }

    /// Unnormalised log-posterior `L_n(theta) + log pi(theta)`.
    pub fn logpost(&self, theta: &DVector<f64>) -> LogDensityEval {
        let l = self.loglik(theta);
        let p = self.logprior(theta);
        LogDensityEval {
            value: l.value + p.value,
            grad: l.grad + p.grad,
            hess: l.hess + p.hess,
        }
    }

    /// Analytic bound on the third derivative of `L_n / n` over
    /// `B(center, radius)`.
    pub fn third_deriv_bound_lik(&self, center: &DVector<f64>, radius: f64) -> Result<f64> {
        match &self.third_deriv_lik_fn {
            Some(f) => f(center, radius),
            None => Err(AuditError::Unavailable(format!(
                "no analytic likelihood third-derivative bound for family {}",
                self.family
            ))),
        }
    }

    /// Analytic bound on the third derivative of `(L_n + log pi) / n` over
    /// `B(center, radius)`.
    pub fn third_deriv_bound_post(&self, center: &DVector<f64>, radius: f64) -> Result<f64> {
        match &self.third_deriv_post_fn {
            Some(f) => f(center, radius),
            None => Err(AuditError::Unavailable(format!(
                "no analytic posterior third-derivative bound for family {}",
                self.family
            ))),
        }
    }

    /// Prior envelope constants over `B(center, radius)`.
    pub fn prior_envelope(&self, center: &DVector<f64>, radius: f64) -> Result<PriorEnvelope> {
        match &self.prior_envelope_fn {
            Some(f) => f(center, radius),
            None => Err(AuditError::Unavailable(format!(
                "no prior envelope oracle for family {}",
                self.family
            ))),
        }
    }

    /// Truncated prior moment `int_{||v - center|| > exclusion} ||v -
    /// center||^p pi(v) dv` for `p` in `{1, 2}`.
    pub fn prior_tail_moment(&self, center: &DVector<f64>, exclusion: f64, p: u32) -> Result<f64> {
        match &self.prior_tail_moment_fn {
            Some(f) => f(center, exclusion, p),
            None => Err(AuditError::Unavailable(format!(
                "no prior tail-moment oracle for family {}",
                self.family
            ))),
        }
    }

    /// Analytic log-likelihood drop outside `B(mle, exclusion_radius)`,
    /// when the family provides one.
    pub fn optimality_gap(&self, exclusion_radius: f64) -> Result<f64> {
        match &self.optimality_gap_fn {
            Some(f) => f(exclusion_radius),
            None => Err(AuditError::Unavailable(format!(
                "no analytic optimality-gap oracle for family {}",
                self.family
            ))),
        }
    }
}

/// Evaluation at a point outside the parameter support: `-inf` value with
/// zero derivatives, so line searches reject the step naturally.
pub(crate) fn out_of_support(d: usize) -> LogDensityEval {
    LogDensityEval {
        value: f64::NEG_INFINITY,
        grad: DVector::zeros(d),
        hess: DMatrix::zeros(d, d),
    }
}

/// Generic two-endpoint optimality gap for a unimodal 1-D log-likelihood:
/// on `{|t - mle| > r}` the supremum of `L_n` is attained as `t -> mle +- r`,
/// so `kappa = -max(L_n(mle +- r) - L_n(mle)) / n`, skipping endpoints that
/// fall outside the support.
pub(crate) fn two_endpoint_gap(
    loglik: &dyn Fn(f64) -> f64,
    mle: f64,
    r: f64,
    support_lower: Option<f64>,
    n: f64,
) -> Result<f64> {
    if !(r > 0.0) {
        return Err(AuditError::Invalid(format!(
            "exclusion radius must be positive, got {r}"
        )));
    }
    let at_mode = loglik(mle);
    let mut best = f64::NEG_INFINITY;
    for endpoint in [mle - r, mle + r] {
        if let Some(lo) = support_lower {
            if endpoint <= lo {
                continue;
            }
        }
        best = best.max(loglik(endpoint));
    }
    if !best.is_finite() {
        // The whole exclusion region is outside the support: the posterior
        // carries no mass there and the drop is effectively unbounded.
        return Ok(f64::INFINITY);
    }
    Ok((at_mode - best) / n)
}
