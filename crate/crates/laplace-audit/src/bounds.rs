//! Closed-form finite-sample error bounds for the Gaussian approximation.
//!
//! Every bound controls a distance between the law of the rescaled
//! posterior variable (`sqrt(n)(theta - mode)`) and the matching Gaussian
//! (`N(0, J_bar^{-1})` for posterior-mode centring, `N(0, J_hat^{-1})` for
//! likelihood centring). Each bound splits into named components:
//!
//! * `interior*`: Taylor/log-Sobolev control inside the certificate ball,
//!   decaying as `1 / sqrt(n)`;
//! * `escape`, `prior_tail`, `mass_ratio`: exponentially small terms paying
//!   for posterior and Gaussian mass outside the ball.
//!
//! Exponential factors such as `n^{d/2} e^{-n kappa} M1_hat |det J_plus|^{1/2}`
//! are evaluated as the exponential of a summed log expression: the raw
//! factors overflow for moderate `d` and `n` while the product underflows.
//! Denominators `1 - D` are policy-checked: any decay factor within
//! `1e-12` of one makes the bound `+inf` with a note naming the factor,
//! never a silent near-singular value.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::certificates::{Centric, ConstantSet};
use crate::error::{AuditError, Result};
use crate::geometry::{shifted_pair, CurvatureSummary, Geometry};
use crate::model::ModelDescriptor;
use crate::quad::{adaptive_simpson, integrate_left_tail, integrate_right_tail};

const LN_2PI: f64 = 1.8378770664093453;
const SQRT_3: f64 = 1.7320508075688772;

/// The four exponential decay factors. Posterior-mode fields are `NaN`
/// when the constants were built for likelihood centring only.
#[derive(Debug, Clone, Copy)]
pub struct DecaySet {
    pub d_map: f64,
    pub d_map_plus: f64,
    pub d_mle: f64,
    pub d_mle_plus: f64,
}

/// One bound with its additive components. `total` is exactly the sum of
/// the component values; an infinite bound carries a note naming the
/// violated factor.
#[derive(Debug, Clone)]
pub struct BoundValue {
    pub total: f64,
    pub components: Vec<(String, f64)>,
    pub note: Option<String>,
}

impl BoundValue {
    fn from_components(components: Vec<(&str, f64)>) -> Self {
        let components: Vec<(String, f64)> =
            components.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        let total = components.iter().map(|(_, v)| v).sum();
        BoundValue { total, components, note: None }
    }

    fn infinite(note: String) -> Self {
        BoundValue { total: f64::INFINITY, components: Vec::new(), note: Some(note) }
    }
}

/// All three bounds for one centring convention, with the derived
/// mean/covariance corollaries on the raw parameter scale.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub tv: BoundValue,
    pub w1: BoundValue,
    pub cov_ipm: BoundValue,
    /// `w1 / sqrt(n)`: certified bound on the posterior-mean error.
    pub mean_error: f64,
    /// `(w1^2 + cov_ipm) / n`: certified bound on the covariance error.
    pub cov_error: f64,
}

/// One decay factor: `exp(-(radius sqrt(n) - sqrt(trace_inv))^2
/// lambda_min / 2)`, requiring `radius sqrt(n) > sqrt(trace_inv)`.
pub fn decay_term(radius: f64, trace_inv: f64, lambda_min: f64, n: f64) -> Result<f64> {
    let slack = radius * n.sqrt() - trace_inv.sqrt();
    if !(slack > 0.0) {
        return Err(AuditError::Infeasible(format!(
            "n too small for a certificate: need radius*sqrt(n) > sqrt(trace(J^-1)) \
             (radius {radius}, trace {trace_inv}, n {n})"
        )));
    }
    Ok((-0.5 * slack * slack * lambda_min).exp())
}

/// All four decay factors at sample size `n`.
pub fn decay_terms(geom: &Geometry, cs: &ConstantSet, n: f64) -> Result<DecaySet> {
    let sp_mle = shifted_pair(&geom.curv_mle.j, cs.delta, cs.m2);
    let d_mle = decay_term(cs.delta, geom.curv_mle.trace_inv, geom.curv_mle.lambda_min, n)?;
    let d_mle_plus = decay_term(cs.delta, sp_mle.trace_inv_plus()?, sp_mle.lambda_min_plus(), n)?;
    let (d_map, d_map_plus) = if cs.delta_bar.is_finite() {
        let sp_map = shifted_pair(&geom.curv_map.j, cs.delta_bar, cs.m2_bar);
        (
            decay_term(cs.delta_bar, geom.curv_map.trace_inv, geom.curv_map.lambda_min, n)?,
            decay_term(cs.delta_bar, sp_map.trace_inv_plus()?, sp_map.lambda_min_plus(), n)?,
        )
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(DecaySet { d_map, d_map_plus, d_mle, d_mle_plus })
}

/// `1 - decay` with the near-singularity policy applied.
fn denom(decay: f64, name: &str) -> std::result::Result<f64, String> {
    let one_minus = 1.0 - decay;
    if !(one_minus > 1e-12) {
        return Err(format!("decay factor {name} is within 1e-12 of 1; bound unusable"));
    }
    Ok(one_minus)
}

/// Log of the escape factor `n^{d/2 + extra} e^{-n kappa} M1_hat
/// |det J_plus|^{1/2} / (2 pi)^{d/2}`.
fn escape_log(d: f64, n: f64, kappa: f64, m1_hat: f64, logdet_plus: f64, extra: f64) -> f64 {
    (d / 2.0 + extra) * n.ln() - n * kappa + m1_hat.ln() + 0.5 * logdet_plus - (d / 2.0) * LN_2PI
}

struct MapPieces {
    margin: f64,
    om_d_map: f64,
    om_dp_mle: f64,
    logdet_jp_mle: f64,
    /// escape factor with no extra power of n, divided by `1 - D_mle_plus`
    tail0: f64,
}

fn map_pieces(
    model: &ModelDescriptor,
    geom: &Geometry,
    cs: &ConstantSet,
    dec: &DecaySet,
    n: f64,
) -> Result<std::result::Result<MapPieces, String>> {
    let margin = geom.curv_map.lambda_min - cs.delta_bar * cs.m2_bar;
    if !(margin > 0.0) {
        return Err(AuditError::Assumption {
            name: "a5".into(),
            detail: format!(
                "posterior curvature margin non-positive: lambda_min {} <= delta_bar*m2_bar {}",
                geom.curv_map.lambda_min,
                cs.delta_bar * cs.m2_bar
            ),
        });
    }
    let sp_mle = shifted_pair(&geom.curv_mle.j, cs.delta, cs.m2);
    let logdet_jp_mle = sp_mle.logdet_plus()?;
    let inner = (|| {
        let om_d_map = denom(dec.d_map, "D_map")?;
        let om_dp_mle = denom(dec.d_mle_plus, "D_mle_plus")?;
        let tail0 =
            escape_log(model.d as f64, n, cs.kappa_bar, cs.m1_hat, logdet_jp_mle, 0.0).exp()
                / om_dp_mle;
        Ok(MapPieces { margin, om_d_map, om_dp_mle, logdet_jp_mle, tail0 })
    })();
    Ok(inner)
}

struct MlePieces {
    margin: f64,
    om_d_mle: f64,
    om_dp_mle: f64,
    logdet_jp: f64,
    tail0: f64,
}

fn mle_pieces(
    model: &ModelDescriptor,
    geom: &Geometry,
    cs: &ConstantSet,
    dec: &DecaySet,
    n: f64,
) -> Result<std::result::Result<MlePieces, String>> {
    let margin = geom.curv_mle.lambda_min - cs.delta * cs.m2;
    if !(margin > 0.0) {
        return Err(AuditError::Assumption {
            name: "a8".into(),
            detail: format!(
                "likelihood curvature margin non-positive: lambda_min {} <= delta*m2 {}",
                geom.curv_mle.lambda_min,
                cs.delta * cs.m2
            ),
        });
    }
    let sp = shifted_pair(&geom.curv_mle.j, cs.delta, cs.m2);
    let logdet_jp = sp.logdet_plus()?;
    let inner = (|| {
        let om_d_mle = denom(dec.d_mle, "D_mle")?;
        let om_dp_mle = denom(dec.d_mle_plus, "D_mle_plus")?;
        let tail0 = escape_log(model.d as f64, n, cs.kappa, cs.m1_hat, logdet_jp, 0.0).exp()
            / om_dp_mle;
        Ok(MlePieces { margin, om_d_mle, om_dp_mle, logdet_jp, tail0 })
    })();
    Ok(inner)
}

/// Total-variation bound for the chosen centring convention.
pub fn tv_bound(
    model: &ModelDescriptor,
    geom: &Geometry,
    cs: &ConstantSet,
    dec: &DecaySet,
    centric: Centric,
    n: f64,
) -> Result<BoundValue> {
    match centric {
        Centric::Map => {
            let p = match map_pieces(model, geom, cs, dec, n)? {
                Ok(p) => p,
                Err(note) => return Ok(BoundValue::infinite(note)),
            };
            let interior = SQRT_3 * geom.curv_map.trace_inv * cs.m2_bar
                / (4.0 * (n * p.margin * p.om_d_map).sqrt());
            let escape = 2.0 * dec.d_map + 2.0 * p.tail0;
            Ok(BoundValue::from_components(vec![("interior", interior), ("escape", escape)]))
        }
        Centric::Mle => {
            let p = match mle_pieces(model, geom, cs, dec, n)? {
                Ok(p) => p,
                Err(note) => return Ok(BoundValue::infinite(note)),
            };
            let hs = (cs.m1_tilde * cs.m1_hat).sqrt();
            let interior_curv = SQRT_3 * geom.curv_mle.trace_inv * hs * cs.m2
                / (4.0 * (n * p.margin * p.om_d_mle).sqrt());
            let interior_score = cs.m1 * hs / (2.0 * (n * p.margin).sqrt());
            let escape = 2.0 * dec.d_mle + 2.0 * p.tail0;
            Ok(BoundValue::from_components(vec![
                ("interior_curvature", interior_curv),
                ("interior_prior_score", interior_score),
                ("escape", escape),
            ]))
        }
    }
}

/// The 2-Wasserstein interior bound reused by the W1 and covariance
/// bounds.
pub fn w2_bound(
    geom: &Geometry,
    cs: &ConstantSet,
    dec: &DecaySet,
    centric: Centric,
    n: f64,
) -> Result<f64> {
    match centric {
        Centric::Map => {
            let margin = geom.curv_map.lambda_min - cs.delta_bar * cs.m2_bar;
            if !(margin > 0.0) {
                return Err(AuditError::Assumption {
                    name: "a5".into(),
                    detail: "posterior curvature margin non-positive".into(),
                });
            }
            let om = denom(dec.d_map, "D_map").map_err(AuditError::Numerical)?;
            Ok(SQRT_3 * geom.curv_map.trace_inv * cs.m2_bar / (2.0 * margin * (n * om).sqrt()))
        }
        Centric::Mle => {
            let margin = geom.curv_mle.lambda_min - cs.delta * cs.m2;
            if !(margin > 0.0) {
                return Err(AuditError::Assumption {
                    name: "a8".into(),
                    detail: "likelihood curvature margin non-positive".into(),
                });
            }
            let om = denom(dec.d_mle, "D_mle").map_err(AuditError::Numerical)?;
            Ok(SQRT_3 * geom.curv_mle.trace_inv * cs.m1_tilde * cs.m1_hat * cs.m2
                / (2.0 * margin * (n * om).sqrt())
                + cs.m1 * cs.m1_tilde * cs.m1_hat / (n.sqrt() * margin))
        }
    }
}

/// 1-Wasserstein bound (rescaled variable) for the chosen centring.
pub fn w1_bound(
    model: &ModelDescriptor,
    geom: &Geometry,
    cs: &ConstantSet,
    dec: &DecaySet,
    centric: Centric,
    n: f64,
) -> Result<BoundValue> {
    let d = model.d as f64;
    match centric {
        Centric::Map => {
            let p = match map_pieces(model, geom, cs, dec, n)? {
                Ok(p) => p,
                Err(note) => return Ok(BoundValue::infinite(note)),
            };
            let interior = w2_bound(geom, cs, dec, Centric::Map, n)?;
            let t1 = model.prior_tail_moment(
                &geom.mode_map.theta,
                (cs.delta_bar - geom.separation).max(0.0),
                1,
            )?;
            let prior_tail = (cs.delta_bar * n.sqrt()
                + (2.0 * std::f64::consts::PI / geom.curv_map.lambda_min).sqrt())
                * dec.d_map
                + escape_log(d, n, cs.kappa_bar, cs.m1_hat, p.logdet_jp_mle, 0.5).exp() * t1
                    / p.om_dp_mle;
            let sp_map = shifted_pair(&geom.curv_map.j, cs.delta_bar, cs.m2_bar);
            let mass_ratio = match (sp_map.logdet_minus(), sp_map.trace_inv_minus(),
                                    sp_map.logdet_plus(), denom(dec.d_map_plus, "D_map_plus")) {
                (Ok(ld_m), Ok(tr_m), Ok(ld_p), Ok(om_p)) => {
                    (0.5 * (ld_p - ld_m)).exp() * tr_m.sqrt() / om_p * (dec.d_map + p.tail0)
                }
                (_, _, _, Err(note)) => return Ok(BoundValue::infinite(note)),
                _ => {
                    return Ok(BoundValue::infinite(
                        "downward-shifted posterior curvature not positive definite".into(),
                    ))
                }
            };
            Ok(BoundValue::from_components(vec![
                ("interior", interior),
                ("prior_tail", prior_tail),
                ("mass_ratio", mass_ratio),
            ]))
        }
        Centric::Mle => {
            let p = match mle_pieces(model, geom, cs, dec, n)? {
                Ok(p) => p,
                Err(note) => return Ok(BoundValue::infinite(note)),
            };
            let interior_curv = SQRT_3 * geom.curv_mle.trace_inv * cs.m1_tilde * cs.m1_hat * cs.m2
                / (2.0 * p.margin * (n * p.om_d_mle).sqrt());
            let interior_score = cs.m1 * cs.m1_tilde * cs.m1_hat / (n.sqrt() * p.margin);
            let t1 = model.prior_tail_moment(&geom.mode_mle.theta, cs.delta, 1)?;
            let prior_tail = (cs.delta * n.sqrt()
                + (2.0 * std::f64::consts::PI / geom.curv_mle.lambda_min).sqrt())
                * dec.d_mle
                + escape_log(d, n, cs.kappa, cs.m1_hat, p.logdet_jp, 0.5).exp() * t1 / p.om_dp_mle;
            let sp = shifted_pair(&geom.curv_mle.j, cs.delta, cs.m2);
            let mass_ratio = match (sp.logdet_minus(), sp.trace_inv_minus()) {
                (Ok(ld_m), Ok(tr_m)) => {
                    cs.m1_hat * cs.m1_tilde * (0.5 * (p.logdet_jp - ld_m)).exp() * tr_m.sqrt()
                        / p.om_dp_mle
                        * (dec.d_mle + p.tail0)
                }
                _ => {
                    return Ok(BoundValue::infinite(
                        "downward-shifted likelihood curvature not positive definite".into(),
                    ))
                }
            };
            Ok(BoundValue::from_components(vec![
                ("interior_curvature", interior_curv),
                ("interior_prior_score", interior_score),
                ("prior_tail", prior_tail),
                ("mass_ratio", mass_ratio),
            ]))
        }
    }
}

/// Covariance integral-probability-metric bound (rescaled variable).
pub fn cov_ipm_bound(
    model: &ModelDescriptor,
    geom: &Geometry,
    cs: &ConstantSet,
    dec: &DecaySet,
    centric: Centric,
    n: f64,
) -> Result<BoundValue> {
    let d = model.d as f64;
    match centric {
        Centric::Map => {
            let p = match map_pieces(model, geom, cs, dec, n)? {
                Ok(p) => p,
                Err(note) => return Ok(BoundValue::infinite(note)),
            };
            let w2 = w2_bound(geom, cs, dec, Centric::Map, n)?;
            let interior = w2 * w2 + 2.0 * w2 * (geom.curv_map.trace_inv / p.om_d_map).sqrt();
            let t2 = model.prior_tail_moment(
                &geom.mode_map.theta,
                (cs.delta_bar - geom.separation).max(0.0),
                2,
            )?;
            let prior_tail = (cs.delta_bar * cs.delta_bar * n
                + (2.0 * std::f64::consts::PI / geom.curv_map.lambda_min).sqrt())
                * dec.d_map
                + escape_log(d, n, cs.kappa_bar, cs.m1_hat, p.logdet_jp_mle, 1.0).exp() * t2
                    / p.om_dp_mle;
            let sp_map = shifted_pair(&geom.curv_map.j, cs.delta_bar, cs.m2_bar);
            let mass_ratio = match (sp_map.logdet_minus(), sp_map.trace_inv_minus(),
                                    sp_map.logdet_plus(), denom(dec.d_map_plus, "D_map_plus")) {
                (Ok(ld_m), Ok(tr_m), Ok(ld_p), Ok(om_p)) => {
                    (0.5 * (ld_p - ld_m)).exp() * tr_m / om_p * (dec.d_map + p.tail0)
                }
                (_, _, _, Err(note)) => return Ok(BoundValue::infinite(note)),
                _ => {
                    return Ok(BoundValue::infinite(
                        "downward-shifted posterior curvature not positive definite".into(),
                    ))
                }
            };
            Ok(BoundValue::from_components(vec![
                ("interior", interior),
                ("prior_tail", prior_tail),
                ("mass_ratio", mass_ratio),
            ]))
        }
        Centric::Mle => {
            let p = match mle_pieces(model, geom, cs, dec, n)? {
                Ok(p) => p,
                Err(note) => return Ok(BoundValue::infinite(note)),
            };
            let w2 = w2_bound(geom, cs, dec, Centric::Mle, n)?;
            let interior = w2 * w2 + 2.0 * w2 * (geom.curv_mle.trace_inv / p.om_d_mle).sqrt();
            let t2 = model.prior_tail_moment(&geom.mode_mle.theta, cs.delta, 2)?;
            let prior_tail = (cs.delta * cs.delta * n
                + (2.0 * std::f64::consts::PI / geom.curv_mle.lambda_min).sqrt())
                * dec.d_mle
                + escape_log(d, n, cs.kappa, cs.m1_hat, p.logdet_jp, 1.0).exp() * t2 / p.om_dp_mle;
            let sp = shifted_pair(&geom.curv_mle.j, cs.delta, cs.m2);
            let mass_ratio = match (sp.logdet_minus(), sp.trace_inv_minus()) {
                (Ok(ld_m), Ok(tr_m)) => {
                    cs.m1_hat * cs.m1_tilde * (0.5 * (p.logdet_jp - ld_m)).exp() * tr_m
                        / p.om_dp_mle
                        * (dec.d_mle + p.tail0)
                }
                _ => {
                    return Ok(BoundValue::infinite(
                        "downward-shifted likelihood curvature not positive definite".into(),
                    ))
                }
            };
            Ok(BoundValue::from_components(vec![
                ("interior", interior),
                ("prior_tail", prior_tail),
                ("mass_ratio", mass_ratio),
            ]))
        }
    }
}

/// All three bounds plus the mean/covariance corollaries.
pub fn bound_report(
    model: &ModelDescriptor,
    geom: &Geometry,
    cs: &ConstantSet,
    dec: &DecaySet,
    centric: Centric,
    n: f64,
) -> Result<BoundReport> {
    let tv = tv_bound(model, geom, cs, dec, centric, n)?;
    let w1 = w1_bound(model, geom, cs, dec, centric, n)?;
    let cov_ipm = cov_ipm_bound(model, geom, cs, dec, centric, n)?;
    let mean_error = w1.total / n.sqrt();
    let cov_error = (w1.total * w1.total + cov_ipm.total) / n;
    Ok(BoundReport { tv, w1, cov_ipm, mean_error, cov_error })
}

/// Adjusted credible-ball radius: the level-`1 - alpha + tv` quantile of
/// `||Z||`, `Z ~ N(0, J_map^{-1})`. Deterministic Gaussian quantile in
/// one dimension, seeded Monte Carlo otherwise.
pub fn credible_adjust(
    alpha: f64,
    tv: f64,
    curv_map: &CurvatureSummary,
    mc_budget: usize,
    seed: u64,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(AuditError::Invalid(format!("level must lie in (0, 1), got {alpha}")));
    }
    if !(tv < alpha) {
        return Err(AuditError::Invalid(format!(
            "certificate too weak for this level: tv bound {tv} >= alpha {alpha}"
        )));
    }
    let d = curv_map.j.nrows();
    if d == 1 {
        let sigma = (1.0 / curv_map.j[(0, 0)]).sqrt();
        let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
        return Ok(sigma * std_normal.inverse_cdf(1.0 - (alpha - tv) / 2.0));
    }
    if mc_budget < 100 {
        return Err(AuditError::Invalid(
            "Monte Carlo quantile needs a budget of at least 100 samples".into(),
        ));
    }
    let cov = curv_map
        .j
        .clone()
        .cholesky()
        .ok_or_else(|| AuditError::NotPositiveDefinite("curvature not positive definite".into()))?
        .inverse();
    let chol = cov
        .cholesky()
        .ok_or_else(|| AuditError::NotPositiveDefinite("covariance not positive definite".into()))?;
    let l = chol.l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut norms: Vec<f64> = (0..mc_budget)
        .map(|_| {
            let g = nalgebra::DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            (&l * g).norm()
        })
        .collect();
    norms.sort_by(|a, b| a.partial_cmp(b).expect("finite norms"));
    let level = 1.0 - alpha + tv;
    let idx = ((level * mc_budget as f64).ceil() as usize).clamp(1, mc_budget) - 1;
    Ok(norms[idx])
}

/// Cap on the Fisher divergence between the truncated rescaled posterior
/// and the truncated Gaussian: `3 (Tr[J^{-1}] m2_bar)^2 / (4 n)`.
pub fn fisher_cap(trace_inv: f64, m2_bar: f64, n: f64) -> f64 {
    3.0 * (trace_inv * m2_bar).powi(2) / (4.0 * n)
}

/// Effective dimension: exact value `Tr[(J_map + H_prior/n) J_map^{-1}]`
/// together with the closed-form lower bound `d (1 - 1/(n lambda_min))`.
pub fn effective_dimension(
    curv_map: &CurvatureSummary,
    prior_hess_at_map: &DMatrix<f64>,
    n: f64,
) -> Result<(f64, f64)> {
    let d = curv_map.j.nrows();
    let j_inv = curv_map
        .j
        .clone()
        .cholesky()
        .ok_or_else(|| AuditError::NotPositiveDefinite("curvature not positive definite".into()))?
        .inverse();
    let exact = d as f64 + (prior_hess_at_map * j_inv).trace() / n;
    let lower = d as f64 * (1.0 - 1.0 / (n * curv_map.lambda_min));
    Ok((exact, lower))
}

/// One-dimensional Stein-method bound on `|E g(sqrt(n)(theta - mle)) -
/// E g(Z)|`, `Z ~ N(0, sigma^2)` with `sigma^2 = J_mle^{-1}`, for a test
/// function `g` of polynomial growth. All weighted integrals of `g` are
/// evaluated by adaptive quadrature.
pub fn univariate_stein_bound(
    model: &ModelDescriptor,
    geom: &Geometry,
    cs: &ConstantSet,
    g: &dyn Fn(f64) -> f64,
    n: f64,
) -> Result<BoundValue> {
    if model.d != 1 {
        return Err(AuditError::Invalid(
            "the Stein-method bound is only available in one dimension".into(),
        ));
    }
    let sigma2 = 1.0 / geom.curv_mle.j[(0, 0)];
    let sigma = sigma2.sqrt();
    let half_prec = 1.0 / (2.0 * sigma2);
    let a3 = half_prec - cs.delta * cs.m2 / 3.0;
    if !(a3 > 0.0) {
        return Err(AuditError::Numerical(format!(
            "shifted precision non-positive: 1/(2 sigma^2) = {half_prec} <= delta*m2/3 = {}",
            cs.delta * cs.m2 / 3.0
        )));
    }
    let a6 = half_prec - cs.delta * cs.m2 / 6.0;
    let b6 = half_prec + cs.delta * cs.m2 / 6.0;
    let b3 = 1.0 / sigma2 + cs.delta * cs.m2 / 3.0;
    let t_edge = cs.delta * n.sqrt();
    let gap = 1.0 - 2.0 * (-b6 * cs.delta * cs.delta * n).exp();
    if !(gap > 1e-12) {
        return Ok(BoundValue::infinite(
            "truncated-normaliser gap is within 1e-12 of 0; bound unusable".into(),
        ));
    }
    let tol = 1e-10;
    let quad_sym = |f: &dyn Fn(f64) -> f64, hi: f64| {
        adaptive_simpson(&|u| f(u), -hi, 0.0, tol) + adaptive_simpson(&|u| f(u), 0.0, hi, tol)
    };
    let sqrt_2pi = (2.0 * std::f64::consts::PI).sqrt();

    // Escape part: Gaussian tail of g, the prior-weighted tail of g, and
    // the truncated-mass cross term.
    let phi = move |u: f64| (-u * u / (2.0 * sigma2)).exp() / (sqrt_2pi * sigma);
    let gaussian_tail = (integrate_right_tail(&|u| g(u) * phi(u), t_edge, sigma, tol)
        + integrate_left_tail(&|u| g(u) * phi(u), -t_edge, sigma, tol))
    .abs();
    let mle = geom.mode_mle.theta[0];
    let prior_weighted = |u: f64| {
        let lp = model.logprior(&nalgebra::DVector::from_element(1, mle + u)).value;
        g(u * n.sqrt()).abs() * lp.exp()
    };
    let prior_int = integrate_right_tail(&prior_weighted, cs.delta, 1.0, tol)
        + integrate_left_tail(&prior_weighted, -cs.delta, 1.0, tol);
    let escape_fac =
        (0.5 * n.ln() - n * cs.kappa + cs.m1_hat.ln() + 0.5 * b3.ln()).exp() / (sqrt_2pi * gap);
    let prior_escape = escape_fac * prior_int;
    let g6 = quad_sym(&|u| g(u).abs() * (-a6 * u * u).exp(), t_edge);
    let mass_ratio = (cs.m1_hat * cs.m1_tilde * b3.sqrt() * g6 / (sqrt_2pi * gap))
        * (2.0 * (-cs.delta * cs.delta * n / (2.0 * sigma2)).exp() + escape_fac);

    // Interior part: the score-discrepancy integral and the mass-correction
    // integral, both against shifted-precision Gaussian weights.
    let m1_slack = cs.m1 + 3.0 / cs.delta;
    let gu = quad_sym(
        &|u| {
            (u * g(u)).abs()
                * (m1_slack * (-a3 * u * u).exp() - (3.0 / cs.delta) * (-a6 * u * u).exp())
        },
        t_edge,
    );
    let interior_weighted = 2.0 * cs.m1_tilde * cs.m1_hat * gu / (sqrt_2pi * sigma * n.sqrt());
    let interior_mass = 2.0 * b6.sqrt() * (cs.m1_tilde * cs.m1_hat).powi(2) * m1_slack * g6
        / (a3 * std::f64::consts::PI * sigma * gap * n.sqrt())
        * (m1_slack / a3 - 3.0 / (cs.delta * a6));

    Ok(BoundValue::from_components(vec![
        ("interior_weighted", interior_weighted),
        ("interior_mass", interior_mass),
        ("gaussian_tail", gaussian_tail),
        ("prior_escape", prior_escape),
        ("mass_ratio", mass_ratio),
    ]))
}
