//! Finite-sample certificate constants and assumption checks.
//!
//! A certificate is built around two ball radii: `delta` around the
//! maximum-likelihood estimate and (for posterior-mode centring)
//! `delta_bar` around the posterior mode. Over those balls we collect:
//!
//! * `m2`, `m2_bar`: third-derivative bounds of `L_n / n` and
//!   `(L_n + log pi) / n`;
//! * `m1`, `m1_tilde`, `m1_hat`: prior envelope constants;
//! * `kappa`, `kappa_bar`: log-likelihood drops outside the balls.
//!
//! [`verify_assumptions`] turns the constants into named pass/fail checks
//! with numeric witnesses; a bound is only meaningful when the checks for
//! its centring convention all pass. [`feasible_radius_interval`] and
//! [`optimize_radii`] pick radii automatically.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bounds::{decay_terms, tv_bound};
use crate::error::{AuditError, Result};
use crate::geometry::{shifted_pair, Geometry, Objective};
use crate::model::{ModelDescriptor, PriorEnvelope};

/// Which mode the Gaussian approximation is centred on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Centric {
    /// Centre on the maximum-likelihood estimate.
    Mle,
    /// Centre on the posterior mode.
    Map,
}

/// Certificate constants for one model at fixed radii. Posterior-mode
/// fields are `NaN` when built for the likelihood-centred convention only.
#[derive(Debug, Clone, Copy)]
pub struct ConstantSet {
    pub delta: f64,
    pub delta_bar: f64,
    pub m1: f64,
    pub m1_tilde: f64,
    pub m1_hat: f64,
    pub m2: f64,
    pub m2_bar: f64,
    pub kappa: f64,
    pub kappa_bar: f64,
}

/// How to bound third derivatives over a ball.
#[derive(Debug, Clone, Copy)]
pub enum ThirdDerivMethod {
    /// Use the model's closed-form oracle.
    Analytic,
    /// Heuristic scan: finite differences of directional curvature at
    /// random points of the ball. A lower bound on the true supremum,
    /// useful for cross-checking analytic oracles.
    Grid { points: usize, directions: usize, seed: u64 },
}

/// One named assumption check with its numeric witness. The flag is true
/// exactly when the witness clears zero with relative slack `1e-12`.
#[derive(Debug, Clone)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub description: &'static str,
    pub flag: bool,
    pub witness: f64,
}

/// All ten assumption checks for a model, radii and constants.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn all(&self, names: &[&str]) -> bool {
        names.iter().all(|n| self.get(n).is_some_and(|c| c.flag))
    }

    /// Do the checks required by the posterior-mode-centred bounds pass?
    pub fn map_ok(&self) -> bool {
        self.all(&["a1", "a2", "a3", "a4", "a5", "a6"])
    }

    /// Do the checks required by the likelihood-centred bounds pass?
    pub fn mle_ok(&self) -> bool {
        self.all(&["a1", "a2", "a7", "a8", "a9", "a10"])
    }
}

/// Bound the third derivative of the chosen objective (per observation)
/// over `B(center, radius)`.
pub fn third_derivative_bound(
    model: &ModelDescriptor,
    center: &DVector<f64>,
    radius: f64,
    method: ThirdDerivMethod,
    objective: Objective,
) -> Result<f64> {
    match method {
        ThirdDerivMethod::Analytic => match objective {
            Objective::Likelihood => model.third_deriv_bound_lik(center, radius),
            Objective::Posterior => model.third_deriv_bound_post(center, radius),
        },
        ThirdDerivMethod::Grid { points, directions, seed } => {
            grid_third_bound(model, center, radius, points, directions, seed, objective)
        }
    }
}

fn grid_third_bound(
    model: &ModelDescriptor,
    center: &DVector<f64>,
    radius: f64,
    points: usize,
    directions: usize,
    seed: u64,
    objective: Objective,
) -> Result<f64> {
    if points == 0 || directions == 0 {
        return Err(AuditError::Invalid(
            "grid scan needs at least one point and one direction".into(),
        ));
    }
    let d = model.d;
    let n = model.n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-4 * center.norm().max(1.0);
    let hess = |t: &DVector<f64>| match objective {
        Objective::Likelihood => model.loglik(t).hess,
        Objective::Posterior => model.logpost(t).hess,
    };
    let draw_unit = |rng: &mut ChaCha8Rng| -> DVector<f64> {
        let v = DVector::from_fn(d, |_, _| -> f64 { StandardNormal.sample(rng) });
        let norm = v.norm();
        if norm > 0.0 { v / norm } else { DVector::from_element(d, 1.0 / (d as f64).sqrt()) }
    };
    // Sample points uniformly in the ball (plus the center itself), leaving
    // an `h` margin so the finite-difference stencil stays inside.
    let mut sites = vec![center.clone()];
    let eff = (radius - 2.0 * h).max(0.0);
    for _ in 1..points {
        let dir = draw_unit(&mut rng);
        let u: f64 = rng.gen();
        sites.push(center + dir.scale(eff * u.powf(1.0 / d as f64)));
    }
    let mut sup: f64 = 0.0;
    for site in &sites {
        for _ in 0..directions {
            let u = draw_unit(&mut rng);
            let hp = hess(&(site + u.scale(h)));
            let hm = hess(&(site - u.scale(h)));
            let fd = ((&u.transpose() * (hp - hm) * &u)[(0, 0)] / (2.0 * h * n)).abs();
            sup = sup.max(fd);
        }
    }
    // The central difference underestimates the third derivative by at most
    // L4 * h^2 / 6 where L4 bounds the fourth derivative; when the model
    // supplies such a bound we also pad by L4 * h to cover variation between
    // scan sites at the stencil scale.
    if let Some(l4) = model.fourth_deriv_bound {
        sup += l4 * h * (1.0 + h / 6.0);
    }
    Ok(sup)
}

/// Prior envelope constants over `B(center, radius)`.
pub fn prior_envelope(
    model: &ModelDescriptor,
    center: &DVector<f64>,
    radius: f64,
) -> Result<PriorEnvelope> {
    model.prior_envelope(center, radius)
}

/// Log-likelihood drop outside `B(mle, exclusion_radius)`: the model's
/// analytic oracle when present, otherwise the concavity surrogate
/// `lambda_min r^2 / 2 - m2 r^3 / 2`.
pub fn optimality_gap(
    model: &ModelDescriptor,
    geom: &Geometry,
    exclusion_radius: f64,
) -> Result<f64> {
    optimality_gap_with(model, geom, exclusion_radius, ThirdDerivMethod::Analytic)
}

/// [`optimality_gap`] with an explicit third-derivative method for the
/// concavity surrogate.
pub fn optimality_gap_with(
    model: &ModelDescriptor,
    geom: &Geometry,
    exclusion_radius: f64,
    method: ThirdDerivMethod,
) -> Result<f64> {
    if !(exclusion_radius > 0.0) {
        return Err(AuditError::Invalid(format!(
            "exclusion radius must be positive, got {exclusion_radius}"
        )));
    }
    match model.optimality_gap(exclusion_radius) {
        Ok(v) => Ok(v),
        Err(AuditError::Unavailable(_)) if model.concave_loglik => {
            let m2 = third_derivative_bound(
                model,
                &geom.mode_mle.theta,
                exclusion_radius,
                method,
                Objective::Likelihood,
            )?;
            Ok(concave_gap(geom.curv_mle.lambda_min, m2, exclusion_radius))
        }
        Err(e) => Err(e),
    }
}

/// Concavity surrogate for the log-likelihood drop at radius `r`.
fn concave_gap(lambda_min: f64, m2: f64, r: f64) -> f64 {
    0.5 * lambda_min * r * r - m2 * r.powi(3) / 2.0
}

/// Assemble the certificate constants at the given radii. For the
/// likelihood-centred convention `delta_bar` is ignored and the
/// posterior-mode fields are `NaN`.
pub fn build_constants(
    model: &ModelDescriptor,
    geom: &Geometry,
    centric: Centric,
    delta: f64,
    delta_bar: Option<f64>,
) -> Result<ConstantSet> {
    build_constants_with(model, geom, centric, delta, delta_bar, ThirdDerivMethod::Analytic)
}

/// [`build_constants`] with an explicit third-derivative method. With the
/// grid method the resulting `m2`, `m2_bar`, `kappa` and `kappa_bar` are
/// heuristic (scan maxima plus a fourth-derivative pad), not certified
/// upper bounds; the analytic method always yields certified values.
pub fn build_constants_with(
    model: &ModelDescriptor,
    geom: &Geometry,
    centric: Centric,
    delta: f64,
    delta_bar: Option<f64>,
    method: ThirdDerivMethod,
) -> Result<ConstantSet> {
    if !(delta > 0.0) {
        return Err(AuditError::Invalid(format!("delta must be positive, got {delta}")));
    }
    let mle = &geom.mode_mle.theta;
    let m2 = third_derivative_bound(model, mle, delta, method, Objective::Likelihood)?;
    let env = model.prior_envelope(mle, delta)?;
    match centric {
        Centric::Mle => {
            let kappa = optimality_gap_with(model, geom, delta, method)?;
            Ok(ConstantSet {
                delta,
                delta_bar: f64::NAN,
                m1: env.m1,
                m1_tilde: env.m1_tilde,
                m1_hat: env.m1_hat,
                m2,
                m2_bar: f64::NAN,
                kappa,
                kappa_bar: f64::NAN,
            })
        }
        Centric::Map => {
            let delta_bar = delta_bar.ok_or_else(|| {
                AuditError::Invalid("posterior-mode centring needs delta_bar".into())
            })?;
            if !(delta_bar > 0.0) {
                return Err(AuditError::Invalid(format!(
                    "delta_bar must be positive, got {delta_bar}"
                )));
            }
            let m2_bar = third_derivative_bound(
                model,
                &geom.mode_map.theta,
                delta_bar,
                method,
                Objective::Posterior,
            )?;
            // The escape term excludes a ball around the mle of radius
            // delta_bar minus the mode separation.
            let excl = delta_bar - geom.separation;
            let kappa_bar = if excl > 0.0 {
                optimality_gap_with(model, geom, excl, method)?
            } else {
                f64::NAN
            };
            let kappa = optimality_gap_with(model, geom, delta, method).unwrap_or(f64::NAN);
            Ok(ConstantSet {
                delta,
                delta_bar,
                m1: env.m1,
                m1_tilde: env.m1_tilde,
                m1_hat: env.m1_hat,
                m2,
                m2_bar,
                kappa,
                kappa_bar,
            })
        }
    }
}

/// Largest open interval of radii on which the curvature stays ahead of
/// its third-derivative slack: lower end from the dispersion requirement,
/// upper end from `lambda_min - r * m2(r) > 0`, bisected because `m2`
/// may grow with the radius. Radii where the oracle is unavailable count
/// as infeasible.
fn radius_interval(
    lower: f64,
    lambda_min: f64,
    m2_at: &dyn Fn(f64) -> Result<f64>,
    domain_cap: f64,
) -> Result<(f64, f64)> {
    let margin = |r: f64| -> f64 {
        match m2_at(r) {
            Ok(m2) => lambda_min - r * m2,
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let cap = if domain_cap.is_finite() {
        domain_cap * (1.0 - 1e-12)
    } else {
        // Unbounded domain: double outward until the margin fails, then
        // bisect inside that finite bracket.
        let mut hi = lower.max(1.0);
        let mut doubled = 0;
        while margin(hi) > 0.0 && doubled < 200 {
            hi *= 2.0;
            doubled += 1;
        }
        hi
    };
    if !(cap > 0.0) {
        return Err(AuditError::Infeasible("n too small for a certificate".into()));
    }
    let upper = if margin(cap) > 0.0 {
        cap
    } else {
        // Seed the bisection with a feasible inner radius.
        let mut lo = f64::NAN;
        let mut probe = cap;
        for _ in 0..200 {
            probe /= 2.0;
            if margin(probe) > 0.0 {
                lo = probe;
                break;
            }
        }
        if !lo.is_finite() {
            return Err(AuditError::Infeasible("n too small for a certificate".into()));
        }
        let mut hi = cap;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if margin(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    if !(lower < upper) {
        return Err(AuditError::Infeasible("n too small for a certificate".into()));
    }
    Ok((lower, upper))
}

/// Feasible radius interval for the chosen centring convention. For
/// posterior-mode centring this is the interval for `delta_bar`; it also
/// requires the likelihood-centred interval to be non-empty, since the
/// posterior-mode bounds consume `delta` as well.
pub fn feasible_radius_interval(
    model: &ModelDescriptor,
    geom: &Geometry,
    centric: Centric,
) -> Result<(f64, f64)> {
    feasible_radius_interval_with(model, geom, centric, ThirdDerivMethod::Analytic)
}

/// [`feasible_radius_interval`] with an explicit third-derivative method.
pub fn feasible_radius_interval_with(
    model: &ModelDescriptor,
    geom: &Geometry,
    centric: Centric,
    method: ThirdDerivMethod,
) -> Result<(f64, f64)> {
    let n = model.n as f64;
    let mle_interval = || -> Result<(f64, f64)> {
        let lower = (geom.curv_mle.trace_inv / n).sqrt();
        let cap = match model.support_lower {
            Some(lo) => geom.mode_mle.theta[0] - lo,
            None => f64::INFINITY,
        };
        let m2_at = |r: f64| {
            third_derivative_bound(model, &geom.mode_mle.theta, r, method, Objective::Likelihood)
        };
        radius_interval(lower, geom.curv_mle.lambda_min, &m2_at, cap)
    };
    match centric {
        Centric::Mle => mle_interval(),
        Centric::Map => {
            mle_interval()?;
            let lower = geom.separation.max((geom.curv_map.trace_inv / n).sqrt());
            let cap = match model.support_lower {
                Some(lo) => geom.mode_map.theta[0] - lo,
                None => f64::INFINITY,
            };
            let m2_at = |r: f64| {
                third_derivative_bound(model, &geom.mode_map.theta, r, method, Objective::Posterior)
            };
            radius_interval(lower, geom.curv_map.lambda_min, &m2_at, cap)
        }
    }
}

/// Golden-section minimisation over `[lo, hi]` in log-space. Exact ties
/// shrink towards the smaller argument; an essentially flat objective
/// returns the (log-space) midpoint.
fn golden_min(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let (la, lb) = (lo.ln(), hi.ln());
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let g = |x: f64| f(x.exp());
    let mut a = la;
    let mut b = lb;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = g(x1);
    let mut f2 = g(x2);
    let mut spread_seen: f64 = (f1 - f2).abs();
    let mut best = f1.min(f2);
    for _ in 0..140 {
        if b - a < 1e-11 {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = g(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = g(x2);
        }
        spread_seen = spread_seen.max((f1 - f2).abs());
        best = best.min(f1).min(f2);
    }
    if !best.is_finite() || spread_seen <= 1e-12 * best.abs().max(1.0) {
        // Flat (or everywhere-infinite) objective: settle on the midpoint.
        return (0.5 * (la + lb)).exp();
    }
    (0.5 * (a + b)).exp()
}

/// Smallest sample size accepted by `certified`, found by doubling from
/// `start` and then bisecting, assuming feasibility is monotone in `n`.
/// Returns `Err` with an "exceeds cap" message when even `cap` fails.
pub fn min_certified_n(
    certified: &mut dyn FnMut(usize) -> bool,
    start: usize,
    cap: usize,
) -> Result<usize> {
    let mut lo = start.max(1);
    if certified(lo) {
        if lo == 1 {
            return Ok(1);
        }
        // The start is already certified; bisect down from it.
        let mut bad = 0usize;
        let mut good = lo;
        while good - bad > 1 {
            let mid = bad + (good - bad) / 2;
            if certified(mid) {
                good = mid;
            } else {
                bad = mid;
            }
        }
        return Ok(good);
    }
    let mut hi = lo;
    loop {
        hi = (hi * 2).min(cap);
        if certified(hi) {
            break;
        }
        if hi == cap {
            return Err(AuditError::Infeasible(format!(
                "no certified sample size found: exceeds cap {cap}"
            )));
        }
        lo = hi;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if certified(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Radii chosen by minimising the total-variation certificate.
#[derive(Debug, Clone, Copy)]
pub struct ChosenRadii {
    pub delta: f64,
    /// `NaN` for the likelihood-centred convention.
    pub delta_bar: f64,
}

/// Which bound a radius search should minimise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundTarget {
    Tv,
    W1,
    Cov,
}

/// Pick certificate radii by golden-section search of the selected bound
/// over the feasible interval (log-spaced). For posterior-mode centring,
/// `delta` is fixed first by the likelihood-centred search and `delta_bar`
/// is then optimised.
pub fn optimize_radii(
    model: &ModelDescriptor,
    geom: &Geometry,
    centric: Centric,
    target: BoundTarget,
) -> Result<ChosenRadii> {
    optimize_radii_with(model, geom, centric, target, ThirdDerivMethod::Analytic)
}

/// [`optimize_radii`] with an explicit third-derivative method.
pub fn optimize_radii_with(
    model: &ModelDescriptor,
    geom: &Geometry,
    centric: Centric,
    target: BoundTarget,
    method: ThirdDerivMethod,
) -> Result<ChosenRadii> {
    let n = model.n as f64;
    let bound_total = |cs: &ConstantSet, c: Centric| -> Result<f64> {
        let dec = decay_terms(geom, cs, n)?;
        let b = match target {
            BoundTarget::Tv => tv_bound(model, geom, cs, &dec, c, n)?,
            BoundTarget::W1 => crate::bounds::w1_bound(model, geom, cs, &dec, c, n)?,
            BoundTarget::Cov => crate::bounds::cov_ipm_bound(model, geom, cs, &dec, c, n)?,
        };
        Ok(b.total)
    };
    let (mle_lo, mle_hi) = feasible_radius_interval_with(model, geom, Centric::Mle, method)?;
    let mle_objective = |delta: f64| -> f64 {
        build_constants_with(model, geom, Centric::Mle, delta, None, method)
            .and_then(|cs| bound_total(&cs, Centric::Mle))
            .unwrap_or(f64::INFINITY)
    };
    let delta = golden_min(&mle_objective, mle_lo, mle_hi);
    match centric {
        Centric::Mle => Ok(ChosenRadii { delta, delta_bar: f64::NAN }),
        Centric::Map => {
            let (lo, hi) = feasible_radius_interval_with(model, geom, Centric::Map, method)?;
            let objective = |db: f64| -> f64 {
                build_constants_with(model, geom, Centric::Map, delta, Some(db), method)
                    .and_then(|cs| bound_total(&cs, Centric::Map))
                    .unwrap_or(f64::INFINITY)
            };
            let delta_bar = golden_min(&objective, lo, hi);
            Ok(ChosenRadii { delta, delta_bar })
        }
    }
}

fn strict(witness: f64, scale: f64) -> bool {
    witness > 1e-12 * scale.abs().max(1.0)
}

/// Run all ten assumption checks for the given constants.
pub fn verify_assumptions(
    model: &ModelDescriptor,
    geom: &Geometry,
    cs: &ConstantSet,
) -> AssumptionReport {
    let n = model.n as f64;
    let finite = |v: f64| v.is_finite() && v >= 0.0;

    // a4 needs the upward-shifted likelihood curvature.
    let sp_mle = shifted_pair(&geom.curv_mle.j, cs.delta, cs.m2);
    let disp_mle = (geom.curv_mle.trace_inv / n).sqrt();
    let disp_mle_plus = sp_mle
        .trace_inv_plus()
        .map(|t| (t / n).sqrt())
        .unwrap_or(f64::INFINITY);
    let disp_map = (geom.curv_map.trace_inv / n).sqrt();

    let a4_margin_bar = cs.delta_bar - geom.separation.max(disp_map);
    let a4_margin = cs.delta - disp_mle_plus;

    let checks = vec![
        AssumptionCheck {
            name: "a1",
            description: "likelihood third derivative bounded on the mle ball",
            flag: cs.delta > 0.0 && finite(cs.m2),
            witness: cs.m2,
        },
        AssumptionCheck {
            name: "a2",
            description: "prior bounded away from zero on the mle ball",
            flag: finite(cs.m1_hat),
            witness: cs.m1_hat,
        },
        AssumptionCheck {
            name: "a3",
            description: "posterior third derivative bounded on the map ball",
            flag: cs.delta_bar > 0.0 && finite(cs.m2_bar),
            witness: cs.m2_bar,
        },
        AssumptionCheck {
            name: "a4",
            description: "mode separation and both dispersions fit inside the balls",
            flag: strict(a4_margin_bar, cs.delta_bar) && strict(a4_margin, cs.delta),
            witness: a4_margin_bar.min(a4_margin),
        },
        AssumptionCheck {
            name: "a5",
            description: "map curvature exceeds its third-derivative slack",
            flag: strict(geom.curv_map.lambda_min - cs.delta_bar * cs.m2_bar, geom.curv_map.lambda_min),
            witness: geom.curv_map.lambda_min - cs.delta_bar * cs.m2_bar,
        },
        AssumptionCheck {
            name: "a6",
            description: "positive log-likelihood drop outside the map ball",
            flag: strict(cs.kappa_bar, 1.0),
            witness: cs.kappa_bar,
        },
        AssumptionCheck {
            name: "a7",
            description: "likelihood dispersion fits inside the mle ball",
            flag: strict(cs.delta - disp_mle, cs.delta),
            witness: cs.delta - disp_mle,
        },
        AssumptionCheck {
            name: "a8",
            description: "mle curvature exceeds its third-derivative slack",
            flag: strict(geom.curv_mle.lambda_min - cs.delta * cs.m2, geom.curv_mle.lambda_min),
            witness: geom.curv_mle.lambda_min - cs.delta * cs.m2,
        },
        AssumptionCheck {
            name: "a9",
            description: "positive log-likelihood drop outside the mle ball",
            flag: strict(cs.kappa, 1.0),
            witness: cs.kappa,
        },
        AssumptionCheck {
            name: "a10",
            description: "prior score and density bounded on the mle ball",
            flag: finite(cs.m1) && finite(cs.m1_tilde),
            witness: cs.m1,
        },
    ];
    AssumptionReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::poisson_gamma_model;
    use approx::assert_relative_eq;

    fn poisson() -> (ModelDescriptor, Geometry) {
        let m = poisson_gamma_model(&[2.0, 3.0, 7.0], 0.1, 3.0).unwrap();
        let g = Geometry::analyze(&m).unwrap();
        (m, g)
    }

    // Same count distribution replicated 25 times: identical MLE and
    // per-observation curvature, but enough data for a feasible radius.
    fn poisson_large() -> (ModelDescriptor, Geometry) {
        let data: Vec<f64> =
            std::iter::repeat([2.0, 3.0, 7.0]).take(25).flatten().collect();
        let m = poisson_gamma_model(&data, 0.1, 3.0).unwrap();
        let g = Geometry::analyze(&m).unwrap();
        (m, g)
    }

    #[test]
    fn concave_gap_formula() {
        // lambda = 1, m2 = 0.5, r = 1/2: 1/8 - 1/32 = 0.09375.
        assert_relative_eq!(concave_gap(1.0, 0.5, 0.5), 0.09375, epsilon = 1e-15);
    }

    #[test]
    fn radius_interval_with_constant_slack() {
        // lambda = 1, m2 = 1: margin positive up to r = 1, dispersion 0.1.
        let m2 = |_r: f64| Ok(1.0);
        let (lo, hi) = radius_interval(0.1, 1.0, &m2, f64::INFINITY).unwrap();
        assert_relative_eq!(lo, 0.1, epsilon = 1e-12);
        assert_relative_eq!(hi, 1.0, max_relative = 1e-9);
        assert!(radius_interval(1.2, 1.0, &m2, f64::INFINITY).is_err());
    }

    #[test]
    fn radius_interval_respects_domain_cap() {
        let m2 = |_r: f64| Ok(0.0);
        let (_, hi) = radius_interval(0.1, 1.0, &m2, 0.7).unwrap();
        assert!(hi <= 0.7 && hi > 0.69);
    }

    #[test]
    fn build_constants_poisson_values() {
        let (m, g) = poisson();
        let cs = build_constants(&m, &g, Centric::Mle, 1.0, None).unwrap();
        // m2 = 2 * 12 / (3 * 27) over [3, 5]; kappa at r = 1 from the
        // two-endpoint oracle.
        assert_relative_eq!(cs.m2, 24.0 / 81.0, epsilon = 1e-12);
        let drop_right = 1.0 - 4.0 * (1.25_f64).ln();
        let drop_left = -1.0 - 4.0 * (0.75_f64).ln();
        assert_relative_eq!(cs.kappa, drop_right.min(drop_left), epsilon = 1e-10);
        assert!(cs.delta_bar.is_nan() && cs.m2_bar.is_nan());
    }

    #[test]
    fn grid_scan_is_dominated_by_analytic_bound() {
        let (m, g) = poisson();
        for radius in [0.5, 1.0, 2.0] {
            let analytic = third_derivative_bound(
                &m,
                &g.mode_mle.theta,
                radius,
                ThirdDerivMethod::Analytic,
                Objective::Likelihood,
            )
            .unwrap();
            let grid = third_derivative_bound(
                &m,
                &g.mode_mle.theta,
                radius,
                ThirdDerivMethod::Grid { points: 40, directions: 4, seed: 1 },
                Objective::Likelihood,
            )
            .unwrap();
            assert!(grid <= analytic * (1.0 + 1e-6), "grid {grid} > analytic {analytic}");
            assert!(grid > 0.5 * analytic, "grid scan far below analytic bound");
        }
    }

    #[test]
    fn assumption_flags_flip_with_radius() {
        let (m, g) = poisson_large();
        // Small radius: kappa positive, curvature margin positive.
        let cs = build_constants(&m, &g, Centric::Mle, 0.8, None).unwrap();
        let rep = verify_assumptions(&m, &g, &cs);
        assert!(rep.mle_ok(), "{:?}", rep.checks);
        assert!(!rep.map_ok());
        // Huge radius: the curvature margin a8 fails.
        let cs = build_constants(&m, &g, Centric::Mle, 3.5, None).unwrap();
        let rep = verify_assumptions(&m, &g, &cs);
        assert!(!rep.get("a8").unwrap().flag);
        assert!(!rep.mle_ok());
    }

    #[test]
    fn golden_min_quadratic_and_flat() {
        let f = |x: f64| (x - 0.3) * (x - 0.3);
        let x = golden_min(&f, 0.05, 2.0);
        assert_relative_eq!(x, 0.3, max_relative = 1e-6);
        // Flat objective settles on the log-space midpoint.
        let flat = |_x: f64| 1.0;
        let x = golden_min(&flat, 0.1, 10.0);
        assert_relative_eq!(x, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn feasible_interval_poisson() {
        // With only three counts the dispersion floor sqrt(4/3) already
        // exceeds the curvature-margin root near 0.91: the interval is empty.
        let (m, g) = poisson();
        assert!(matches!(
            feasible_radius_interval(&m, &g, Centric::Mle),
            Err(AuditError::Infeasible(_))
        ));
        // Replicated data: floor sqrt(4/75), same upper root of
        // 1/4 = r * 8/(4 - r)^3.
        let (m, g) = poisson_large();
        let (lo, hi) = feasible_radius_interval(&m, &g, Centric::Mle).unwrap();
        assert_relative_eq!(lo, (4.0 / 75.0_f64).sqrt(), epsilon = 1e-12);
        assert!(hi > lo && hi < 4.0);
        let margin = 0.25 - hi * 8.0 / (4.0 - hi).powi(3);
        assert!(margin.abs() < 1e-6, "upper end margin {margin}");
    }
}
