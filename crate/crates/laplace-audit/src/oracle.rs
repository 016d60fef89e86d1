//! Independent ground-truth engines used to validate the certified bounds.
//!
//! Three methods, in decreasing order of exactness:
//!
//! * [`conjugate_truth`]: closed-form posterior moments for the two
//!   conjugate one-dimensional families;
//! * [`quadrature_truth_1d`]: deterministic numerical integration of any
//!   one-dimensional posterior, including total-variation and
//!   1-Wasserstein distances to the Gaussian approximation;
//! * [`importance_truth_md`]: seeded self-normalised importance sampling
//!   for moderate dimension (`d <= 8`), with an effective-sample-size
//!   report.
//!
//! Quadrature integrates the rescaled variable `u = sqrt(n)(theta -
//! center)` so the integrand stays O(1)-scaled at every sample size; raw
//! parameter-scale integration loses precision once the posterior
//! concentrates.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{AuditError, Result};
use crate::model::{ConjugatePosterior, ModelDescriptor};

const LN_2PI: f64 = 1.8378770664093453;

/// How a ground-truth value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthMethod {
    Conjugate,
    Quadrature,
    Importance,
}

/// Gaussian approximation parameters for a one-dimensional posterior:
/// the approximation is `N(center, 1 / (n j))` on the parameter scale.
#[derive(Debug, Clone, Copy)]
pub struct LaplaceParams1d {
    pub center: f64,
    /// Per-observation curvature at the centre (positive).
    pub j: f64,
    pub n: f64,
}

/// Ground-truth posterior summary.
#[derive(Debug, Clone)]
pub struct PosteriorTruth {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Total variation between the rescaled posterior and its Gaussian
    /// approximation; `NaN` when the method does not provide it.
    pub tv_vs_laplace: f64,
    /// 1-Wasserstein distance on the rescaled variable; `NaN` when the
    /// method does not provide it.
    pub w1_vs_laplace: f64,
    pub method: TruthMethod,
    pub error_estimate: f64,
    /// Effective sample size (importance sampling only).
    pub ess: Option<f64>,
}

/// Exact posterior moments from a conjugate family. With a supplied
/// Gaussian approximation the TV and W1 distances are filled in by
/// quadrature on the closed-form density; otherwise they are `NaN`.
pub fn conjugate_truth(
    family: &ConjugatePosterior,
    laplace: Option<LaplaceParams1d>,
) -> Result<PosteriorTruth> {
    let (mean, var, log_pdf): (f64, f64, Box<dyn Fn(f64) -> f64>) = match *family {
        ConjugatePosterior::Gamma { shape, rate } => {
            if !(shape > 0.0 && rate > 0.0) {
                return Err(AuditError::Invalid(format!(
                    "gamma posterior needs positive parameters, got shape {shape}, rate {rate}"
                )));
            }
            let lp = move |t: f64| {
                if t <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * t.ln() - rate * t
                }
            };
            (shape / rate, shape / (rate * rate), Box::new(lp))
        }
        ConjugatePosterior::InvGamma { shape, scale } => {
            if !(shape > 2.0 && scale > 0.0) {
                return Err(AuditError::Invalid(format!(
                    "inverse-gamma posterior needs shape > 2 for finite variance, got {shape}"
                )));
            }
            let lp = move |t: f64| {
                if t <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * t.ln() - scale / t
                }
            };
            let mean = scale / (shape - 1.0);
            let var = scale * scale / ((shape - 1.0).powi(2) * (shape - 2.0));
            (mean, var, Box::new(lp))
        }
    };
    let (tv, w1, err) = match laplace {
        None => (f64::NAN, f64::NAN, 0.0),
        Some(lp) => {
            let rn = lp.n.sqrt();
            // Rescaled density of u = sqrt(n)(theta - center) is already
            // normalised: pdf(center + u / sqrt(n)) / sqrt(n).
            let log_p = |u: f64| log_pdf(lp.center + u / rn) - rn.ln();
            let sigma2 = 1.0 / lp.j;
            let log_q =
                move |u: f64| -u * u / (2.0 * sigma2) - 0.5 * (LN_2PI + sigma2.ln());
            let stats = rescaled_distance(&log_p, &log_q, sigma2.sqrt(), rn * lp.center)?;
            (stats.tv, stats.w1, stats.error_estimate)
        }
    };
    Ok(PosteriorTruth {
        mean: DVector::from_element(1, mean),
        cov: DMatrix::from_element(1, 1, var),
        tv_vs_laplace: tv,
        w1_vs_laplace: w1,
        method: TruthMethod::Conjugate,
        error_estimate: err,
        ess: None,
    })
}

struct DistanceStats {
    tv: f64,
    w1: f64,
    mean_u: f64,
    var_u: f64,
    error_estimate: f64,
}

/// Composite-Simpson integral of `f` sampled on a uniform grid with an
/// odd number of points.
fn simpson_uniform(values: &[f64], h: f64) -> f64 {
    let m = values.len();
    debug_assert!(m >= 3 && m % 2 == 1);
    let mut s = values[0] + values[m - 1];
    for (i, v) in values.iter().enumerate().skip(1).take(m - 2) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// TV, W1 and moments of the density `exp(log_p)` against the reference
/// `exp(log_q)`, both on the rescaled scale. `log_p` may be unnormalised;
/// `log_q` must be normalised. `scale` sets the initial window width and
/// `support_edge` is the lower limit of the support on the `u` scale
/// (`-inf` if unconstrained). Refines the grid until two successive
/// resolutions agree below `1e-9`.
fn rescaled_distance(
    log_p: &dyn Fn(f64) -> f64,
    log_q: &dyn Fn(f64) -> f64,
    scale: f64,
    support_span: f64,
) -> Result<DistanceStats> {
    // Expand the window until both densities are negligible at the edges.
    let mut lo = -12.0 * scale;
    let mut hi = 12.0 * scale;
    if support_span.is_finite() {
        lo = lo.max(-support_span);
    }
    // Each density is compared against its own peak: `log_p` is
    // unnormalised, so a shared threshold would size the window by the
    // Gaussian alone and clip heavy posterior tails.
    let mut p_peak = log_p(0.0);
    for i in 0..=256 {
        let u = lo + (hi - lo) * i as f64 / 256.0;
        p_peak = p_peak.max(log_p(u));
    }
    let q_peak = log_q(0.0);
    if !p_peak.is_finite() || !q_peak.is_finite() {
        return Err(AuditError::Numerical(
            "density vanishes at the expansion centre".into(),
        ));
    }
    let edge_ok =
        |u: f64| log_p(u) - p_peak < -60.0 && log_q(u) - q_peak < -60.0;
    let mut grow = 0;
    while !edge_ok(hi) {
        hi += 6.0 * scale;
        grow += 1;
        if grow > 400 {
            return Err(AuditError::Numerical("tail mass not converging".into()));
        }
    }
    while !(support_span.is_finite() && lo <= -support_span + 1e-300) && !edge_ok(lo) {
        lo -= 6.0 * scale;
        grow += 1;
        if grow > 800 {
            return Err(AuditError::Numerical("tail mass not converging".into()));
        }
    }

    let eval = |m: usize| -> DistanceStats {
        let h = (hi - lo) / (m - 1) as f64;
        let us: Vec<f64> = (0..m).map(|i| lo + h * i as f64).collect();
        let lp: Vec<f64> = us.iter().map(|&u| log_p(u)).collect();
        let shift = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let pu: Vec<f64> = lp.iter().map(|&v| (v - shift).exp()).collect();
        let z = simpson_uniform(&pu, h);
        let p: Vec<f64> = pu.iter().map(|&v| v / z).collect();
        let q: Vec<f64> = us.iter().map(|&u| log_q(u).exp()).collect();
        let absdiff: Vec<f64> = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).collect();
        let tv = 0.5 * simpson_uniform(&absdiff, h);
        // Cumulative distribution gap by running trapezoid, then its
        // absolute integral for W1. The reference mass below the window
        // start enters as the initial offset.
        let q_below = 0.5 * statrs::function::erf::erfc(-lo / (scale * std::f64::consts::SQRT_2));
        let mut fp = 0.0_f64;
        let mut fq = q_below;
        let mut gap: Vec<f64> = Vec::with_capacity(m);
        gap.push((fp - fq).abs());
        for i in 1..m {
            fp += 0.5 * h * (p[i - 1] + p[i]);
            fq += 0.5 * h * (q[i - 1] + q[i]);
            gap.push((fp - fq).abs());
        }
        let w1 = simpson_uniform(&gap, h);
        let weighted: Vec<f64> = us.iter().zip(&p).map(|(u, d)| u * d).collect();
        let mean_u = simpson_uniform(&weighted, h);
        let second: Vec<f64> =
            us.iter().zip(&p).map(|(u, d)| (u - mean_u) * (u - mean_u) * d).collect();
        let var_u = simpson_uniform(&second, h);
        DistanceStats { tv, w1, mean_u, var_u, error_estimate: f64::NAN }
    };

    let mut m = 4097;
    let mut prev = eval(m);
    for _ in 0..8 {
        m = 2 * (m - 1) + 1;
        let cur = eval(m);
        let err = (cur.tv - prev.tv)
            .abs()
            .max((cur.w1 - prev.w1).abs())
            .max((cur.mean_u - prev.mean_u).abs())
            .max((cur.var_u - prev.var_u).abs());
        if err < 1e-9 {
            return Ok(DistanceStats { error_estimate: err, ..cur });
        }
        prev = cur;
    }
    Err(AuditError::Numerical(
        "quadrature not converging below the error target".into(),
    ))
}

/// TV and W1 between two normalised one-dimensional log-densities on a
/// common scale. Exposed for validation of the quadrature kernel itself.
pub fn density_distance_1d(
    log_p: &dyn Fn(f64) -> f64,
    log_q: &dyn Fn(f64) -> f64,
    scale: f64,
) -> Result<(f64, f64)> {
    let s = rescaled_distance(log_p, log_q, scale, f64::INFINITY)?;
    Ok((s.tv, s.w1))
}

/// Deterministic ground truth for a one-dimensional posterior by adaptive
/// quadrature of the rescaled variable `u = sqrt(n)(theta - center)`.
/// Moments are reported on the parameter scale; TV and W1 on the `u`
/// scale against `N(0, 1/j)`.
pub fn quadrature_truth_1d(
    model: &ModelDescriptor,
    laplace: LaplaceParams1d,
) -> Result<PosteriorTruth> {
    if model.d != 1 {
        return Err(AuditError::Invalid(
            "quadrature ground truth is only available in one dimension".into(),
        ));
    }
    let rn = laplace.n.sqrt();
    let log_p = |u: f64| {
        model
            .logpost(&DVector::from_element(1, laplace.center + u / rn))
            .value
    };
    let sigma2 = 1.0 / laplace.j;
    let log_q = move |u: f64| -u * u / (2.0 * sigma2) - 0.5 * (LN_2PI + sigma2.ln());
    let span = match model.support_lower {
        Some(lb) => (laplace.center - lb) * rn,
        None => f64::INFINITY,
    };
    let s = rescaled_distance(&log_p, &log_q, sigma2.sqrt(), span)?;
    if !(s.error_estimate <= 1e-8) {
        return Err(AuditError::Numerical("tail mass not converging".into()));
    }
    Ok(PosteriorTruth {
        mean: DVector::from_element(1, laplace.center + s.mean_u / rn),
        cov: DMatrix::from_element(1, 1, s.var_u / laplace.n),
        tv_vs_laplace: s.tv,
        w1_vs_laplace: s.w1,
        method: TruthMethod::Quadrature,
        error_estimate: s.error_estimate,
        ess: None,
    })
}

/// Fisher divergence between the rescaled posterior and `N(0, 1/j)`,
/// both truncated to `|u| <= radius * sqrt(n)`: the truncated Gaussian
/// expectation of the squared score gap
/// `(L'(center + u/sqrt(n)) / sqrt(n) + j u)^2`.
pub fn fisher_divergence_1d(
    model: &ModelDescriptor,
    center: f64,
    j: f64,
    radius: f64,
) -> Result<f64> {
    if model.d != 1 {
        return Err(AuditError::Invalid(
            "Fisher divergence quadrature is only available in one dimension".into(),
        ));
    }
    let n = model.n as f64;
    let rn = n.sqrt();
    let t_edge = radius * rn;
    let sigma = (1.0 / j).sqrt();
    let gauss = |u: f64| (-u * u * j / 2.0).exp();
    let score_gap_sq = |u: f64| {
        let g = model
            .logpost(&DVector::from_element(1, center + u / rn))
            .grad[0];
        let gap = g / rn + j * u;
        gap * gap
    };
    let tol = 1e-12;
    let num = crate::quad::adaptive_simpson(&|u| score_gap_sq(u) * gauss(u), -t_edge, 0.0, tol)
        + crate::quad::adaptive_simpson(&|u| score_gap_sq(u) * gauss(u), 0.0, t_edge, tol);
    let mass = crate::quad::adaptive_simpson(&gauss, -t_edge, 0.0, tol * sigma)
        + crate::quad::adaptive_simpson(&gauss, 0.0, t_edge, tol * sigma);
    Ok(num / mass)
}

/// Seeded self-normalised importance sampling for `d <= 8`, using the
/// Gaussian approximation with its scale inflated by a factor of two as
/// the proposal. Errors if the effective sample size drops below 5% of
/// the budget.
pub fn importance_truth_md(
    model: &ModelDescriptor,
    center: &DVector<f64>,
    j: &DMatrix<f64>,
    samples: usize,
    seed: u64,
) -> Result<PosteriorTruth> {
    let d = model.d;
    if d > 8 {
        return Err(AuditError::Invalid(
            "importance-sampling ground truth is limited to dimension 8".into(),
        ));
    }
    if samples < 100 {
        return Err(AuditError::Invalid("importance sampling needs at least 100 samples".into()));
    }
    let n = model.n as f64;
    // Proposal covariance: 4 (n J)^{-1}, i.e. the approximation scaled by 2.
    let cov_chol = (j.scale(n))
        .cholesky()
        .ok_or_else(|| AuditError::NotPositiveDefinite("curvature not positive definite".into()))?
        .inverse()
        .cholesky()
        .ok_or_else(|| AuditError::NotPositiveDefinite("covariance not positive definite".into()))?;
    let l = cov_chol.l().scale(2.0);
    let logdet_prop: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut thetas: Vec<DVector<f64>> = Vec::with_capacity(samples);
    let mut logw: Vec<f64> = Vec::with_capacity(samples);
    for _ in 0..samples {
        let z = DVector::from_fn(d, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
        let theta = center + &l * &z;
        let log_q = -0.5 * z.norm_squared() - 0.5 * logdet_prop - 0.5 * d as f64 * LN_2PI;
        logw.push(model.logpost(&theta).value - log_q);
        thetas.push(theta);
    }
    let shift = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(AuditError::Numerical("all importance weights vanished".into()));
    }
    let w: Vec<f64> = logw.iter().map(|&v| (v - shift).exp()).collect();
    let sum: f64 = w.iter().sum();
    let sum_sq: f64 = w.iter().map(|v| v * v).sum();
    let ess = sum * sum / sum_sq;
    if ess < 0.05 * samples as f64 {
        return Err(AuditError::Unavailable("proposal mismatch; increase inflation".into()));
    }
    let mut mean = DVector::zeros(d);
    for (wi, t) in w.iter().zip(&thetas) {
        mean.axpy(wi / sum, t, 1.0);
    }
    let mut cov = DMatrix::zeros(d, d);
    for (wi, t) in w.iter().zip(&thetas) {
        let c = t - &mean;
        cov.ger(wi / sum, &c, &c, 1.0);
    }
    let error_estimate = (cov.trace().max(0.0)).sqrt() / ess.sqrt();
    Ok(PosteriorTruth {
        mean,
        cov,
        tv_vs_laplace: f64::NAN,
        w1_vs_laplace: f64::NAN,
        method: TruthMethod::Importance,
        error_estimate,
        ess: Some(ess),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;
    use crate::model::{poisson_gamma_model, weibull_invgamma_model};
    use approx::assert_relative_eq;

    fn unit_normal(mu: f64) -> impl Fn(f64) -> f64 {
        move |u: f64| -(u - mu) * (u - mu) / 2.0 - 0.5 * LN_2PI
    }

    #[test]
    fn identical_densities_have_zero_distance() {
        let p = unit_normal(0.0);
        let (tv, w1) = density_distance_1d(&p, &p, 1.0).unwrap();
        assert!(tv.abs() < 1e-12 && w1.abs() < 1e-12);
    }

    #[test]
    fn shifted_normal_distances() {
        // N(0,1) vs N(1,1): W1 = 1; TV = 2 Phi(1/2) - 1.
        let p = unit_normal(1.0);
        let q = unit_normal(0.0);
        let (tv, w1) = density_distance_1d(&p, &q, 1.0).unwrap();
        assert_relative_eq!(w1, 1.0, epsilon = 1e-8);
        let expected_tv = statrs::function::erf::erf(0.5 / std::f64::consts::SQRT_2);
        assert_relative_eq!(tv, expected_tv, epsilon = 1e-8);
        // Symmetry in the arguments.
        let (tv2, w12) = density_distance_1d(&q, &p, 1.0).unwrap();
        assert_relative_eq!(tv, tv2, epsilon = 1e-10);
        assert_relative_eq!(w1, w12, epsilon = 1e-10);
    }

    #[test]
    fn conjugate_poisson_gamma_example() {
        let t = conjugate_truth(
            &ConjugatePosterior::Gamma { shape: 12.1, rate: 6.0 },
            None,
        )
        .unwrap();
        assert_relative_eq!(t.mean[0], 12.1 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(t.cov[(0, 0)], 12.1 / 36.0, epsilon = 1e-15);
        assert!(t.tv_vs_laplace.is_nan());
        // Empty data edge: the prior itself.
        let t = conjugate_truth(&ConjugatePosterior::Gamma { shape: 0.1, rate: 3.0 }, None)
            .unwrap();
        assert_relative_eq!(t.mean[0], 0.1 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn conjugate_weibull_invgamma_example() {
        // k = 1/2, alpha = 3, beta = 10, data [1, 4, 9]: sum of X^k is 6.
        let t = conjugate_truth(
            &ConjugatePosterior::InvGamma { shape: 6.0, scale: 16.0 },
            None,
        )
        .unwrap();
        assert_relative_eq!(t.mean[0], 3.2, epsilon = 1e-15);
        assert_relative_eq!(t.cov[(0, 0)], 16.0 * 16.0 / (25.0 * 4.0), epsilon = 1e-15);
    }

    #[test]
    fn quadrature_matches_conjugate_poisson() {
        let data: Vec<f64> =
            std::iter::repeat([2.0, 3.0, 7.0]).take(10).flatten().collect();
        let m = poisson_gamma_model(&data, 0.1, 3.0).unwrap();
        let g = Geometry::analyze(&m).unwrap();
        let lp = LaplaceParams1d {
            center: g.mode_map.theta[0],
            j: g.curv_map.j[(0, 0)],
            n: m.n as f64,
        };
        let q = quadrature_truth_1d(&m, lp).unwrap();
        let c = conjugate_truth(m.conjugate.as_ref().unwrap(), Some(lp)).unwrap();
        assert_relative_eq!(q.mean[0], c.mean[0], max_relative = 1e-8);
        assert_relative_eq!(q.cov[(0, 0)], c.cov[(0, 0)], max_relative = 1e-8);
        assert_relative_eq!(q.tv_vs_laplace, c.tv_vs_laplace, epsilon = 1e-8);
        assert_relative_eq!(q.w1_vs_laplace, c.w1_vs_laplace, epsilon = 1e-8);
        assert!(q.tv_vs_laplace > 0.0 && q.w1_vs_laplace > 0.0);
    }

    #[test]
    fn quadrature_matches_conjugate_weibull() {
        let data: Vec<f64> =
            std::iter::repeat([1.0, 4.0, 9.0]).take(10) .flatten().collect();
        let m = weibull_invgamma_model(&data, 0.5, 3.0, 10.0).unwrap();
        let g = Geometry::analyze(&m).unwrap();
        let lp = LaplaceParams1d {
            center: g.mode_map.theta[0],
            j: g.curv_map.j[(0, 0)],
            n: m.n as f64,
        };
        let q = quadrature_truth_1d(&m, lp).unwrap();
        let c = conjugate_truth(m.conjugate.as_ref().unwrap(), Some(lp)).unwrap();
        assert_relative_eq!(q.mean[0], c.mean[0], max_relative = 1e-8);
        assert_relative_eq!(q.cov[(0, 0)], c.cov[(0, 0)], max_relative = 1e-8);
        assert_relative_eq!(q.tv_vs_laplace, c.tv_vs_laplace, epsilon = 1e-8);
    }

    #[test]
    fn importance_matches_quadrature_poisson() {
        let data: Vec<f64> =
            std::iter::repeat([2.0, 3.0, 7.0]).take(10).flatten().collect();
        let m = poisson_gamma_model(&data, 0.1, 3.0).unwrap();
        let g = Geometry::analyze(&m).unwrap();
        let lp = LaplaceParams1d {
            center: g.mode_map.theta[0],
            j: g.curv_map.j[(0, 0)],
            n: m.n as f64,
        };
        let q = quadrature_truth_1d(&m, lp).unwrap();
        let imp = importance_truth_md(&m, &g.mode_map.theta, &g.curv_map.j, 200_000, 42).unwrap();
        let se = imp.error_estimate;
        assert!(
            (imp.mean[0] - q.mean[0]).abs() < 3.0 * se,
            "importance mean {} vs quadrature {} (se {se})",
            imp.mean[0],
            q.mean[0]
        );
        assert!(imp.ess.unwrap() > 0.05 * 200_000.0);
        // Seeded determinism.
        let imp2 = importance_truth_md(&m, &g.mode_map.theta, &g.curv_map.j, 200_000, 42).unwrap();
        assert_eq!(imp.mean[0], imp2.mean[0]);
    }

    #[test]
    fn importance_error_shrinks_with_budget() {
        let data: Vec<f64> =
            std::iter::repeat([2.0, 3.0, 7.0]).take(10).flatten().collect();
        let m = poisson_gamma_model(&data, 0.1, 3.0).unwrap();
        let g = Geometry::analyze(&m).unwrap();
        let a = importance_truth_md(&m, &g.mode_map.theta, &g.curv_map.j, 50_000, 9).unwrap();
        let b = importance_truth_md(&m, &g.mode_map.theta, &g.curv_map.j, 200_000, 9).unwrap();
        let ratio = a.error_estimate / b.error_estimate;
        assert!(ratio > 1.4 && ratio < 2.8, "error-estimate ratio {ratio}");
    }

    #[test]
    fn fisher_divergence_positive_and_small() {
        let data: Vec<f64> =
            std::iter::repeat([2.0, 3.0, 7.0]).take(20).flatten().collect();
        let m = poisson_gamma_model(&data, 0.1, 3.0).unwrap();
        let g = Geometry::analyze(&m).unwrap();
        let f = fisher_divergence_1d(&m, g.mode_map.theta[0], g.curv_map.j[(0, 0)], 0.5).unwrap();
        assert!(f > 0.0 && f < 1.0, "fisher divergence {f}");
    }
}
