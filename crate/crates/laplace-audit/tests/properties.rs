//! Randomised structural properties of the certificate machinery.

use laplace_audit::bounds::{
    bound_report, decay_term, decay_terms, effective_dimension, fisher_cap,
};
use laplace_audit::certificates::{
    build_constants, optimality_gap, third_derivative_bound, Centric, ThirdDerivMethod,
};
use laplace_audit::geometry::{curvature, find_mode, shifted_pair, Geometry, Objective};
use laplace_audit::model::poisson_gamma_model;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn poisson_fixture(reps: usize) -> (laplace_audit::model::ModelDescriptor, Geometry) {
    let data: Vec<f64> = std::iter::repeat([2.0, 3.0, 7.0]).take(reps).flatten().collect();
    let m = poisson_gamma_model(&data, 0.1, 3.0).unwrap();
    let g = Geometry::analyze(&m).unwrap();
    (m, g)
}

/// Random symmetric positive-definite matrix with eigenvalues bounded
/// away from zero.
fn random_spd(d: usize, entries: &[f64]) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |i, j| entries[i * d + j]);
    &a * a.transpose() + DMatrix::identity(d, d).scale(0.1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn decay_decreases_in_n(n1 in 10.0_f64..1e6, factor in 1.5_f64..100.0) {
        let d1 = decay_term(1.0, 1.0, 0.5, n1).unwrap();
        let d2 = decay_term(1.0, 1.0, 0.5, n1 * factor).unwrap();
        prop_assert!(d2 <= d1);
        // Strict below the underflow floor.
        if d2 > 1e-300 {
            prop_assert!(d2 < d1);
        }
    }

    #[test]
    fn decay_increases_in_dispersion(tr in 0.1_f64..5.0, extra in 0.1_f64..2.0) {
        let n = 100.0;
        let d1 = decay_term(1.0, tr, 0.5, n).unwrap();
        let d2 = decay_term(1.0, tr + extra, 0.5, n).unwrap();
        prop_assert!(d2 > d1);
    }

    #[test]
    fn shifted_pair_spectra_are_exact_shifts(
        entries in prop::collection::vec(-2.0_f64..2.0, 9),
        radius in 0.01_f64..1.0,
        m in 0.01_f64..3.0,
    ) {
        let j = random_spd(3, &entries);
        let lam_min = j.clone().symmetric_eigen().eigenvalues.min();
        let sp = shifted_pair(&j, radius, m);
        let shift = radius * m / 3.0;
        prop_assert!((sp.lambda_min_plus() - (lam_min + shift)).abs() < 1e-9);
        prop_assert!((sp.lambda_min_minus() - (lam_min - shift)).abs() < 1e-9);
        // Zero shift leaves the spectrum untouched.
        let sp0 = shifted_pair(&j, 0.0, m);
        prop_assert!((sp0.lambda_min_plus() - lam_min).abs() < 1e-12);
    }

    #[test]
    fn logdet_matches_eigenvalue_sum(entries in prop::collection::vec(-2.0_f64..2.0, 16)) {
        let j = random_spd(4, &entries);
        let eig = j.clone().symmetric_eigen().eigenvalues;
        let logdet_eig: f64 = eig.iter().map(|v| v.ln()).sum();
        let sp = shifted_pair(&j, 0.0, 0.0);
        prop_assert!((sp.logdet_plus().unwrap() - logdet_eig).abs() < 1e-8);
        // Operator norm of the inverse is the reciprocal smallest eigenvalue.
        let inv = j.clone().try_inverse().unwrap();
        let op = inv.symmetric_eigen().eigenvalues.max();
        prop_assert!((op * eig.min() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn effective_dimension_lower_bound_holds(
        entries in prop::collection::vec(-2.0_f64..2.0, 9),
        n in 10.0_f64..1e5,
    ) {
        let j = random_spd(3, &entries);
        let eig = j.clone().symmetric_eigen().eigenvalues;
        let curv = laplace_audit::geometry::CurvatureSummary {
            lambda_min: eig.min(),
            trace_inv: eig.iter().map(|v| 1.0 / v).sum(),
            logdet: eig.iter().map(|v| v.ln()).sum(),
            j,
        };
        // Gaussian prior with unit curvature: Hessian of the log-prior is -I.
        let prior_hess = -DMatrix::<f64>::identity(3, 3);
        let (exact, lower) = effective_dimension(&curv, &prior_hess, n).unwrap();
        prop_assert!(exact >= lower - 1e-12, "exact {exact} < lower {lower}");
        prop_assert!(exact <= 3.0 + 1e-12);
    }

    #[test]
    fn fisher_cap_scales_inversely_with_n(
        tr in 0.01_f64..10.0,
        m2 in 0.0_f64..10.0,
        n in 1.0_f64..1e6,
    ) {
        let a = fisher_cap(tr, m2, n);
        let b = fisher_cap(tr, m2, 4.0 * n);
        prop_assert!((a - 4.0 * b).abs() <= 1e-12 * a.abs().max(1e-300));
    }

    #[test]
    fn optimality_gap_grows_with_radius(r in 0.05_f64..1.0, extra in 0.05_f64..1.0) {
        let (m, g) = poisson_fixture(1);
        let k1 = optimality_gap(&m, &g, r).unwrap();
        let k2 = optimality_gap(&m, &g, r + extra).unwrap();
        prop_assert!(k2 > k1, "gap not increasing: {k1} at {r}, {k2} at {}", r + extra);
    }

    #[test]
    fn grid_scan_never_exceeds_analytic_bound(
        radius in 0.1_f64..2.0,
        seed in 0_u64..1000,
    ) {
        let (m, g) = poisson_fixture(1);
        let analytic = third_derivative_bound(
            &m, &g.mode_mle.theta, radius, ThirdDerivMethod::Analytic, Objective::Likelihood,
        ).unwrap();
        let grid = third_derivative_bound(
            &m, &g.mode_mle.theta, radius,
            ThirdDerivMethod::Grid { points: 24, directions: 3, seed },
            Objective::Likelihood,
        ).unwrap();
        prop_assert!(grid <= analytic * (1.0 + 1e-6), "grid {grid} > analytic {analytic}");
    }

    #[test]
    fn mode_search_is_init_independent(init in -3.0_f64..6.0) {
        let (m, _) = poisson_fixture(1);
        let from_default = find_mode(&m, Objective::Likelihood, &m.init_mle).unwrap();
        // Positive-support family: shift the random init into the domain.
        let start = DVector::from_element(1, init.abs().max(0.05));
        let solve = find_mode(&m, Objective::Likelihood, &start).unwrap();
        prop_assert!(solve.converged);
        prop_assert!((solve.theta[0] - from_default.theta[0]).abs() < 1e-6);
    }
}

proptest! {
    // Full bound evaluations are costlier; fewer cases.
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn bound_components_sum_to_total(reps in 20_usize..200, delta_frac in 0.2_f64..0.8) {
        let (m, g) = poisson_fixture(reps);
        let n = m.n as f64;
        for centric in [Centric::Mle, Centric::Map] {
            let (lo, hi) = match laplace_audit::certificates::feasible_radius_interval(&m, &g, centric) {
                Ok(iv) => iv,
                Err(_) => continue,
            };
            let r = lo + delta_frac * (hi - lo);
            let (delta, delta_bar) = match centric {
                Centric::Mle => (r, None),
                Centric::Map => {
                    let (dlo, dhi) =
                        laplace_audit::certificates::feasible_radius_interval(&m, &g, Centric::Mle)
                            .unwrap();
                    (dlo + delta_frac * (dhi - dlo), Some(r))
                }
            };
            let cs = build_constants(&m, &g, centric, delta, delta_bar).unwrap();
            let dec = match decay_terms(&g, &cs, n) {
                Ok(dec) => dec,
                Err(_) => continue,
            };
            let rep = match bound_report(&m, &g, &cs, &dec, centric, n) {
                Ok(rep) => rep,
                Err(_) => continue,
            };
            for bv in [&rep.tv, &rep.w1, &rep.cov_ipm] {
                if !bv.total.is_finite() {
                    continue;
                }
                let sum: f64 = bv.components.iter().map(|(_, v)| v).sum();
                prop_assert!(
                    (sum - bv.total).abs() <= 1e-12 * bv.total.abs().max(1.0),
                    "components {sum} vs total {}",
                    bv.total
                );
                prop_assert!(bv.components.iter().all(|(_, v)| *v >= 0.0 && !v.is_nan()));
            }
        }
    }

    #[test]
    fn curvature_positive_on_fixture(reps in 1_usize..50) {
        let (m, g) = poisson_fixture(reps);
        let c = curvature(&m, &g.mode_mle).unwrap();
        prop_assert!(c.lambda_min > 0.0 && c.trace_inv > 0.0);
        prop_assert!((c.lambda_min - 0.25).abs() < 1e-8);
    }
}
